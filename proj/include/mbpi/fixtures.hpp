#pragma once

#include <string>
#include <vector>

#include "mbpi/model.hpp"

namespace mbpi {

/// Names of the bundled models: M1, M2, M3, M4 and the asymmetric two-type A2.
std::vector<std::string> fixture_names();

/// Bundled model with resurrection equal to immigration. Throws
/// InvalidArgument for an unknown name.
ModelSpec fixture_spec(const std::string& name);

/// One-type birth-death branching with single immigrants:
/// b_0 = death, b_2 = birth, a_1 = immigration.
ModelSpec birth_death_immigration(double death, double birth, double immigration);

}  // namespace mbpi
