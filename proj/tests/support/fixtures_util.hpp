#pragma once

#include <string>

#include "mbpi/fixtures.hpp"
#include "mbpi/model.hpp"

namespace mbpi::testing {

inline ValidatedModel fixture(const std::string& name) { return validate(fixture_spec(name)); }

inline ValidatedModel absorbing_fixture(const std::string& name) {
  ModelSpec s = fixture_spec(name);
  s.resurrectionMode = ResurrectionMode::Absorbing;
  return validate(s);
}

}  // namespace mbpi::testing
