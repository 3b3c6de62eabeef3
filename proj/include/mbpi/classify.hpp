#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbpi/extinction.hpp"
#include "mbpi/model.hpp"

namespace mbpi {

enum class Recurrence { Recurrent, Transient, Indeterminate };
enum class Ergodicity { Ergodic, NullRecurrent, NotApplicable, Indeterminate };

std::string to_string(Recurrence r);
std::string to_string(Ergodicity e);

struct ClassificationEvidence {
  double rhoAtOne = 0.0;
  std::vector<double> q;
  std::optional<DivergenceVerdict> j;              // absent when q < 1
  std::optional<DivergenceVerdict> stationaryIntegral;  // integral of (-A-H)/B_pivot
};

struct ClassificationReport {
  bool unique = true;
  std::optional<bool> honest;  // empty means unknown
  Recurrence recurrence = Recurrence::Indeterminate;
  Ergodicity ergodicity = Ergodicity::NotApplicable;
  bool exponentiallyErgodic = false;
  bool stronglyErgodic = false;
  ClassificationEvidence evidence;
};

/// Needs h_0 < 0 (a resurrection family, possibly the immigration one).
ClassificationReport classify(const ValidatedModel& model);

/// Generating function of the equilibrium along the curve, s in [0, 1) in the
/// pivot coordinate. Normalised by its limit at s -> 1.
double equilibrium_curve_value(const ValidatedModel& model, double s);
std::vector<double> equilibrium_curve_values(const ValidatedModel& model, std::span<const double> s);

struct EquilibriumPmf {
  std::map<MultiIndex, double> probabilities;  // every state up to maxDegree (total degree)
  std::string method;                          // "recurrence" or "truncated-solve"
  double pi0 = 0.0;
  double tailMass = 0.0;  // 1 - sum of returned probabilities
  double residual = 0.0;  // normalisation defect of the full computed series
  std::size_t computedDegree = 0;
};

EquilibriumPmf equilibrium_pmf(const ValidatedModel& model, std::size_t maxDegree);

}  // namespace mbpi
