#pragma once

#include <map>
#include <string>
#include <vector>

#include "mbpi/extinction.hpp"
#include "mbpi/model.hpp"

namespace mbpi {

struct DecayResult {
  double lambdaZ = 0.0;
  RootVector root;
};

/// Needs h = a and a communicating state space.
DecayResult decay_parameter(const ValidatedModel& model);

/// True when immigration reaches every type through branching and every type
/// can die out; this is the communicating-class check used before decay analysis.
bool communicating(const ValidatedModel& model, std::string* reason = nullptr);

/// prod q_k^{j_k}.
double invariant_vector(const ValidatedModel& model, const MultiIndex& j);

struct InvariantMeasure {
  double lambda = 0.0;
  std::map<MultiIndex, double> coefficients;  // m_0 = 1
  std::string method;                          // "exact-recurrence" or "truncated-solve"
  double rowResidual = 0.0;                    // max over interior rows
  std::size_t degree = 0;
};

/// lambda-invariant measure up to total degree maxDegree.
InvariantMeasure invariant_measure(const ValidatedModel& model, double lambda, std::size_t maxDegree);

/// Residual of the invariant-measure row equation at state j, using
/// coefficients outside the map as zero.
double invariant_measure_row(const ValidatedModel& model, const std::map<MultiIndex, double>& m, double lambda,
                             const MultiIndex& j);

enum class ConvergenceVerdict { Convergent, Divergent, Indeterminate };
std::string to_string(ConvergenceVerdict v);

struct ConvergenceReport {
  ConvergenceVerdict verdict = ConvergenceVerdict::Indeterminate;
  std::string reason;
  std::optional<DivergenceVerdict> integral;  // of (lambda + A)/B_pivot
  double total = 0.0;                          // M(1)/m_0 when Convergent
};

ConvergenceReport invariant_measure_convergence(const ValidatedModel& model, double lambda);

struct QsdReport {
  bool exists = false;
  bool stationaryCase = false;  // lambda_Z = 0: the QSD is the equilibrium
  std::string verdict;          // "Exists", "Exists (stationary, lambda=0)", "NotExists", "Indeterminate"
  double lambdaZ = 0.0;
  ConvergenceReport convergence;
  std::map<MultiIndex, double> distribution;  // normalised measure when it exists
  double rowResidual = 0.0;
};

QsdReport qsd_verdict(const ValidatedModel& model, std::size_t maxDegree = 64);

}  // namespace mbpi
