#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbpi/model.hpp"

namespace mbpi {

/// Smallest nonnegative root q of B(u) = 0.
struct RootVector {
  std::vector<double> q;
  long iterations = 0;
  double residual = 0.0;  // max_k |B_k(q)|
  bool atOne = false;     // q == (1,...,1) exactly
};

using RootObserver = std::function<void(std::span<const double> iterate)>;

/// Monotone iteration from 0 accelerated by Newton steps (which stay below q
/// for this convex monotone system). For conservative branching with
/// rho(1) <= kCriticalityTolerance the root is exactly 1.
RootVector minimal_root(const ValidatedModel& model, const RootObserver& observer = {});

/// Default pivot: the lowest type k with B_k(0) > 0.
std::size_t default_pivot(const ValidatedModel& model);

/// Sampled characteristic curve du_k/du = B_k / B_pivot, u_k(0) = 0.
struct CurveSolution {
  std::size_t pivot = 0;
  std::vector<double> grid;                 // pivot coordinate, increasing on [0, q_pivot]
  std::vector<std::vector<double>> values;  // full point (all n coordinates) per grid node
  std::vector<std::vector<double>> slopes;  // du_k/du at each node
  double endpointError = 0.0;
  double closureStart = 0.0;  // pivot value where the terminal linear closure begins
  long steps = 0;

  bool empty() const noexcept { return grid.empty(); }
  /// Point on the curve at pivot value u, by cubic Hermite interpolation.
  std::vector<double> at(double u) const;
};

CurveSolution solve_curve(const ValidatedModel& model, std::size_t pivot, std::size_t gridSize = 201);

struct PivotInvarianceReport {
  std::size_t pivotA = 0;
  std::size_t pivotB = 1;
  double discrepancy = 0.0;
  std::size_t pointsCompared = 0;
};

/// Solves with the two lowest admissible pivots and compares the curves.
PivotInvarianceReport curve_pivot_invariance_check(const ValidatedModel& model, std::size_t gridSize = 201);

/// RFC-4180 CSV with columns u, u_k (k != pivot), B_pivot, A.
std::string curve_csv(const ValidatedModel& model, const CurveSolution& curve, std::size_t gridSize = 201);

enum class DivergenceStatus { Finite, Infinite, Indeterminate };
std::string to_string(DivergenceStatus s);

struct DivergenceVerdict {
  DivergenceStatus status = DivergenceStatus::Indeterminate;
  double value = 0.0;         // meaningful when Finite
  double tailExponent = 0.0;  // slope of log|integrand| against log(q - y) near q
  std::string diagnostics;

  bool finite() const noexcept { return status == DivergenceStatus::Finite; }
};

/// Integral J along the curve on [0,1]; needs an absorbing model with q = 1.
DivergenceVerdict integral_J(const ValidatedModel& model);

struct ExtinctionResult {
  double value = 0.0;
  std::string method;  // "certain-extinction", "ratio-unit-interval", "ratio-below-root"
  std::optional<DivergenceVerdict> j;
  std::optional<double> upperBound;  // prod q_k^{i_k} when q < 1
  double tolerance = 0.0;
};

ExtinctionResult extinction_probability(const ValidatedModel& model, const MultiIndex& i);

struct MeanTimeResult {
  bool finite = false;
  double value = 0.0;
  DivergenceVerdict criterion;  // finiteness test of the mean time
  double tolerance = 0.0;
};

MeanTimeResult mean_extinction_time(const ValidatedModel& model, const MultiIndex& i);

}  // namespace mbpi
