#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mbpi/extinction.hpp"
#include "mbpi/model.hpp"

namespace mbpi::detail {

/// Point on the characteristic flow du/dt = B(u), u(0) = 0. Time along the
/// flow is the natural parameter of the curve: d(pivot)/dt = B_pivot, so
/// any integral of g / B_pivot over the pivot coordinate equals the integral
/// of g over t.
struct FlowPoint {
  double t = 0.0;
  std::span<const double> u;
  std::span<const double> v;  // q - u, kept separately for precision near q
  double logWeight = 0.0;     // L(t) = integral of A dt
  double a = 0.0;             // A(u)
  double h = 0.0;             // H(u)
};

using FlowIntegrand = std::function<double(const FlowPoint&)>;

struct FlowSample {
  double t = 0.0;
  double gap = 0.0;  // q_pivot - u_pivot
  std::vector<double> u;
  std::vector<double> v;
  double logWeight = 0.0;
  double aValue = 0.0;       // A(u)
  double bPivot = 0.0;       // B_pivot(u)
  std::vector<double> sums;  // integrals of each integrand from 0 to t
  std::vector<double> rates; // integrand values at t
};

struct FlowOptions {
  int levels = 40;                 // dyadic gaps q_pivot * 2^-m, m = 1..levels
  std::vector<double> targetGaps;  // extra stopping points, any order
  double rtol = 1e-12;
};

struct FlowRun {
  std::size_t pivot = 0;
  std::vector<double> q;
  FlowSample start;
  std::vector<FlowSample> levels;   // index m-1 for level m
  std::vector<FlowSample> targets;  // same order as options.targetGaps
  long steps = 0;
};

/// Polynomials re-expanded around q so that values near q keep full relative
/// precision. Branch constants are dropped (q is an exact root of the shifted
/// system); immigration and resurrection keep A(q), H(q).
struct CenteredModel {
  std::vector<double> q;
  std::vector<SparsePolynomial> branch;
  SparsePolynomial immigration;
  SparsePolynomial resurrection;
};

CenteredModel center_model(const ValidatedModel& model, const RootVector& root);

FlowRun integrate_flow(const ValidatedModel& model, const RootVector& root, std::size_t pivot,
                       const std::vector<FlowIntegrand>& integrands, const FlowOptions& options = {});

/// Series view of one integral along the dyadic levels.
struct TailSeries {
  std::vector<double> gaps;     // q - y at level m
  std::vector<double> sums;     // partial integrals up to level m
  std::vector<double> density;  // integrand in the pivot variable at level m
};

TailSeries tail_series(const FlowRun& run, std::size_t integrand);
TailSeries log_weight_series(const FlowRun& run);

/// Decides convergence of an improper integral from its dyadic partial sums.
DivergenceVerdict classify_tail(const TailSeries& series);

/// 1 - prod u_k^{i_k} evaluated from v = q - u without cancellation.
double one_minus_power(std::span<const double> q, std::span<const double> v, const MultiIndex& i);
double power_of(std::span<const double> q, std::span<const double> v, const MultiIndex& i);

}  // namespace mbpi::detail
