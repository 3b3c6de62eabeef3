#include "mbpi/extinction.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "internal/flow.hpp"
#include "internal/ode.hpp"

namespace mbpi {

namespace {

constexpr double kRootStep = 1e-14;
constexpr long kRootMaxIterations = 1000000;

double max_abs_b(const ValidatedModel& model, std::span<const double> u) {
  double r = 0.0;
  for (std::size_t k = 0; k < model.dimension(); ++k) r = std::max(r, std::abs(model.branch_gf(k)(u)));
  return r;
}

void require_absorbing(const ValidatedModel& model, const char* what) {
  if (!model.absorbing()) {
    throw Error(ErrorCode::WrongEncoding, std::string(what) + " needs the absorbing encoding (resurrection absent)");
  }
}

void require_nonzero_state(const ValidatedModel& model, const MultiIndex& i) {
  if (i.size() != model.dimension()) throw Error(ErrorCode::DimensionMismatch, "initial state has wrong dimension");
  if (i.is_zero()) throw Error(ErrorCode::InvalidArgument, "initial state must be nonzero");
}

double hermite(double x0, double x1, double y0, double y1, double d0, double d1, double x) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1;
}

}  // namespace

RootVector minimal_root(const ValidatedModel& model, const RootObserver& observer) {
  const std::size_t n = model.dimension();
  RootVector r;
  if (model.branching_conservative() && model.perron_at_one() <= kCriticalityTolerance) {
    r.q.assign(n, 1.0);
    r.atOne = true;
    r.residual = max_abs_b(model, r.q);
    if (observer) observer(r.q);
    return r;
  }

  std::vector<double> diag(n);
  for (std::size_t k = 0; k < n; ++k) diag[k] = -model.spec().branch[k].diagonal;

  std::vector<double> u(n, 0.0), next(n), b(n);
  if (observer) observer(u);
  for (long it = 1; it <= kRootMaxIterations; ++it) {
    // Fixed-point sweep u <- u + B(u)/(-b_kk): monotone from below.
    for (std::size_t k = 0; k < n; ++k) next[k] = std::min(1.0, u[k] + model.branch_gf(k)(u) / diag[k]);
    // Newton correction: stays below q for this convex monotone system.
    for (std::size_t k = 0; k < n; ++k) b[k] = model.branch_gf(k)(next);
    Eigen::MatrixXd jac(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) jac(i, j) = model.branch_gf(i).partial(j, next);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    Eigen::VectorXd delta = -lu.solve(Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(n)));
    bool accept = delta.allFinite();
    for (std::size_t k = 0; k < n && accept; ++k) {
      if (delta(static_cast<Eigen::Index>(k)) < 0.0 || next[k] + delta(static_cast<Eigen::Index>(k)) > 1.0) accept = false;
    }
    if (accept) {
      for (std::size_t k = 0; k < n; ++k) next[k] += delta(static_cast<Eigen::Index>(k));
    }
    double step = 0.0;
    for (std::size_t k = 0; k < n; ++k) step = std::max(step, std::abs(next[k] - u[k]));
    u = next;
    if (observer) observer(u);
    if (step < kRootStep) {
      r.q = u;
      r.iterations = it;
      r.residual = max_abs_b(model, u);
      r.atOne = std::all_of(u.begin(), u.end(), [](double x) { return x == 1.0; });
      return r;
    }
  }
  std::ostringstream os;
  os << "minimal root iteration did not settle; last residual " << max_abs_b(model, u);
  throw Error(ErrorCode::NoConvergence, os.str());
}

std::size_t default_pivot(const ValidatedModel& model) {
  for (std::size_t k = 0; k < model.dimension(); ++k) {
    if (model.branch_gf(k).constant_term() > 0.0) return k;
  }
  throw Error(ErrorCode::PivotNotAllowed, "no type has B_k(0) > 0");
}

std::vector<double> CurveSolution::at(double u) const {
  if (grid.empty()) throw Error(ErrorCode::NotApplicable, "empty curve");
  if (u < grid.front() || u > grid.back()) throw Error(ErrorCode::OutOfDomain, "curve parameter outside [0, q]");
  auto it = std::upper_bound(grid.begin(), grid.end(), u);
  std::size_t i = (it == grid.end()) ? grid.size() - 2 : static_cast<std::size_t>(it - grid.begin()) - 1;
  i = std::min(i, grid.size() - 2);
  std::vector<double> out(values[i].size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = hermite(grid[i], grid[i + 1], values[i][k], values[i + 1][k], slopes[i][k], slopes[i + 1][k], u);
  }
  out[pivot] = u;
  return out;
}

CurveSolution solve_curve(const ValidatedModel& model, std::size_t pivot, std::size_t gridSize) {
  const std::size_t n = model.dimension();
  CurveSolution c;
  c.pivot = pivot;
  if (pivot >= n) throw Error(ErrorCode::InvalidArgument, "pivot out of range");
  if (n == 1) return c;
  if (!(model.branch_gf(pivot).constant_term() > 0.0)) {
    throw Error(ErrorCode::PivotNotAllowed, "B_pivot(0) = 0 for pivot " + std::to_string(pivot + 1));
  }
  if (gridSize < 2) throw Error(ErrorCode::InvalidArgument, "grid needs at least two points");

  const RootVector root = minimal_root(model);
  const detail::CenteredModel cm = detail::center_model(model, root);
  const double qp = root.q[pivot];
  const double delta = 1e-8;
  const double xEnd = qp - delta;

  auto slope_v = [&](const std::vector<double>& v, std::vector<double>& dv) {
    const double bp = cm.branch[pivot](v);
    for (std::size_t k = 0; k < n; ++k) dv[k] = (k == pivot) ? -1.0 : -cm.branch[k](v) / bp;
  };
  auto rhs = [&](double, const std::vector<double>& v, std::vector<double>& dv) { slope_v(v, dv); };

  // Terminal direction: Perron vector of the Jacobian at q.
  const PerronResult pr = perron_eigen(jacobian(model, root.q));
  std::vector<double> terminal(n);
  for (std::size_t k = 0; k < n; ++k) terminal[k] = pr.vector(static_cast<Eigen::Index>(k)) / pr.vector(static_cast<Eigen::Index>(pivot));

  detail::OdeOptions opt;
  opt.rtol = 1e-12;
  opt.atol.assign(n, 1e-14);
  detail::Dopri5 ode(rhs, 0.0, root.q, opt);

  c.grid.resize(gridSize);
  for (std::size_t i = 0; i < gridSize; ++i) c.grid[i] = qp * static_cast<double>(i) / static_cast<double>(gridSize - 1);
  c.grid.back() = qp;
  c.values.assign(gridSize, std::vector<double>(n));
  c.slopes.assign(gridSize, std::vector<double>(n));

  std::vector<double> v(n), dv(n);
  std::size_t next = 0;
  auto record = [&](std::size_t i, const std::vector<double>& vv) {
    slope_v(vv, dv);
    for (std::size_t k = 0; k < n; ++k) {
      c.values[i][k] = root.q[k] - vv[k];
      c.slopes[i][k] = -dv[k];
    }
    c.values[i][pivot] = c.grid[i];
  };
  record(next++, root.q);
  while (ode.x() < xEnd) {
    if (!ode.step(xEnd)) {
      std::ostringstream os;
      os << "curve step size underflow at u=" << ode.x();
      throw Error(ErrorCode::StiffnessFailure, os.str());
    }
    while (next < gridSize && c.grid[next] <= ode.x()) {
      ode.dense(c.grid[next], v);
      record(next++, v);
    }
  }
  const std::vector<double> vEnd = ode.y();
  c.closureStart = xEnd;
  c.steps = ode.steps();
  c.endpointError = 0.0;
  for (std::size_t k = 0; k < n; ++k) c.endpointError = std::max(c.endpointError, std::abs(vEnd[k] - terminal[k] * delta));
  for (; next < gridSize; ++next) {
    const double rem = qp - c.grid[next];
    for (std::size_t k = 0; k < n; ++k) {
      c.values[next][k] = root.q[k] - vEnd[k] * rem / delta;
      c.slopes[next][k] = vEnd[k] / delta;
    }
    c.values[next][pivot] = c.grid[next];
  }
  return c;
}

PivotInvarianceReport curve_pivot_invariance_check(const ValidatedModel& model, std::size_t gridSize) {
  const std::size_t n = model.dimension();
  if (n == 1) throw Error(ErrorCode::NotApplicable, "pivot invariance needs at least two types");
  std::vector<std::size_t> pivots;
  for (std::size_t k = 0; k < n; ++k) {
    if (model.branch_gf(k).constant_term() > 0.0) pivots.push_back(k);
  }
  if (pivots.size() < 2) throw Error(ErrorCode::PivotNotAllowed, "fewer than two types with B_k(0) > 0");
  PivotInvarianceReport rep;
  rep.pivotA = pivots[0];
  rep.pivotB = pivots[1];
  const CurveSolution a = solve_curve(model, rep.pivotA, gridSize);
  const CurveSolution b = solve_curve(model, rep.pivotB, gridSize);
  for (const auto& p : a.values) {
    const std::vector<double> other = b.at(std::clamp(p[rep.pivotB], b.grid.front(), b.grid.back()));
    for (std::size_t k = 0; k < n; ++k) rep.discrepancy = std::max(rep.discrepancy, std::abs(other[k] - p[k]));
    ++rep.pointsCompared;
  }
  return rep;
}

std::string curve_csv(const ValidatedModel& model, const CurveSolution& curve, std::size_t gridSize) {
  const std::size_t n = model.dimension();
  const std::size_t pivot = curve.pivot;
  std::ostringstream os;
  os << "u";
  for (std::size_t k = 0; k < n; ++k)
    if (k != pivot) os << ",u_" << (k + 1);
  os << ",B_" << (pivot + 1) << ",A\r\n";
  std::vector<std::vector<double>> rows = curve.values;
  if (curve.empty()) {
    const double q = minimal_root(model).q[pivot];
    for (std::size_t i = 0; i < gridSize; ++i) {
      std::vector<double> p(n, 0.0);
      p[pivot] = q * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(gridSize - 1, 1));
      rows.push_back(p);
    }
  }
  char buf[64];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    os << buf;
  };
  for (const auto& p : rows) {
    put(p[pivot]);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == pivot) continue;
      os << ',';
      put(p[k]);
    }
    os << ',';
    put(model.branch_gf(pivot)(p));
    os << ',';
    put(model.immigration_gf()(p));
    os << "\r\n";
  }
  return os.str();
}

std::string to_string(DivergenceStatus s) {
  switch (s) {
    case DivergenceStatus::Finite: return "Finite";
    case DivergenceStatus::Infinite: return "Infinite";
    case DivergenceStatus::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

namespace {

detail::FlowIntegrand weight() {
  return [](const detail::FlowPoint& p) { return std::exp(p.logWeight); };
}

detail::FlowIntegrand weighted_power(const std::vector<double>& q, const MultiIndex& i) {
  return [q, i](const detail::FlowPoint& p) { return detail::power_of(q, p.v, i) * std::exp(p.logWeight); };
}

DivergenceVerdict finite_or_throw(const DivergenceVerdict& v, const char* what) {
  if (!v.finite()) {
    throw Error(ErrorCode::QuadratureFailure, std::string(what) + " did not converge: " + v.diagnostics);
  }
  return v;
}

}  // namespace

DivergenceVerdict integral_J(const ValidatedModel& model) {
  require_absorbing(model, "integral J");
  const RootVector root = minimal_root(model);
  if (!root.atOne) throw Error(ErrorCode::NotApplicable, "q < 1: the supercritical ratio applies instead of J");
  const auto run = detail::integrate_flow(model, root, default_pivot(model), {weight()});
  return detail::classify_tail(detail::tail_series(run, 0));
}

ExtinctionResult extinction_probability(const ValidatedModel& model, const MultiIndex& i) {
  require_absorbing(model, "extinction probability");
  require_nonzero_state(model, i);
  const RootVector root = minimal_root(model);
  const auto run = detail::integrate_flow(model, root, default_pivot(model), {weight(), weighted_power(root.q, i)});
  const DivergenceVerdict denom = detail::classify_tail(detail::tail_series(run, 0));
  ExtinctionResult out;
  out.tolerance = 1e-8;
  if (root.atOne) {
    out.j = denom;
    if (denom.status == DivergenceStatus::Infinite) {
      out.value = 1.0;
      out.method = "certain-extinction";
      out.tolerance = 0.0;
      return out;
    }
    if (denom.status == DivergenceStatus::Indeterminate) {
      throw Error(ErrorCode::IndeterminateJ, "J could not be classified: " + denom.diagnostics);
    }
    const auto num = finite_or_throw(detail::classify_tail(detail::tail_series(run, 1)), "numerator integral");
    out.value = num.value / denom.value;
    out.method = "ratio-unit-interval";
    return out;
  }
  finite_or_throw(denom, "denominator integral");
  const auto num = finite_or_throw(detail::classify_tail(detail::tail_series(run, 1)), "numerator integral");
  out.value = num.value / denom.value;
  out.method = "ratio-below-root";
  double bound = 1.0;
  for (std::size_t k = 0; k < i.size(); ++k) bound *= std::pow(root.q[k], i[k]);
  out.upperBound = bound;
  if (!(out.value > 0.0 && out.value < bound * (1.0 + 1e-9))) {
    std::ostringstream os;
    os << "extinction probability " << out.value << " violates 0 < a < prod q^i = " << bound;
    throw Error(ErrorCode::QuadratureFailure, os.str());
  }
  out.value = std::min(out.value, bound);
  return out;
}

MeanTimeResult mean_extinction_time(const ValidatedModel& model, const MultiIndex& i) {
  require_absorbing(model, "mean extinction time");
  require_nonzero_state(model, i);
  const RootVector root = minimal_root(model);
  if (!root.atOne) throw Error(ErrorCode::NotAlmostSurelyExtinct, "q < 1, so extinction is not certain");
  const std::size_t n = model.dimension();
  MultiIndex all(n);
  for (std::size_t k = 0; k < n; ++k) all[k] = 1;
  const std::vector<double> q = root.q;
  const std::vector<detail::FlowIntegrand> integrands = {
      weight(),
      [q, all](const detail::FlowPoint& p) { return detail::one_minus_power(q, p.v, all) - p.a; },
      [q, i](const detail::FlowPoint& p) { return detail::one_minus_power(q, p.v, i) * std::exp(p.logWeight); },
  };
  const auto run = detail::integrate_flow(model, root, default_pivot(model), integrands);
  const DivergenceVerdict j = detail::classify_tail(detail::tail_series(run, 0));
  if (j.status == DivergenceStatus::Finite) {
    throw Error(ErrorCode::NotAlmostSurelyExtinct, "J is finite, so extinction is not certain");
  }
  if (j.status == DivergenceStatus::Indeterminate) {
    throw Error(ErrorCode::IndeterminateJ, "J could not be classified: " + j.diagnostics);
  }
  MeanTimeResult out;
  out.criterion = detail::classify_tail(detail::tail_series(run, 1));
  if (!out.criterion.finite()) return out;
  const auto logLimit = finite_or_throw(detail::classify_tail(detail::log_weight_series(run)), "integral of A/B");
  const auto body = finite_or_throw(detail::classify_tail(detail::tail_series(run, 2)), "mean-time integral");
  out.finite = true;
  out.value = std::exp(-logLimit.value) * body.value;
  out.tolerance = 1e-8 * out.value;
  return out;
}

}  // namespace mbpi
