#include "internal/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "internal/ode.hpp"

namespace mbpi::detail {

CenteredModel center_model(const ValidatedModel& model, const RootVector& root) {
  CenteredModel c;
  c.q = root.q;
  for (std::size_t k = 0; k < model.dimension(); ++k) {
    auto p = model.branch_gf(k).recentered(c.q);
    p.set_constant_term(0.0);
    c.branch.push_back(std::move(p));
  }
  c.immigration = model.immigration_gf().recentered(c.q);
  if (root.atOne && model.immigration_conservative()) c.immigration.set_constant_term(0.0);
  c.resurrection = model.resurrection_gf().recentered(c.q);
  if (root.atOne && model.resurrection_conservative()) c.resurrection.set_constant_term(0.0);
  return c;
}

namespace {

struct Layout {
  std::size_t n;
  std::size_t m;
  std::size_t logWeight() const { return n; }
  std::size_t sum(std::size_t k) const { return n + 1 + k; }
  std::size_t size() const { return n + 1 + m; }
};

}  // namespace

FlowRun integrate_flow(const ValidatedModel& model, const RootVector& root, std::size_t pivot,
                       const std::vector<FlowIntegrand>& integrands, const FlowOptions& options) {
  const std::size_t n = model.dimension();
  const CenteredModel cm = center_model(model, root);
  const Layout lay{n, integrands.size()};
  const double qp = cm.q[pivot];

  std::vector<double> uBuf(n);
  auto rhs = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
    std::span<const double> v(y.data(), n);
    for (std::size_t k = 0; k < n; ++k) {
      dy[k] = -cm.branch[k](v);
      uBuf[k] = cm.q[k] - v[k];
    }
    const double a = cm.immigration(v);
    dy[lay.logWeight()] = a;
    const FlowPoint pt{t, uBuf, v, y[lay.logWeight()], a, cm.resurrection(v)};
    for (std::size_t k = 0; k < lay.m; ++k) dy[lay.sum(k)] = integrands[k](pt);
  };

  auto sample_at = [&](double t, const std::vector<double>& y) {
    FlowSample s;
    s.t = t;
    s.v.assign(y.begin(), y.begin() + static_cast<long>(n));
    s.u.resize(n);
    for (std::size_t k = 0; k < n; ++k) s.u[k] = cm.q[k] - s.v[k];
    s.gap = s.v[pivot];
    s.logWeight = y[lay.logWeight()];
    s.aValue = cm.immigration(s.v);
    s.bPivot = cm.branch[pivot](s.v);
    const FlowPoint pt{t, s.u, s.v, s.logWeight, s.aValue, cm.resurrection(s.v)};
    for (std::size_t k = 0; k < lay.m; ++k) {
      s.sums.push_back(y[lay.sum(k)]);
      s.rates.push_back(integrands[k](pt));
    }
    return s;
  };

  std::vector<double> y0(lay.size(), 0.0);
  for (std::size_t k = 0; k < n; ++k) y0[k] = cm.q[k];

  FlowRun run;
  run.pivot = pivot;
  run.q = cm.q;
  run.start = sample_at(0.0, y0);

  // Every stopping gap, processed in decreasing order.
  struct Stop {
    double gap;
    int level;       // > 0 for dyadic levels
    std::size_t idx; // target index otherwise
  };
  std::vector<Stop> stops;
  for (int m = 1; m <= options.levels; ++m) stops.push_back({qp * std::ldexp(1.0, -m), m, 0});
  run.targets.resize(options.targetGaps.size());
  for (std::size_t k = 0; k < options.targetGaps.size(); ++k) {
    const double g = options.targetGaps[k];
    if (!(g > 0.0 && g <= qp)) throw Error(ErrorCode::OutOfDomain, "curve target outside (0, q]");
    if (g == qp) {
      run.targets[k] = run.start;
    } else {
      stops.push_back({g, 0, k});
    }
  }
  std::sort(stops.begin(), stops.end(), [](const Stop& a, const Stop& b) { return a.gap > b.gap; });
  run.levels.resize(static_cast<std::size_t>(std::max(options.levels, 0)));

  OdeOptions opt;
  opt.rtol = options.rtol;
  opt.atol.assign(lay.size(), 1e-300);
  // Integrands such as u^k start at rounding level; a pure relative test on
  // their running sums never settles near t = 0.
  for (std::size_t k = 0; k < lay.m; ++k) opt.atol[lay.sum(k)] = 1e-20;
  Dopri5 ode(rhs, 0.0, y0, opt);
  std::vector<double> yy(lay.size());
  std::size_t next = 0;
  const double inf = std::numeric_limits<double>::infinity();
  while (next < stops.size()) {
    if (!ode.step(inf)) {
      std::ostringstream os;
      os << "flow integration stalled at t=" << ode.x() << " with gap " << ode.y()[pivot] << " after "
         << ode.steps() << " steps";
      throw Error(ErrorCode::QuadratureFailure, os.str());
    }
    while (next < stops.size() && ode.y()[pivot] <= stops[next].gap) {
      const double target = stops[next].gap;
      double lo = ode.previous_x();
      double hi = ode.x();
      for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ode.dense_component(mid, pivot) > target) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      ode.dense(hi, yy);
      FlowSample s = sample_at(hi, yy);
      if (stops[next].level > 0) {
        run.levels[static_cast<std::size_t>(stops[next].level - 1)] = std::move(s);
      } else {
        run.targets[stops[next].idx] = std::move(s);
      }
      ++next;
    }
  }
  run.steps = ode.steps();
  return run;
}

TailSeries tail_series(const FlowRun& run, std::size_t integrand) {
  TailSeries s;
  for (const auto& l : run.levels) {
    s.gaps.push_back(l.gap);
    s.sums.push_back(l.sums[integrand]);
    s.density.push_back(l.rates[integrand] / l.bPivot);
  }
  return s;
}

TailSeries log_weight_series(const FlowRun& run) {
  TailSeries s;
  for (const auto& l : run.levels) {
    s.gaps.push_back(l.gap);
    s.sums.push_back(l.logWeight);
    s.density.push_back(l.aValue / l.bPivot);
  }
  return s;
}

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

constexpr double kExponentBand = 1e-3;
constexpr double kConvergedRel = 1e-8;
constexpr std::size_t kSlopeWindow = 8;
constexpr std::size_t kIncrementStart = 20;
constexpr double kHarmonicLimit = 1.05;

}  // namespace

DivergenceVerdict classify_tail(const TailSeries& s) {
  DivergenceVerdict out;
  const std::size_t m = s.gaps.size();
  if (m < kIncrementStart + 2) throw Error(ErrorCode::InvalidArgument, "too few dyadic levels for tail analysis");
  std::ostringstream diag;
  diag.precision(6);

  std::vector<double> lx, ly;
  bool allZero = true;
  for (std::size_t k = m - kSlopeWindow; k < m; ++k) {
    if (s.density[k] != 0.0) allZero = false;
    if (s.density[k] != 0.0 && s.gaps[k] > 0.0) {
      lx.push_back(std::log(s.gaps[k]));
      ly.push_back(std::log(std::abs(s.density[k])));
    }
  }
  if (allZero) {
    out.status = DivergenceStatus::Finite;
    out.value = s.sums.back();
    out.tailExponent = std::numeric_limits<double>::infinity();
    out.diagnostics = "integrand vanishes near the endpoint";
    return out;
  }
  if (lx.size() < 3) {
    out.status = DivergenceStatus::Indeterminate;
    out.diagnostics = "integrand has too few nonzero tail samples";
    return out;
  }
  const double theta = fit_slope(lx, ly);
  out.tailExponent = theta;
  diag << "tail exponent " << theta;

  if (theta <= -1.0 - kExponentBand) {
    out.status = DivergenceStatus::Infinite;
    out.value = std::copysign(std::numeric_limits<double>::infinity(), s.sums.back());
    diag << "; non-integrable power tail";
    out.diagnostics = diag.str();
    return out;
  }
  if (theta >= -1.0 + kExponentBand) {
    auto corrected = [&](std::size_t k) { return s.sums[k] + s.density[k] * s.gaps[k] / (theta + 1.0); };
    const double c1 = corrected(m - 2);
    const double c2 = corrected(m - 1);
    double scale = 0.0;
    for (double v : s.sums) scale = std::max(scale, std::abs(v));
    scale = std::max(scale, std::abs(c2));
    const double change = std::abs(c2 - c1);
    diag << "; tail-corrected change " << change << " on scale " << scale;
    out.value = c2;
    out.status = (change <= kConvergedRel * scale) ? DivergenceStatus::Finite : DivergenceStatus::Indeterminate;
    if (out.status == DivergenceStatus::Indeterminate) diag << "; partial sums not converged";
    out.diagnostics = diag.str();
    return out;
  }
  // Borderline 1/(q-y) behaviour: look at how the per-level increments decay.
  std::vector<double> mx, my;
  for (std::size_t k = kIncrementStart; k < m; ++k) {
    const double d = std::abs(s.sums[k] - s.sums[k - 1]);
    if (d > 0.0) {
      mx.push_back(std::log(static_cast<double>(k + 1)));
      my.push_back(std::log(d));
    }
  }
  const double beta = mx.size() >= 3 ? -fit_slope(mx, my) : std::numeric_limits<double>::infinity();
  diag << "; level-increment decay exponent " << beta;
  if (beta <= kHarmonicLimit) {
    out.status = DivergenceStatus::Infinite;
    out.value = std::copysign(std::numeric_limits<double>::infinity(), s.sums.back());
    diag << "; logarithmic divergence";
  } else {
    out.status = DivergenceStatus::Indeterminate;
    diag << "; borderline exponent, convergence not decidable";
  }
  out.diagnostics = diag.str();
  return out;
}

double power_of(std::span<const double> q, std::span<const double> v, const MultiIndex& i) {
  double s = 0.0;
  for (std::size_t k = 0; k < i.size(); ++k) {
    if (i[k] == 0) continue;
    s += i[k] * (std::log(q[k]) + std::log1p(-v[k] / q[k]));
  }
  return std::exp(s);
}

double one_minus_power(std::span<const double> q, std::span<const double> v, const MultiIndex& i) {
  double s = 0.0;
  for (std::size_t k = 0; k < i.size(); ++k) {
    if (i[k] == 0) continue;
    s += i[k] * (std::log(q[k]) + std::log1p(-v[k] / q[k]));
  }
  return -std::expm1(s);
}

}  // namespace mbpi::detail
