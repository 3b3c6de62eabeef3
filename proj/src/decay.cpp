#include "mbpi/decay.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "internal/flow.hpp"

namespace mbpi {

std::string to_string(ConvergenceVerdict v) {
  switch (v) {
    case ConvergenceVerdict::Convergent: return "Convergent";
    case ConvergenceVerdict::Divergent: return "Divergent";
    case ConvergenceVerdict::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

namespace {

void require_same_as_immigration(const ValidatedModel& model, const char* what) {
  if (!model.resurrection_is_immigration()) {
    throw Error(ErrorCode::WrongEncoding, std::string(what) + " needs resurrection \"same_as_immigration\"");
  }
}

struct Source {
  MultiIndex from;
  double rate;
};

// All states k with q_{kj} != 0, together with q_{kj} (diagonal included).
std::vector<Source> sources(const ValidatedModel& model, const MultiIndex& j) {
  const auto& spec = model.spec();
  const std::size_t n = model.dimension();
  std::vector<Source> out;
  double diag = 0.0;
  for (std::size_t l = 0; l < n; ++l) diag += j[l] * spec.branch[l].diagonal;
  if (j.is_zero()) {
    if (const RateDistribution* h = model.resurrection_distribution()) diag += h->diagonal;
  } else {
    diag += spec.immigration.diagonal;
  }
  out.push_back({j, diag});
  auto minus = [&](const MultiIndex& a, const MultiIndex& b, MultiIndex& r) {
    std::vector<int> c(n);
    for (std::size_t k = 0; k < n; ++k) {
      c[k] = a[k] - b[k];
      if (c[k] < 0) return false;
    }
    r = MultiIndex(std::move(c));
    return true;
  };
  MultiIndex k;
  for (std::size_t l = 0; l < n; ++l) {
    for (const auto& e : spec.branch[l].entries) {
      // k - e_l + o = j  =>  k = j - o + e_l
      std::vector<int> c(n);
      bool ok = true;
      for (std::size_t x = 0; x < n; ++x) {
        c[x] = j[x] - e.offset[x] + (x == l ? 1 : 0);
        ok = ok && c[x] >= 0;
      }
      if (!ok || c[l] < 1) continue;
      MultiIndex from(std::move(c));
      out.push_back({from, from[l] * e.rate});
    }
  }
  for (const auto& e : spec.immigration.entries) {
    if (minus(j, e.offset, k) && !k.is_zero()) out.push_back({k, e.rate});
  }
  if (const RateDistribution* h = model.resurrection_distribution()) {
    for (const auto& e : h->entries)
      if (e.offset == j) out.push_back({MultiIndex(n), e.rate});
  }
  return out;
}

std::vector<MultiIndex> states_up_to(std::size_t n, long degree) {
  std::vector<MultiIndex> out;
  std::vector<int> c(n, 0);
  while (true) {
    long t = 0;
    for (int x : c) t += x;
    if (t <= degree) out.emplace_back(c);
    std::size_t k = 0;
    while (k < n) {
      if (c[k] < degree) {
        ++c[k];
        break;
      }
      c[k] = 0;
      ++k;
    }
    if (k == n) break;
  }
  std::sort(out.begin(), out.end(), [](const MultiIndex& a, const MultiIndex& b) {
    if (a.total() != b.total()) return a.total() < b.total();
    return a < b;
  });
  return out;
}

constexpr double kLambdaMatch = 1e-10;
constexpr long double kMeasureNoiseFloor = 1e-16L;

}  // namespace

bool communicating(const ValidatedModel& model, std::string* reason) {
  const std::size_t n = model.dimension();
  const auto& spec = model.spec();
  const auto pattern = offspring_sign_pattern(spec);
  std::vector<bool> reached(n, false);
  std::vector<std::size_t> stack;
  for (const auto& e : spec.immigration.entries)
    for (std::size_t k = 0; k < n; ++k)
      if (e.offset[k] > 0 && !reached[k]) {
        reached[k] = true;
        stack.push_back(k);
      }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j)
      if (pattern[i][j] && !reached[j]) {
        reached[j] = true;
        stack.push_back(j);
      }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!reached[k]) {
      if (reason) *reason = "type " + std::to_string(k + 1) + " is never produced from immigration";
      return false;
    }
  }
  // A type can die out if some split of it leads only to types that can.
  std::vector<bool> dies(n, false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (dies[k]) continue;
      if (model.branch_gf(k).constant_term() > 0.0) {
        dies[k] = changed = true;
        continue;
      }
      for (const auto& e : spec.branch[k].entries) {
        bool all = true;
        for (std::size_t x = 0; x < n; ++x)
          if (e.offset[x] > 0 && !dies[x]) all = false;
        if (all) {
          dies[k] = changed = true;
          break;
        }
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!dies[k]) {
      if (reason) *reason = "a type-" + std::to_string(k + 1) + " particle can never die out";
      return false;
    }
  }
  return true;
}

DecayResult decay_parameter(const ValidatedModel& model) {
  require_same_as_immigration(model, "decay parameter");
  std::string why;
  if (!communicating(model, &why)) throw Error(ErrorCode::NotCommunicating, why);
  DecayResult r;
  r.root = minimal_root(model);
  if (r.root.atOne && model.immigration_conservative()) {
    r.lambdaZ = 0.0;
  } else {
    r.lambdaZ = std::max(0.0, -model.immigration_gf()(r.root.q));
  }
  return r;
}

double invariant_vector(const ValidatedModel& model, const MultiIndex& j) {
  const DecayResult d = decay_parameter(model);
  if (j.size() != model.dimension()) throw Error(ErrorCode::DimensionMismatch, "index has wrong dimension");
  double v = 1.0;
  for (std::size_t k = 0; k < j.size(); ++k) v *= std::pow(d.root.q[k], j[k]);
  return v;
}

double invariant_measure_row(const ValidatedModel& model, const std::map<MultiIndex, double>& m, double lambda,
                             const MultiIndex& j) {
  double s = 0.0;
  auto get = [&](const MultiIndex& k) {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  };
  s += lambda * get(j);
  for (const auto& src : sources(model, j)) s += get(src.from) * src.rate;
  return s;
}

InvariantMeasure invariant_measure(const ValidatedModel& model, double lambda, std::size_t maxDegree) {
  require_same_as_immigration(model, "invariant measure");
  const DecayResult d = decay_parameter(model);
  if (!(lambda >= 0.0 && lambda <= d.lambdaZ + kLambdaMatch)) {
    std::ostringstream os;
    os << "lambda " << lambda << " outside [0, " << d.lambdaZ << "]";
    throw Error(ErrorCode::OutOfDomain, os.str());
  }
  if (maxDegree < 1) throw Error(ErrorCode::InvalidArgument, "maxDegree must be at least 1");
  const std::size_t n = model.dimension();
  InvariantMeasure out;
  out.lambda = lambda;

  if (n == 1) {
    out.method = "exact-recurrence";
    const long double b0 = model.branch_gf(0).constant_term();
    std::vector<long double> m{1.0L};
    long double peak = 1.0L;
    for (std::size_t j = 0; j < maxDegree; ++j) {
      long double s = static_cast<long double>(lambda) * m[j];
      for (const auto& src : sources(model, MultiIndex{static_cast<int>(j)})) {
        const std::size_t k = static_cast<std::size_t>(src.from[0]);
        if (k <= j) s += m[k] * static_cast<long double>(src.rate);
      }
      const long double next = -s / (static_cast<long double>(j + 1) * b0);
      if (!(next > kMeasureNoiseFloor * peak)) break;  // cancellation noise from here on
      m.push_back(next);
      peak = std::max(peak, next);
    }
    for (std::size_t j = 0; j < m.size(); ++j) out.coefficients[MultiIndex{static_cast<int>(j)}] = static_cast<double>(m[j]);
    out.degree = m.size() - 1;
    for (std::size_t j = 0; j < out.degree; ++j) {
      out.rowResidual = std::max(out.rowResidual,
                                 std::abs(invariant_measure_row(model, out.coefficients, lambda, MultiIndex{static_cast<int>(j)})));
    }
    return out;
  }

  out.method = "truncated-solve";
  const long degree = static_cast<long>(maxDegree);
  const auto states = states_up_to(n, degree);
  std::map<MultiIndex, Eigen::Index> col;
  for (std::size_t k = 1; k < states.size(); ++k) col[states[k]] = static_cast<Eigen::Index>(k - 1);
  const Eigen::Index unknowns = static_cast<Eigen::Index>(states.size() - 1);
  // Rows of degree < maxDegree see all their neighbours and are enforced
  // exactly; the outermost rows lack their degree+1 neighbours and are only
  // fitted in the remaining null space.
  std::vector<const MultiIndex*> interior, boundary;
  for (const auto& j : states) (j.total() < degree ? interior : boundary).push_back(&j);
  auto assemble = [&](const std::vector<const MultiIndex*>& rowsOf, Eigen::MatrixXd& a, Eigen::VectorXd& rhs) {
    a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rowsOf.size()), unknowns);
    rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rowsOf.size()));
    for (std::size_t r = 0; r < rowsOf.size(); ++r) {
      std::vector<Source> src = sources(model, *rowsOf[r]);
      src.front().rate += lambda;  // diagonal entry first
      const Eigen::Index ri = static_cast<Eigen::Index>(r);
      for (const auto& sr : src) {
        if (sr.from.is_zero()) {
          rhs(ri) -= sr.rate;
        } else if (auto it = col.find(sr.from); it != col.end()) {
          a(ri, it->second) += sr.rate;
        }
      }
    }
  };
  Eigen::MatrixXd ai, ab;
  Eigen::VectorXd bi, bb;
  assemble(interior, ai, bi);
  assemble(boundary, ab, bb);
  // ai^T P = Q [R11 R12; 0 0]; write x = Q y with y = (y1, y2).
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ai.transpose());
  const Eigen::Index rank = qr.rank();
  const Eigen::MatrixXd qmat = qr.householderQ();
  const Eigen::VectorXd pb = qr.colsPermutation().transpose() * bi;
  Eigen::VectorXd y1 = qr.matrixR().topLeftCorner(rank, rank).transpose().triangularView<Eigen::Lower>().solve(pb.head(rank));
  const Eigen::MatrixXd q1 = qmat.leftCols(rank);
  const Eigen::MatrixXd q2 = qmat.rightCols(unknowns - rank);
  Eigen::VectorXd x = q1 * y1;
  if (q2.cols() > 0 && ab.rows() > 0) {
    const Eigen::VectorXd y2 = (ab * q2).colPivHouseholderQr().solve(bb - ab * x);
    x += q2 * y2;
  }
  out.coefficients[MultiIndex(n)] = 1.0;
  for (const auto& [state, c] : col) out.coefficients[state] = x(c);
  out.degree = maxDegree;
  for (const auto& j : states) {
    if (j.total() < degree) {
      out.rowResidual = std::max(out.rowResidual, std::abs(invariant_measure_row(model, out.coefficients, lambda, j)));
    }
  }
  for (const auto& [state, c] : out.coefficients) {
    if (!(c > 0.0)) {
      std::ostringstream os;
      os << "coefficient at " << state.to_string() << " is " << c << "; truncation degree " << maxDegree
         << " is too small";
      throw Error(ErrorCode::NonPositiveCoefficient, os.str());
    }
  }
  return out;
}

ConvergenceReport invariant_measure_convergence(const ValidatedModel& model, double lambda) {
  require_same_as_immigration(model, "invariant measure convergence");
  const DecayResult d = decay_parameter(model);
  ConvergenceReport rep;
  if (std::abs(lambda - d.lambdaZ) > kLambdaMatch) {
    rep.verdict = ConvergenceVerdict::Divergent;
    rep.reason = "lambda differs from the decay parameter";
    return rep;
  }
  if (!(model.perron_at_one() <= kCriticalityTolerance) || !d.root.atOne) {
    rep.verdict = ConvergenceVerdict::Divergent;
    rep.reason = "rho(1) > 0";
    return rep;
  }
  const auto run = detail::integrate_flow(model, d.root, default_pivot(model),
                                          {[lambda](const detail::FlowPoint& p) { return lambda + p.a; }});
  rep.integral = detail::classify_tail(detail::tail_series(run, 0));
  switch (rep.integral->status) {
    case DivergenceStatus::Finite:
      rep.verdict = ConvergenceVerdict::Convergent;
      rep.reason = "integral of (lambda + A)/B is finite";
      rep.total = std::exp(-rep.integral->value);
      break;
    case DivergenceStatus::Infinite:
      rep.verdict = ConvergenceVerdict::Divergent;
      rep.reason = "integral of (lambda + A)/B diverges to -infinity";
      break;
    case DivergenceStatus::Indeterminate:
      rep.verdict = ConvergenceVerdict::Indeterminate;
      rep.reason = "integral of (lambda + A)/B could not be classified";
      break;
  }
  return rep;
}

QsdReport qsd_verdict(const ValidatedModel& model, std::size_t maxDegree) {
  require_same_as_immigration(model, "quasi-stationary distribution");
  QsdReport rep;
  const DecayResult d = decay_parameter(model);
  rep.lambdaZ = d.lambdaZ;
  rep.convergence = invariant_measure_convergence(model, d.lambdaZ);
  switch (rep.convergence.verdict) {
    case ConvergenceVerdict::Divergent: rep.verdict = "NotExists"; return rep;
    case ConvergenceVerdict::Indeterminate: rep.verdict = "Indeterminate"; return rep;
    case ConvergenceVerdict::Convergent: break;
  }
  rep.exists = true;
  rep.stationaryCase = d.lambdaZ == 0.0;
  rep.verdict = rep.stationaryCase ? "Exists (stationary, lambda=0)" : "Exists";
  const InvariantMeasure m = invariant_measure(model, d.lambdaZ, maxDegree);
  rep.rowResidual = m.rowResidual / rep.convergence.total;
  for (const auto& [state, c] : m.coefficients) rep.distribution[state] = c / rep.convergence.total;
  return rep;
}

}  // namespace mbpi
