#include "mbpi/oracle.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace mbpi {

namespace {

long offspring_reach(const ModelSpec& spec) {
  long reach = 0;
  for (const auto& e : spec.immigration.entries) reach = std::max(reach, e.offset.total());
  for (const auto& e : spec.resurrection.entries) reach = std::max(reach, e.offset.total());
  for (const auto& b : spec.branch)
    for (const auto& e : b.entries) reach = std::max(reach, e.offset.total());
  return reach;
}

bool within(const MultiIndex& s, CapKind kind, int cap) {
  if (kind == CapKind::TotalDegree) return s.total() <= cap;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (s[k] > cap) return false;
  return true;
}

bool on_boundary(const MultiIndex& s, CapKind kind, int cap) {
  if (kind == CapKind::TotalDegree) return s.total() == cap;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (s[k] == cap) return true;
  return false;
}

// Augmented uniformized chain: last index is the overflow state.
Eigen::MatrixXd uniformized(const TruncatedGenerator& gen, double lambda) {
  const Eigen::Index n = static_cast<Eigen::Index>(gen.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n + 1, n + 1);
  s.topLeftCorner(n, n) = gen.matrix / lambda;
  s.topLeftCorner(n, n).diagonal().array() += 1.0;
  s.col(n).head(n) = gen.leak / lambda;
  s(n, n) = 1.0;
  return s;
}

}  // namespace

std::size_t TruncatedGenerator::index_of(const MultiIndex& state) const {
  auto it = lookup_.find(state);
  if (it == lookup_.end()) throw Error(ErrorCode::OutOfDomain, "state " + state.to_string() + " outside truncation");
  return it->second;
}

bool TruncatedGenerator::contains(const MultiIndex& state) const { return lookup_.count(state) > 0; }

double TruncatedGenerator::max_exit_rate() const {
  double r = 0.0;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) r = std::max(r, -matrix(i, i));
  return r;
}

TruncatedGenerator build_truncated(const ValidatedModel& model, int cap, CapKind kind, long initialTotal) {
  const std::size_t n = model.dimension();
  const long need = std::max<long>(8, initialTotal + offspring_reach(model.spec()));
  if (cap < need) {
    throw Error(ErrorCode::CapTooSmall, "cap " + std::to_string(cap) + " below required " + std::to_string(need));
  }
  TruncatedGenerator g;
  g.n = n;
  g.capKind = kind;
  g.cap = cap;
  g.absorbing = model.absorbing();

  // Odometer over the per-coordinate box, filtered by the cap.
  std::vector<int> c(n, 0);
  while (true) {
    MultiIndex s(c);
    if (within(s, kind, cap)) g.states.push_back(s);
    std::size_t k = 0;
    while (k < n) {
      if (c[k] < cap) {
        ++c[k];
        break;
      }
      c[k] = 0;
      ++k;
    }
    if (k == n) break;
  }
  std::sort(g.states.begin(), g.states.end(), [](const MultiIndex& a, const MultiIndex& b) {
    if (a.total() != b.total()) return a.total() < b.total();
    return a < b;
  });
  for (std::size_t i = 0; i < g.states.size(); ++i) g.lookup_[g.states[i]] = i;

  const Eigen::Index N = static_cast<Eigen::Index>(g.states.size());
  g.matrix = Eigen::MatrixXd::Zero(N, N);
  g.leak = Eigen::VectorXd::Zero(N);
  const auto& spec = model.spec();
  for (Eigen::Index r = 0; r < N; ++r) {
    const MultiIndex& i = g.states[static_cast<std::size_t>(r)];
    double out = 0.0;   // off-diagonal rate
    double diag = 0.0;  // total exit rate (negative)
    auto jump = [&](const MultiIndex& target, double rate) {
      out += rate;
      if (within(target, kind, cap)) {
        g.matrix(r, static_cast<Eigen::Index>(g.lookup_.at(target))) += rate;
      } else {
        g.leak(r) += rate;
      }
    };
    if (i.is_zero()) {
      if (const RateDistribution* h = model.resurrection_distribution()) {
        for (const auto& e : h->entries) jump(i + e.offset, e.rate);
        diag = h->diagonal;
      }
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        if (i[k] == 0) continue;
        MultiIndex base = i;
        base[k] -= 1;
        for (const auto& e : spec.branch[k].entries) jump(base + e.offset, i[k] * e.rate);
        diag += i[k] * spec.branch[k].diagonal;
      }
      for (const auto& e : spec.immigration.entries) jump(i + e.offset, e.rate);
      diag += spec.immigration.diagonal;
    }
    g.matrix(r, r) = diag;
    // Killing from non-conservative families also leaves the box.
    g.leak(r) += std::max(0.0, -diag - out);
  }
  return g;
}

TransitionMatrix transition_matrix(const TruncatedGenerator& gen, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t must be nonnegative");
  const Eigen::Index n = static_cast<Eigen::Index>(gen.size());
  TransitionMatrix out;
  const double lambda = gen.max_exit_rate();
  if (t == 0.0 || lambda == 0.0) {
    out.p = Eigen::MatrixXd::Identity(n, n);
    out.leak = Eigen::VectorXd::Zero(n);
    return out;
  }
  const Eigen::MatrixXd s = uniformized(gen, lambda);
  // Keep lambda*tau moderate so the Poisson series is short, then square back up.
  constexpr double kStepLimit = 64.0;
  int squarings = 0;
  double tau = t;
  while (lambda * tau > kStepLimit) {
    tau *= 0.5;
    ++squarings;
  }
  const double mean = lambda * tau;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n + 1, n + 1);
  double w = std::exp(-mean);
  Eigen::MatrixXd p = w * term;
  long m = 0;
  while (true) {
    ++m;
    w *= mean / static_cast<double>(m);
    term = term * s;
    p += w * term;
    if (static_cast<double>(m) > mean && w < 1e-22) break;
  }
  for (int k = 0; k < squarings; ++k) p = p * p;
  out.p = p.topLeftCorner(n, n);
  out.leak = p.col(n).head(n);
  out.squarings = squarings;
  out.terms = m;
  return out;
}

namespace {

// Poisson(mean) weights in log space, valid for any mean.
double poisson_weight(double mean, long m) {
  return std::exp(-mean + static_cast<double>(m) * std::log(mean) - std::lgamma(static_cast<double>(m) + 1.0));
}

long poisson_cutoff(double mean) {
  return static_cast<long>(std::ceil(mean + 12.0 * std::sqrt(mean) + 40.0));
}

}  // namespace

TransitionRow transition_row(const TruncatedGenerator& gen, const MultiIndex& i, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t must be nonnegative");
  const Eigen::Index n = static_cast<Eigen::Index>(gen.size());
  const Eigen::Index start = static_cast<Eigen::Index>(gen.index_of(i));
  TransitionRow out;
  const double lambda = gen.max_exit_rate();
  if (t == 0.0 || lambda == 0.0) {
    out.p = Eigen::VectorXd::Unit(n, start);
    return out;
  }
  const Eigen::MatrixXd st = uniformized(gen, lambda).transpose();
  const double mean = lambda * t;
  const long last = poisson_cutoff(mean);
  Eigen::VectorXd x = Eigen::VectorXd::Unit(n + 1, start);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n + 1);
  for (long m = 0; m <= last; ++m) {
    const double w = poisson_weight(mean, m);
    if (w > 0.0) acc += w * x;
    x = st * x;
  }
  out.p = acc.head(n);
  out.leak = acc(n);
  out.terms = last + 1;
  return out;
}

StationaryResult stationary_solve(const TruncatedGenerator& gen) {
  const Eigen::Index n = static_cast<Eigen::Index>(gen.size());
  Eigen::MatrixXd q = gen.matrix;
  // Discard escaping jumps so every row is conservative.
  for (Eigen::Index i = 0; i < n; ++i) q(i, i) = -(q.row(i).sum() - q(i, i));
  Eigen::MatrixXd a = q.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (lu.rank() < n) throw Error(ErrorCode::SingularSystem, "truncated stationary system is singular; raise the cap");
  StationaryResult out;
  out.probabilities = lu.solve(rhs);
  if (!out.probabilities.allFinite()) throw Error(ErrorCode::SingularSystem, "stationary solve produced non-finite values");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (on_boundary(gen.states[static_cast<std::size_t>(i)], gen.capKind, gen.cap)) {
      out.boundaryMass += std::abs(out.probabilities(i));
    }
    out.leakFlux += std::abs(out.probabilities(i)) * gen.leak(i);
  }
  const double lambda = gen.max_exit_rate();
  out.errorBound = std::max(out.boundaryMass, lambda > 0.0 ? out.leakFlux / lambda : 0.0);
  return out;
}

DecaySlope decay_slope(const TruncatedGenerator& gen, const MultiIndex& i, double t1, double t2, int points) {
  if (!(t1 >= 0.0 && t2 > t1) || points < 2) throw Error(ErrorCode::InvalidArgument, "window must satisfy 0 <= t1 < t2");
  const Eigen::Index n = static_cast<Eigen::Index>(gen.size());
  const Eigen::Index start = static_cast<Eigen::Index>(gen.index_of(i));
  const double lambda = gen.max_exit_rate();
  DecaySlope out;
  for (int k = 0; k < points; ++k) out.times.push_back(t1 + (t2 - t1) * k / (points - 1));

  // One pass of the uniformized chain serves every sample time: only the
  // diagonal coordinate and the overflow coordinate are needed.
  const Eigen::MatrixXd st = uniformized(gen, lambda).transpose();
  const long last = poisson_cutoff(lambda * t2);
  std::vector<double> stay(static_cast<std::size_t>(last + 1)), gone(static_cast<std::size_t>(last + 1));
  Eigen::VectorXd x = Eigen::VectorXd::Unit(n + 1, start);
  for (long m = 0; m <= last; ++m) {
    stay[static_cast<std::size_t>(m)] = x(start);
    gone[static_cast<std::size_t>(m)] = x(n);
    x = st * x;
  }
  for (double t : out.times) {
    const double mean = lambda * t;
    double p = 0.0, leak = 0.0;
    for (long m = 0; m <= last; ++m) {
      const double w = mean > 0.0 ? poisson_weight(mean, m) : (m == 0 ? 1.0 : 0.0);
      p += w * stay[static_cast<std::size_t>(m)];
      leak += w * gone[static_cast<std::size_t>(m)];
    }
    if (!(p > 1e-12)) {
      std::ostringstream os;
      os << "p_ii(" << t << ") = " << p << " is below the resolvable level";
      throw Error(ErrorCode::Underflow, os.str());
    }
    out.logP.push_back(std::log(p));
    out.maxLeak = std::max(out.maxLeak, leak);
  }
  const double k = static_cast<double>(points);
  double mt = 0.0, ml = 0.0;
  for (int j = 0; j < points; ++j) {
    mt += out.times[static_cast<std::size_t>(j)] / k;
    ml += out.logP[static_cast<std::size_t>(j)] / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (int j = 0; j < points; ++j) {
    const double dt = out.times[static_cast<std::size_t>(j)] - mt;
    sxy += dt * (out.logP[static_cast<std::size_t>(j)] - ml);
    sxx += dt * dt;
  }
  out.estimate = -sxy / sxx;
  return out;
}

}  // namespace mbpi
