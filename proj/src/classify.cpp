#include "mbpi/classify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "internal/flow.hpp"
#include "mbpi/oracle.hpp"

namespace mbpi {

std::string to_string(Recurrence r) {
  switch (r) {
    case Recurrence::Recurrent: return "Recurrent";
    case Recurrence::Transient: return "Transient";
    case Recurrence::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

std::string to_string(Ergodicity e) {
  switch (e) {
    case Ergodicity::Ergodic: return "Ergodic";
    case Ergodicity::NullRecurrent: return "NullRecurrent";
    case Ergodicity::NotApplicable: return "NotApplicable";
    case Ergodicity::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

namespace {

void require_resurrection(const ValidatedModel& model) {
  if (model.absorbing()) {
    throw Error(ErrorCode::WrongEncoding, "classification needs h_0 < 0; the model is absorbing at 0");
  }
}

detail::FlowIntegrand weight() {
  return [](const detail::FlowPoint& p) { return std::exp(p.logWeight); };
}

detail::FlowIntegrand stationary_density() {
  return [](const detail::FlowPoint& p) { return -p.a - p.h; };
}

detail::FlowIntegrand resurrection_weight() {
  return [](const detail::FlowPoint& p) { return -p.h * std::exp(p.logWeight); };
}

}  // namespace

ClassificationReport classify(const ValidatedModel& model) {
  require_resurrection(model);
  ClassificationReport rep;
  rep.evidence.rhoAtOne = model.perron_at_one();
  const RootVector root = minimal_root(model);
  rep.evidence.q = root.q;
  if (rep.evidence.rhoAtOne <= kCriticalityTolerance) rep.honest = true;

  if (!root.atOne) {
    rep.recurrence = Recurrence::Transient;
    rep.ergodicity = Ergodicity::NotApplicable;
    return rep;
  }
  // J involves only A and B, so the flow of the model itself serves for the
  // absorptive companion as well.
  const auto run = detail::integrate_flow(model, root, default_pivot(model), {weight(), stationary_density()});
  rep.evidence.j = detail::classify_tail(detail::tail_series(run, 0));
  rep.evidence.stationaryIntegral = detail::classify_tail(detail::tail_series(run, 1));
  switch (rep.evidence.j->status) {
    case DivergenceStatus::Infinite: rep.recurrence = Recurrence::Recurrent; break;
    case DivergenceStatus::Finite: rep.recurrence = Recurrence::Transient; break;
    case DivergenceStatus::Indeterminate: rep.recurrence = Recurrence::Indeterminate; break;
  }
  if (rep.recurrence == Recurrence::Recurrent) {
    switch (rep.evidence.stationaryIntegral->status) {
      case DivergenceStatus::Finite: rep.ergodicity = Ergodicity::Ergodic; break;
      case DivergenceStatus::Infinite: rep.ergodicity = Ergodicity::NullRecurrent; break;
      case DivergenceStatus::Indeterminate: rep.ergodicity = Ergodicity::Indeterminate; break;
    }
  }
  // Finite supports make the mean immigration and resurrection sums finite.
  rep.exponentiallyErgodic = rep.ergodicity == Ergodicity::Ergodic && rep.evidence.rhoAtOne < -kCriticalityTolerance;
  return rep;
}

std::vector<double> equilibrium_curve_values(const ValidatedModel& model, std::span<const double> s) {
  const ClassificationReport rep = classify(model);
  if (rep.ergodicity != Ergodicity::Ergodic) {
    throw Error(ErrorCode::NotErgodic, "equilibrium needs an ergodic model, got " + to_string(rep.recurrence) + "/" +
                                           to_string(rep.ergodicity));
  }
  const RootVector root = minimal_root(model);
  const std::size_t pivot = default_pivot(model);
  detail::FlowOptions opt;
  for (double x : s) {
    if (!(x >= 0.0 && x < 1.0)) throw Error(ErrorCode::OutOfDomain, "s must lie in [0, 1)");
    opt.targetGaps.push_back(1.0 - x);
  }
  const auto run = detail::integrate_flow(model, root, pivot, {resurrection_weight()}, opt);
  const DivergenceVerdict total = detail::classify_tail(detail::tail_series(run, 0));
  const DivergenceVerdict logLimit = detail::classify_tail(detail::log_weight_series(run));
  if (!total.finite() || !logLimit.finite()) {
    throw Error(ErrorCode::QuadratureFailure, "equilibrium normalisation did not converge: " + total.diagnostics + "; " +
                                                  logLimit.diagnostics);
  }
  const double pi0 = 1.0 / (1.0 + std::exp(-logLimit.value) * total.value);
  std::vector<double> out;
  for (const auto& smp : run.targets) out.push_back(pi0 * (1.0 + std::exp(-smp.logWeight) * smp.sums[0]));
  return out;
}

double equilibrium_curve_value(const ValidatedModel& model, double s) {
  const double arr[1] = {s};
  return equilibrium_curve_values(model, arr)[0];
}

namespace {

constexpr double kPmfNoiseFloor = 1e-17;
constexpr double kPmfResidualLimit = 1e-6;
constexpr std::size_t kPmfHardCap = 200000;
constexpr std::size_t kPmfMaxStates = 2500;

// Rate q_{kj} of the one-type generator for k <= j+1.
long double one_type_rate(const ValidatedModel& model, long k, long j) {
  const auto& spec = model.spec();
  long double r = 0.0L;
  const long off = j - k;
  if (k == 0) {
    if (const RateDistribution* h = model.resurrection_distribution()) {
      if (off == 0) return h->diagonal;
      for (const auto& e : h->entries)
        if (e.offset[0] == off) r += e.rate;
    }
    return r;
  }
  const auto& b = spec.branch[0];
  if (off + 1 == 1) r += static_cast<long double>(k) * b.diagonal;
  for (const auto& e : b.entries)
    if (e.offset[0] == off + 1) r += static_cast<long double>(k) * e.rate;
  if (off == 0) r += spec.immigration.diagonal;
  for (const auto& e : spec.immigration.entries)
    if (e.offset[0] == off) r += e.rate;
  return r;
}

}  // namespace

EquilibriumPmf equilibrium_pmf(const ValidatedModel& model, std::size_t maxDegree) {
  const ClassificationReport rep = classify(model);
  if (rep.ergodicity != Ergodicity::Ergodic) {
    throw Error(ErrorCode::NotErgodic, "equilibrium needs an ergodic model, got " + to_string(rep.recurrence) + "/" +
                                           to_string(rep.ergodicity));
  }
  EquilibriumPmf out;
  const std::size_t n = model.dimension();
  if (n == 1) {
    out.method = "recurrence";
    out.pi0 = equilibrium_curve_value(model, 0.0);
    // Balance of column j: sum_{k <= j+1} pi_k q_{kj} = 0 gives pi_{j+1}.
    std::vector<long double> m{1.0L};
    long double peak = 1.0L;
    const long double b0 = model.branch_gf(0).constant_term();
    for (std::size_t j = 0; j + 1 < kPmfHardCap; ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k <= j; ++k) s += m[k] * one_type_rate(model, static_cast<long>(k), static_cast<long>(j));
      const long double next = -s / (static_cast<long double>(j + 1) * b0);
      if (!(next > kPmfNoiseFloor * peak)) break;  // below the noise floor of the recursion
      m.push_back(next);
      peak = std::max(peak, next);
    }
    long double total = 0.0L;
    for (long double x : m) total += x;
    out.computedDegree = m.size() - 1;
    out.residual = std::abs(1.0 - out.pi0 * static_cast<double>(total));
    double kept = 0.0;
    for (std::size_t j = 0; j <= maxDegree; ++j) {
      const double p = j < m.size() ? out.pi0 * static_cast<double>(m[j]) : 0.0;
      out.probabilities[MultiIndex{static_cast<int>(j)}] = p;
      kept += p;
    }
    out.tailMass = 1.0 - kept;
    if (out.residual > kPmfResidualLimit) {
      std::ostringstream os;
      os << "recurrence series sums to " << out.pi0 * static_cast<double>(total) << " after " << out.computedDegree
         << " terms";
      throw Error(ErrorCode::TruncationResidualTooLarge, os.str());
    }
    return out;
  }
  out.method = "truncated-solve";
  // Solve on a box larger than the reported range; double it until the
  // boundary bound is small or the state count gets too large.
  int cap = std::max(static_cast<int>(maxDegree), 8);
  TruncatedGenerator gen = build_truncated(model, cap, CapKind::TotalDegree);
  StationaryResult st = stationary_solve(gen);
  while (st.errorBound > kPmfResidualLimit) {
    TruncatedGenerator bigger = build_truncated(model, 2 * cap, CapKind::TotalDegree);
    if (bigger.size() > kPmfMaxStates) break;
    cap *= 2;
    gen = std::move(bigger);
    st = stationary_solve(gen);
  }
  out.computedDegree = static_cast<std::size_t>(cap);
  out.residual = st.errorBound;
  double kept = 0.0;
  for (std::size_t k = 0; k < gen.size(); ++k) {
    if (gen.states[k].total() > static_cast<long>(maxDegree)) continue;
    out.probabilities[gen.states[k]] = st.probabilities(static_cast<Eigen::Index>(k));
    kept += st.probabilities(static_cast<Eigen::Index>(k));
  }
  out.pi0 = st.probabilities(0);
  out.tailMass = 1.0 - kept;
  if (out.residual > kPmfResidualLimit) {
    std::ostringstream os;
    os << "truncation error bound " << out.residual << " at total degree " << cap;
    throw Error(ErrorCode::TruncationResidualTooLarge, os.str());
  }
  return out;
}

}  // namespace mbpi
