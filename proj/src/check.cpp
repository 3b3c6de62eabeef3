#include "mbpi/check.hpp"

#include <algorithm>
#include <cmath>

#include "mbpi/classify.hpp"
#include "mbpi/decay.hpp"
#include "mbpi/extinction.hpp"
#include "mbpi/oracle.hpp"
#include "mbpi/simulate.hpp"

namespace mbpi {

namespace {

using nlohmann::json;

json coords(const MultiIndex& m) { return json(m.coords()); }

double binomial_se(double p, std::size_t n) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

class Recorder {
 public:
  explicit Recorder(CheckReport& r) : report_(r) {}

  void compare(const std::string& name, double value, double reference, double tolerance, json extra = json::object()) {
    extra["value"] = value;
    extra["reference"] = reference;
    extra["tolerance"] = tolerance;
    const bool ok = std::isfinite(value) && std::abs(value - reference) <= tolerance;
    report_.items.push_back({name, ok ? "pass" : "fail", std::move(extra)});
  }

  void bound(const std::string& name, double value, double limit, json extra = json::object()) {
    extra["value"] = value;
    extra["limit"] = limit;
    const bool ok = std::isfinite(value) && value <= limit;
    report_.items.push_back({name, ok ? "pass" : "fail", std::move(extra)});
  }

  void skip(const std::string& name, const std::string& reason) {
    report_.items.push_back({name, "skipped", json{{"reason", reason}}});
  }

  void fail(const std::string& name, const std::string& reason) {
    report_.items.push_back({name, "fail", json{{"reason", reason}}});
  }

 private:
  CheckReport& report_;
};

SimConfig sim_config(const CheckOptions& o, const MultiIndex& start, std::uint64_t salt) {
  SimConfig c;
  c.initial = start;
  c.replicates = o.replicates;
  c.masterSeed = o.seed + 0x9e3779b97f4a7c15ULL * salt;
  c.threads = o.threads;
  return c;
}

void check_root(const ValidatedModel& model, Recorder& rec, RootVector& root) {
  root = minimal_root(model);
  rec.bound("root.perron-at-q", perron_root(model, root.q), 1e-10, json{{"q", root.q}});
  rec.bound("root.residual", root.residual, 1e-10);
}

void check_curve(const ValidatedModel& model, Recorder& rec) {
  if (model.dimension() < 2) return;
  const CurveSolution curve = solve_curve(model, default_pivot(model));
  rec.bound("curve.endpoint-error", curve.endpointError, 1e-6);
  try {
    const PivotInvarianceReport inv = curve_pivot_invariance_check(model);
    rec.bound("curve.pivot-invariance", inv.discrepancy, 1e-6,
              json{{"pivots", {inv.pivotA, inv.pivotB}}, {"points", inv.pointsCompared}});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PivotNotAllowed) throw;
    rec.skip("curve.pivot-invariance", e.what());
  }
}

void check_extinction(const ValidatedModel& absorbing, const CheckOptions& o, Recorder& rec) {
  const std::size_t n = absorbing.dimension();
  const MultiIndex start = MultiIndex::unit(n, 0);
  ExtinctionResult analytic;
  try {
    analytic = extinction_probability(absorbing, start);
  } catch (const Error& e) {
    rec.skip("extinction.simulator", e.what());
    return;
  }
  SimConfig c = sim_config(o, start, 1);
  c.tMax = 1e6;
  c.maxEvents = 4000;  // survivors that far out are lost for good
  const Estimate est = estimate_extinction(absorbing, c);
  const double se = std::max(est.standardError, binomial_se(analytic.value, est.replicatesUsed));
  rec.compare("extinction.simulator", est.value, analytic.value, 3.0 * se + analytic.tolerance,
              json{{"from", coords(start)},
                   {"method", analytic.method},
                   {"standardError", est.standardError},
                   {"capHits", est.capHits}});

  MeanTimeResult mt;
  try {
    mt = mean_extinction_time(absorbing, start);
  } catch (const Error& e) {
    rec.skip("mean-time.simulator", e.what());
    return;
  }
  if (!mt.finite) {
    rec.skip("mean-time.simulator", "mean extinction time is infinite");
    return;
  }
  SimConfig m = sim_config(o, start, 2);
  m.tMax = 1e6;
  const Estimate t = estimate_mean_extinction_time(absorbing, m);
  rec.compare("mean-time.simulator", t.value, mt.value, 3.0 * t.standardError + mt.tolerance,
              json{{"from", coords(start)}, {"standardError", t.standardError}, {"censored", t.censored}});
}

void check_oracle_soundness(const ValidatedModel& model, Recorder& rec) {
  const std::size_t n = model.dimension();
  const MultiIndex start = MultiIndex::unit(n, 0);
  {
    const TruncatedGenerator big = build_truncated(model, n == 1 ? 80 : 30);
    const TransitionRow row = transition_row(big, start, 2.0);
    rec.bound("oracle.row-sum", std::abs(row.p.sum() + row.leak - 1.0), 1e-12, json{{"t", 2.0}});
  }
  const TruncatedGenerator gen = build_truncated(model, n == 1 ? 30 : 12);
  const TransitionMatrix p1 = transition_matrix(gen, 1.0);
  const TransitionMatrix p2 = transition_matrix(gen, 2.0);
  double rowSum = 0.0;
  for (Eigen::Index i = 0; i < p2.p.rows(); ++i) rowSum = std::max(rowSum, std::abs(p2.p.row(i).sum() + p2.leak(i) - 1.0));
  rec.bound("oracle.matrix-row-sum", rowSum, 1e-12, json{{"t", 2.0}, {"squarings", p2.squarings}});
  const double semigroup = (p1.p * p1.p - p2.p).cwiseAbs().maxCoeff();
  // The overflow state is absorbing, so the truncated semigroup is exact.
  rec.bound("oracle.semigroup", semigroup, 1e-8, json{{"s", 1.0}, {"t", 1.0}, {"leak", p2.leak.maxCoeff()}});

  // Fourth-order central difference of P at t = 1 against P(t) Q.
  const double h = 1e-3;
  const Eigen::MatrixXd d = (-transition_matrix(gen, 1.0 + 2 * h).p + 8.0 * transition_matrix(gen, 1.0 + h).p -
                             8.0 * transition_matrix(gen, 1.0 - h).p + transition_matrix(gen, 1.0 - 2 * h).p) /
                            (12.0 * h);
  const double forward = (d - p1.p * gen.matrix).cwiseAbs().maxCoeff();
  rec.bound("oracle.forward-equation", forward, 1e-6, json{{"t", 1.0}, {"step", h}});
}

void check_transition(const ValidatedModel& model, const CheckOptions& o, Recorder& rec) {
  const std::size_t n = model.dimension();
  const MultiIndex start = MultiIndex::unit(n, 0);
  const TruncatedGenerator gen = build_truncated(model, n == 1 ? 80 : 30);
  std::vector<double> times = {0.5, 2.0};
  if (model.perron_at_one() <= kCriticalityTolerance) times.push_back(10.0);
  std::uint64_t salt = 10;
  for (double t : times) {
    const TransitionRow row = transition_row(gen, start, t);
    SimConfig c = sim_config(o, start, salt++);
    c.maxEvents = 100000;
    const EmpiricalLaw law = empirical_law(model, t, c);
    for (const MultiIndex& target : {MultiIndex(n), start}) {
      const double p = row.p(static_cast<Eigen::Index>(gen.index_of(target)));
      auto it = law.counts.find(target);
      const double phat = it == law.counts.end() ? 0.0 : static_cast<double>(it->second) / law.replicates;
      const double se = std::max(binomial_se(phat, law.replicates), binomial_se(p, law.replicates));
      rec.compare("transition.simulator-vs-oracle", phat, p, 3.0 * se + row.leak,
                  json{{"t", t}, {"from", coords(start)}, {"to", coords(target)}, {"leak", row.leak},
                       {"standardError", se}, {"capHits", law.capHits}});
    }
  }
}

void check_classification(const ValidatedModel& model, Recorder& rec) {
  const ClassificationReport report = classify(model);
  json info{{"recurrence", to_string(report.recurrence)}, {"ergodicity", to_string(report.ergodicity)}};
  if (report.ergodicity != Ergodicity::Ergodic) {
    rec.skip("equilibrium.oracle", "model is not ergodic (" + to_string(report.ergodicity) + ")");
    return;
  }
  const EquilibriumPmf pmf = equilibrium_pmf(model, 20);
  const TruncatedGenerator gen = build_truncated(model, model.dimension() == 1 ? 60 : 30);
  const StationaryResult st = stationary_solve(gen);
  double worst = 0.0;
  for (const auto& [j, v] : pmf.probabilities) {
    worst = std::max(worst, std::abs(v - st.probabilities(static_cast<Eigen::Index>(gen.index_of(j)))));
  }
  info["method"] = pmf.method;
  info["oracleErrorBound"] = st.errorBound;
  rec.bound("equilibrium.oracle", worst, 1e-6 + st.errorBound, info);
}

void check_decay(const ValidatedModel& model, Recorder& rec) {
  const std::size_t n = model.dimension();
  DecayResult d;
  try {
    d = decay_parameter(model);
  } catch (const Error& e) {
    rec.skip("decay.invariant-vector", e.what());
    rec.skip("decay.oracle-slope", e.what());
    return;
  }
  {
    const TruncatedGenerator gen = build_truncated(model, n == 1 ? 16 : 12);
    double worst = 0.0;
    for (std::size_t r = 0; r < gen.size(); ++r) {
      if (gen.states[r].total() > 6) continue;
      double s = d.lambdaZ * invariant_vector(model, gen.states[r]);
      for (std::size_t c = 0; c < gen.size(); ++c) {
        const double rate = gen.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        if (rate != 0.0) s += rate * invariant_vector(model, gen.states[c]);
      }
      worst = std::max(worst, std::abs(s));
    }
    rec.bound("decay.invariant-vector", worst, 1e-12, json{{"lambdaZ", d.lambdaZ}, {"maxDegree", 6}});
  }
  const MultiIndex start = MultiIndex::unit(n, 0);
  if (d.lambdaZ > 0.0) {
    const TruncatedGenerator gen = build_truncated(model, n == 1 ? 150 : 30);
    const double t1 = n == 1 ? 10.0 : 8.0, t2 = n == 1 ? 20.0 : 16.0;
    const DecaySlope slope = decay_slope(gen, start, t1, t2);
    const double rel = n == 1 ? 0.10 : 0.15;
    rec.compare("decay.oracle-slope", slope.estimate, d.lambdaZ, rel * d.lambdaZ,
                json{{"window", {t1, t2}}, {"maxLeak", slope.maxLeak}});
  } else if (classify(model).ergodicity == Ergodicity::Ergodic) {
    const TruncatedGenerator gen = build_truncated(model, n == 1 ? 150 : 30);
    const DecaySlope slope = decay_slope(gen, start, 10.0, 20.0);
    rec.bound("decay.oracle-slope", std::abs(slope.estimate), 0.02, json{{"window", {10.0, 20.0}}});
  } else {
    rec.skip("decay.oracle-slope", "lambdaZ = 0 without equilibrium: decay is subexponential");
  }
}

void check_branching(const ValidatedModel& model, const CheckOptions& o, Recorder& rec) {
  const std::size_t n = model.dimension();
  MultiIndex start(n);
  if (n == 1) {
    start[0] = 2;
  } else {
    start[0] = 1;
    start[1] = 1;
  }
  const double t = n == 1 ? 1.0 : 0.5;
  SimConfig c = sim_config(o, start, 20);
  c.maxEvents = 100000;
  try {
    const BranchingPropertyReport r = branching_property_check(model, start, t, c);
    rec.bound("branching-property", std::abs(r.residual), 3.0 * r.standardError,
              json{{"from", coords(start)}, {"t", t}, {"predicted", r.predicted}, {"standardError", r.standardError}});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateEstimate) throw;
    rec.fail("branching-property", e.what());
  }
}

}  // namespace

bool CheckReport::passed() const {
  return std::none_of(items.begin(), items.end(), [](const CheckItem& i) { return i.status == "fail"; });
}

nlohmann::json CheckReport::to_json() const {
  json list = json::array();
  std::size_t failed = 0, skipped = 0;
  for (const auto& i : items) {
    json entry = i.detail;
    entry["name"] = i.name;
    entry["status"] = i.status;
    list.push_back(std::move(entry));
    failed += i.status == "fail";
    skipped += i.status == "skipped";
  }
  return json{{"passed", passed()}, {"failed", failed}, {"skipped", skipped}, {"checks", std::move(list)}};
}

CheckReport run_check(const ValidatedModel& model, const CheckOptions& options) {
  if (!model.resurrection_is_immigration()) {
    throw Error(ErrorCode::WrongEncoding, "check needs a model with resurrection equal to immigration");
  }
  CheckReport report;
  Recorder rec(report);
  RootVector root;
  check_root(model, rec, root);
  check_curve(model, rec);
  check_extinction(model.absorptive_companion(), options, rec);
  check_oracle_soundness(model, rec);
  check_transition(model, options, rec);
  check_classification(model, rec);
  check_decay(model, rec);
  check_branching(model, options, rec);
  return report;
}

}  // namespace mbpi
