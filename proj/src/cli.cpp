#include "mbpi/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "mbpi/check.hpp"
#include "mbpi/classify.hpp"
#include "mbpi/decay.hpp"
#include "mbpi/extinction.hpp"
#include "mbpi/fixtures.hpp"
#include "mbpi/model_io.hpp"
#include "mbpi/oracle.hpp"
#include "mbpi/simulate.hpp"

namespace mbpi::cli {

namespace {

using nlohmann::json;

struct ModelSource {
  std::string file;
  std::string fixture;
};

struct Loaded {
  ValidatedModel model;
  std::string digest;
};

// Same bytes as the files written by `fixtures`, so digests agree.
std::string fixture_text(const ModelSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

Loaded load(const ModelSource& src) {
  if (!src.file.empty() && !src.fixture.empty()) {
    throw Error(ErrorCode::MalformedInput, "give either --model or --fixture, not both");
  }
  if (!src.fixture.empty()) {
    ModelSpec spec;
    try {
      spec = fixture_spec(src.fixture);
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedInput, e.what());
    }
    return {validate(spec), digest_hex(fixture_text(spec))};
  }
  if (src.file.empty()) throw Error(ErrorCode::MalformedInput, "missing --model FILE");
  std::ifstream in(src.file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot read model file '" + src.file + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return {validate(spec_from_json_text(bytes)), digest_hex(bytes)};
}

MultiIndex parse_state(const std::string& text, std::size_t n, const std::string& flag) {
  std::vector<int> c;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(item, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != item.size() || v < 0) throw Error(ErrorCode::MalformedInput, flag + ": bad coordinate '" + item + "'");
    c.push_back(v);
  }
  if (c.size() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                flag + " has " + std::to_string(c.size()) + " coordinates, model has " + std::to_string(n));
  }
  return MultiIndex(c);
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != item.size()) throw Error(ErrorCode::MalformedInput, flag + ": bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

json verdict_json(const DivergenceVerdict& v) {
  json j{{"status", to_string(v.status)}, {"tailExponent", v.tailExponent}, {"diagnostics", v.diagnostics}};
  if (v.finite()) j["value"] = v.value;
  return j;
}

json estimate_json(const Estimate& e) {
  return json{{"value", e.value},
              {"standardError", e.standardError},
              {"replicatesUsed", e.replicatesUsed},
              {"censored", e.censored},
              {"capHits", e.capHits}};
}

json measure_json(const std::map<MultiIndex, double>& m, const char* key) {
  json list = json::array();
  for (const auto& [j, v] : m) list.push_back(json{{"j", j.coords()}, {key, v}});
  return list;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MalformedInput, "cannot write '" + path + "'");
  out << text;
}

// Absorbing quantities are defined on the absorptive companion.
ValidatedModel absorbing_view(const ValidatedModel& m, std::vector<std::string>& warnings) {
  if (m.absorbing()) return m;
  warnings.push_back("resurrection ignored: using the absorbing companion with h = 0");
  return m.absorptive_companion();
}

json cmd_validate(const ValidatedModel& m) {
  const double rho = m.perron_at_one();
  json branch = json::array();
  for (bool b : m.branch_conservative()) branch.push_back(b);
  json mean = json::array();
  for (Eigen::Index i = 0; i < m.mean_matrix().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.mean_matrix().cols(); ++j) row.push_back(m.mean_matrix()(i, j));
    mean.push_back(row);
  }
  std::string resurrection = m.absorbing() ? "absorbing" : m.resurrection_is_immigration() ? "same_as_immigration"
                                                                                            : "custom";
  return json{{"n", m.dimension()},
              {"resurrection", resurrection},
              {"conservative",
               {{"immigration", m.immigration_conservative()},
                {"resurrection", m.resurrection_conservative()},
                {"branch", branch}}},
              {"meanMatrix", mean},
              {"perronAtOne", rho},
              {"perronTolerance", kCriticalityTolerance},
              {"criticality", rho > kCriticalityTolerance    ? "supercritical"
                              : rho < -kCriticalityTolerance ? "subcritical"
                                                             : "critical"},
              {"positivelyRegular", m.positively_regular()},
              {"nonsingular", m.nonsingular()}};
}

json cmd_classify(const ValidatedModel& m, std::vector<std::string>& warnings) {
  const ClassificationReport r = classify(m);
  json ev{{"rhoAtOne", r.evidence.rhoAtOne}, {"q", r.evidence.q}};
  if (r.evidence.j) ev["J"] = verdict_json(*r.evidence.j);
  if (r.evidence.stationaryIntegral) ev["stationaryIntegral"] = verdict_json(*r.evidence.stationaryIntegral);
  if (r.recurrence == Recurrence::Indeterminate) warnings.push_back("recurrence is Indeterminate");
  if (r.ergodicity == Ergodicity::Indeterminate) warnings.push_back("ergodicity is Indeterminate");
  return json{{"unique", r.unique},
              {"honest", r.honest ? json(*r.honest) : json(nullptr)},
              {"recurrence", to_string(r.recurrence)},
              {"ergodicity", to_string(r.ergodicity)},
              {"exponentiallyErgodic", r.exponentiallyErgodic},
              {"stronglyErgodic", r.stronglyErgodic},
              {"evidence", ev}};
}

json cmd_extinction(const ValidatedModel& m, const MultiIndex& from, const std::string& curvePath, int pivot) {
  const ExtinctionResult r = extinction_probability(m, from);
  const RootVector root = minimal_root(m);
  json out{{"from", from.coords()},
           {"a_i0", r.value},
           {"tolerance", r.tolerance},
           {"method", r.method},
           {"q", root.q},
           {"qResidual", root.residual}};
  if (r.j) out["J"] = verdict_json(*r.j);
  if (r.upperBound) out["upperBound"] = *r.upperBound;
  if (!curvePath.empty()) {
    const std::size_t p = pivot < 0 ? default_pivot(m) : static_cast<std::size_t>(pivot);
    const CurveSolution curve = solve_curve(m, p);
    write_file(curvePath, curve_csv(m, curve));
    out["curveCsv"] = curvePath;
    if (!curve.empty()) out["curveEndpointError"] = curve.endpointError;
  }
  return out;
}

json cmd_mean_time(const ValidatedModel& m, const MultiIndex& from) {
  const MeanTimeResult r = mean_extinction_time(m, from);
  json out{{"from", from.coords()}, {"finite", r.finite}, {"criterion", verdict_json(r.criterion)}};
  if (r.finite) {
    out["value"] = r.value;
    out["tolerance"] = r.tolerance;
  }
  return out;
}

json cmd_decay(const ValidatedModel& m, std::size_t maxDegree, std::vector<std::string>& warnings) {
  const DecayResult d = decay_parameter(m);
  const QsdReport q = qsd_verdict(m, maxDegree);
  json conv{{"verdict", to_string(q.convergence.verdict)}, {"reason", q.convergence.reason}};
  if (q.convergence.integral) conv["integral"] = verdict_json(*q.convergence.integral);
  json qsd{{"exists", q.exists}, {"verdict", q.verdict}, {"stationaryCase", q.stationaryCase}, {"convergence", conv}};
  if (q.exists) {
    qsd["coefficients"] = measure_json(q.distribution, "m");
    qsd["rowResidual"] = q.rowResidual;
  }
  if (q.verdict == "Indeterminate") warnings.push_back("quasi-stationary verdict is Indeterminate");
  return json{{"lambdaZ", d.lambdaZ}, {"tolerance", std::max(1e-12, d.root.residual)}, {"q", d.root.q}, {"qsd", qsd}};
}

json cmd_equilibrium(const ValidatedModel& m, std::size_t maxDegree, const std::string& sList) {
  const EquilibriumPmf pmf = equilibrium_pmf(m, maxDegree);
  json out{{"method", pmf.method},
           {"pi0", pmf.pi0},
           {"tailMass", pmf.tailMass},
           {"residual", pmf.residual},
           {"computedDegree", pmf.computedDegree},
           {"probabilities", measure_json(pmf.probabilities, "p")}};
  if (!sList.empty()) {
    const std::vector<double> s = parse_list(sList, "--s");
    const std::vector<double> v = equilibrium_curve_values(m, s);
    json curve = json::array();
    for (std::size_t k = 0; k < s.size(); ++k) curve.push_back(json{{"s", s[k]}, {"value", v[k]}});
    out["curve"] = curve;
  }
  return out;
}

struct SimArgs {
  std::string from;
  std::string to;
  double tMax = 100.0;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  std::uint64_t maxEvents = 10'000'000;
  unsigned threads = 0;
  bool absorbing = false;
  std::string pathsCsv;
  std::size_t paths = 10;
};

json cmd_simulate(const ValidatedModel& given, const SimArgs& a, std::vector<std::string>& warnings) {
  const ValidatedModel m = a.absorbing ? absorbing_view(given, warnings) : given;
  SimConfig c;
  c.initial = parse_state(a.from, m.dimension(), "--from");
  c.tMax = a.tMax;
  c.replicates = a.replicates;
  c.masterSeed = a.seed;
  c.maxEvents = a.maxEvents;
  c.threads = a.threads;
  const auto outcomes = simulate_replicates(m, c);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& o : outcomes) ++counts[static_cast<int>(o.status)];
  json out{{"from", c.initial.coords()},
           {"tMax", c.tMax},
           {"replicates", c.replicates},
           {"seed", c.masterSeed},
           {"outcomes", {{"Absorbed", counts[0]}, {"ReachedTMax", counts[1]}, {"EventCapHit", counts[2]}}}};
  if (counts[2] > 0) warnings.push_back(std::to_string(counts[2]) + " replicates hit the event cap");
  if (m.absorbing()) {
    const Estimate e = extinction_fraction(outcomes);
    out["extinction"] = estimate_json(e);
    if (e.censored > 0) warnings.push_back(std::to_string(e.censored) + " replicates censored before absorption");
    if (counts[0] >= 2 && !c.initial.is_zero()) out["meanExtinctionTime"] = estimate_json(mean_absorption_time(outcomes));
  }
  if (!a.to.empty()) {
    const MultiIndex to = parse_state(a.to, m.dimension(), "--to");
    std::size_t hits = 0;
    for (const auto& o : outcomes) hits += o.status != OutcomeStatus::EventCapHit && o.state == to;
    const double p = static_cast<double>(hits) / static_cast<double>(outcomes.size());
    out["transition"] = json{{"to", to.coords()},
                             {"t", c.tMax},
                             {"value", p},
                             {"standardError", std::sqrt(p * (1.0 - p) / static_cast<double>(outcomes.size()))}};
  }
  if (!a.pathsCsv.empty()) {
    std::ostringstream csv;
    write_paths_csv(m, c, std::min(a.paths, c.replicates), csv);
    write_file(a.pathsCsv, csv.str());
    out["pathsCsv"] = a.pathsCsv;
  }
  return out;
}

struct OracleArgs {
  int cap = 60;
  std::string kind = "total";
  double t = 1.0;
  std::string from;
  std::string to;
  std::string window;
  bool stationary = false;
};

json cmd_oracle(const ValidatedModel& m, const OracleArgs& a) {
  const std::size_t n = m.dimension();
  if (a.kind != "total" && a.kind != "box") throw Error(ErrorCode::MalformedInput, "--kind must be total or box");
  const CapKind kind = a.kind == "total" ? CapKind::TotalDegree : CapKind::PerCoordinate;
  const MultiIndex from = a.from.empty() ? MultiIndex(n) : parse_state(a.from, n, "--from");
  const TruncatedGenerator gen = build_truncated(m, a.cap, kind, from.total());
  json out{{"cap", a.cap}, {"kind", a.kind}, {"states", gen.size()}, {"from", from.coords()}};

  const TransitionRow row = transition_row(gen, from, a.t);
  json probs = json::array();
  auto entry = [&](std::size_t k) {
    return json{{"j", gen.states[k].coords()}, {"p", row.p(static_cast<Eigen::Index>(k))}, {"errorBound", row.leak}};
  };
  if (!a.to.empty()) {
    probs.push_back(entry(gen.index_of(parse_state(a.to, n, "--to"))));
  } else {
    for (std::size_t k = 0; k < gen.size(); ++k)
      if (row.p(static_cast<Eigen::Index>(k)) > 0.0) probs.push_back(entry(k));
  }
  out["t"] = a.t;
  out["leak"] = row.leak;
  out["probabilities"] = probs;

  if (!a.window.empty()) {
    const std::vector<double> w = parse_list(a.window, "--window");
    if (w.size() != 2) throw Error(ErrorCode::MalformedInput, "--window needs two numbers a,b");
    const DecaySlope s = decay_slope(gen, from, w[0], w[1]);
    out["decaySlope"] = json{{"estimate", s.estimate}, {"window", w}, {"maxLeak", s.maxLeak}};
  }
  if (a.stationary) {
    const StationaryResult st = stationary_solve(gen);
    json list = json::array();
    for (std::size_t k = 0; k < gen.size(); ++k) {
      list.push_back(json{{"j", gen.states[k].coords()},
                          {"p", st.probabilities(static_cast<Eigen::Index>(k))},
                          {"errorBound", st.errorBound}});
    }
    out["stationary"] = json{{"probabilities", list}, {"boundaryMass", st.boundaryMass}, {"leakFlux", st.leakFlux}};
  }
  return out;
}

json cmd_fixtures(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  json files = json::array();
  for (const auto& name : fixture_names()) {
    const std::string text = fixture_text(fixture_spec(name));
    const std::string path = (std::filesystem::path(dir) / (name + ".json")).string();
    write_file(path, text);
    files.push_back(json{{"name", name}, {"path", path}, {"digest", digest_hex(text)}});
  }
  return json{{"files", files}};
}

bool plain_output() {
  const char* v = std::getenv("OUTPUT_PLAIN");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

void emit(std::ostream& out, const json& doc) { out << (plain_output() ? doc.dump() : doc.dump(2)) << "\n"; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multitype branching processes with immigration and resurrection"};
  app.require_subcommand(1);
  ModelSource src;
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", src.file, "Model JSON file");
    sub->add_option("--fixture", src.fixture, "Bundled model name (M1, M2, M3, M4, A2)");
  };

  std::string from, curveCsv, sList, outDir = ".";
  int pivot = -1;
  std::size_t maxDegree = 0;
  CheckOptions checkOpts;
  SimArgs sim;
  OracleArgs orc;

  auto* validateCmd = app.add_subcommand("validate", "Check a model file and report its invariants");
  add_model(validateCmd);
  auto* classifyCmd = app.add_subcommand("classify", "Uniqueness, recurrence and ergodicity");
  add_model(classifyCmd);
  auto* extinctionCmd = app.add_subcommand("extinction", "Extinction probability from a state");
  add_model(extinctionCmd);
  extinctionCmd->add_option("--from", from, "Start state i1,...,in")->required();
  extinctionCmd->add_option("--curve-csv", curveCsv, "Write the characteristic curve as CSV");
  extinctionCmd->add_option("--pivot", pivot, "Pivot coordinate for the curve (0-based)");
  auto* meanCmd = app.add_subcommand("mean-time", "Mean extinction time from a state");
  add_model(meanCmd);
  meanCmd->add_option("--from", from, "Start state i1,...,in")->required();
  auto* decayCmd = app.add_subcommand("decay", "Decay parameter and quasi-stationary distribution");
  add_model(decayCmd);
  decayCmd->add_option("--max-degree", maxDegree, "Truncation degree of the invariant measure");
  auto* eqCmd = app.add_subcommand("equilibrium", "Equilibrium distribution of an ergodic model");
  add_model(eqCmd);
  eqCmd->add_option("--max-degree", maxDegree, "Largest total degree reported");
  eqCmd->add_option("--s", sList, "Comma-separated points for the generating function along the curve");
  auto* simCmd = app.add_subcommand("simulate", "Exact stochastic simulation");
  add_model(simCmd);
  simCmd->add_option("--from", sim.from, "Start state i1,...,in")->required();
  simCmd->add_option("--t-max", sim.tMax, "Time horizon");
  simCmd->add_option("--replicates", sim.replicates, "Number of replicates");
  simCmd->add_option("--seed", sim.seed, "Master seed");
  simCmd->add_option("--max-events", sim.maxEvents, "Event cap per replicate");
  simCmd->add_option("--threads", sim.threads, "Worker threads (0: all cores)");
  simCmd->add_option("--to", sim.to, "Report the fraction found in this state at t-max");
  simCmd->add_flag("--absorbing", sim.absorbing, "Simulate the absorbing companion");
  simCmd->add_option("--paths-csv", sim.pathsCsv, "Write event logs as CSV");
  simCmd->add_option("--paths", sim.paths, "Replicates written to --paths-csv");
  auto* oracleCmd = app.add_subcommand("oracle", "Truncated-generator transition probabilities");
  add_model(oracleCmd);
  oracleCmd->add_option("--cap", orc.cap, "Truncation cap");
  oracleCmd->add_option("--kind", orc.kind, "Cap kind: total or box");
  oracleCmd->add_option("--t", orc.t, "Time");
  oracleCmd->add_option("--from", orc.from, "Start state i1,...,in (default 0)");
  oracleCmd->add_option("--to", orc.to, "Report only this target state");
  oracleCmd->add_option("--window", orc.window, "Decay-slope window a,b");
  oracleCmd->add_flag("--stationary", orc.stationary, "Also solve for the stationary distribution");
  auto* fixturesCmd = app.add_subcommand("fixtures", "Write the bundled model files");
  fixturesCmd->add_option("--out", outDir, "Output directory");
  auto* checkCmd = app.add_subcommand("check", "Cross-validate analytics, simulator and oracle");
  add_model(checkCmd);
  checkCmd->add_option("--seed", checkOpts.seed, "Master seed");
  checkCmd->add_option("--replicates", checkOpts.replicates, "Replicates per simulated quantity");
  checkCmd->add_option("--threads", checkOpts.threads, "Worker threads (0: all cores)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  json doc{{"command", command}, {"model", nullptr}};
  std::vector<std::string> warnings;
  try {
    json result;
    int code = kExitOk;
    if (command == "fixtures") {
      result = cmd_fixtures(outDir);
    } else {
      const Loaded l = load(src);
      doc["model"] = l.digest;
      const ValidatedModel& m = l.model;
      if (command == "validate") {
        result = cmd_validate(m);
      } else if (command == "classify") {
        result = cmd_classify(m, warnings);
      } else if (command == "extinction") {
        const ValidatedModel a = absorbing_view(m, warnings);
        result = cmd_extinction(a, parse_state(from, m.dimension(), "--from"), curveCsv, pivot);
      } else if (command == "mean-time") {
        const ValidatedModel a = absorbing_view(m, warnings);
        result = cmd_mean_time(a, parse_state(from, m.dimension(), "--from"));
      } else if (command == "decay") {
        result = cmd_decay(m, maxDegree ? maxDegree : (m.dimension() == 1 ? 64 : 24), warnings);
      } else if (command == "equilibrium") {
        result = cmd_equilibrium(m, maxDegree ? maxDegree : 20, sList);
      } else if (command == "simulate") {
        result = cmd_simulate(m, sim, warnings);
      } else if (command == "oracle") {
        result = cmd_oracle(m, orc);
      } else if (command == "check") {
        const CheckReport report = run_check(m, checkOpts);
        result = report.to_json();
        result["seed"] = checkOpts.seed;
        result["replicates"] = checkOpts.replicates;
        for (const auto& item : report.items) {
          if (item.status == "fail") warnings.push_back("check failed: " + item.name);
        }
        if (!report.passed()) code = kExitCheckFailed;
      }
    }
    doc["result"] = result;
    doc["warnings"] = warnings;
    emit(out, doc);
    return code;
  } catch (const Error& e) {
    doc["error"] = json{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    doc["warnings"] = warnings;
    emit(out, doc);
    err << e.what() << "\n";
    return is_input_error(e.code()) ? kExitInput : kExitPrecondition;
  } catch (const std::exception& e) {
    doc["error"] = json{{"code", "MalformedInput"}, {"message", e.what()}};
    emit(out, doc);
    err << e.what() << "\n";
    return kExitInput;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace mbpi::cli
