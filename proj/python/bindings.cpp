#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mbpi/check.hpp"
#include "mbpi/classify.hpp"
#include "mbpi/cli.hpp"
#include "mbpi/decay.hpp"
#include "mbpi/extinction.hpp"
#include "mbpi/fixtures.hpp"
#include "mbpi/model_io.hpp"
#include "mbpi/oracle.hpp"
#include "mbpi/simulate.hpp"

namespace py = pybind11;
using namespace mbpi;

namespace {

MultiIndex state(const std::vector<int>& coords) { return MultiIndex(coords); }

py::tuple as_tuple(const MultiIndex& j) { return py::cast(j.coords()); }

py::object from_json(const nlohmann::json& doc) { return py::module_::import("json").attr("loads")(doc.dump()); }

py::object verdict(const DivergenceVerdict& v) {
  py::dict d;
  d["status"] = to_string(v.status);
  d["value"] = v.value;
  d["tail_exponent"] = v.tailExponent;
  return std::move(d);
}

py::dict law(const std::map<MultiIndex, double>& m) {
  py::dict d;
  for (const auto& [j, p] : m) d[as_tuple(j)] = p;
  return d;
}

py::dict estimate(const Estimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["standard_error"] = e.standardError;
  d["replicates"] = e.replicatesUsed;
  d["censored"] = e.censored;
  d["cap_hits"] = e.capHits;
  return d;
}

SimConfig config(const std::vector<int>& from, double tMax, std::size_t replicates, std::uint64_t seed,
                 std::uint64_t maxEvents, unsigned threads) {
  SimConfig c;
  c.initial = state(from);
  c.tMax = tMax;
  c.replicates = replicates;
  c.masterSeed = seed;
  c.maxEvents = maxEvents;
  c.threads = threads;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multitype branching processes with immigration and resurrection";

  // Held for the life of the process; never released.
  static PyObject* modelError = py::exception<Error>(m, "ModelError", PyExc_ValueError).inc_ref().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(modelError)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(modelError, exc.ptr());
    }
  });

  py::class_<ValidatedModel>(m, "Model")
      .def_static(
          "from_json", [](const std::string& text) { return validate(spec_from_json_text(text)); }, py::arg("text"))
      .def_static(
          "from_file", [](const std::string& path) { return validate(spec_from_file(path)); }, py::arg("path"))
      .def_static(
          "fixture", [](const std::string& name) { return validate(fixture_spec(name)); }, py::arg("name"))
      .def_property_readonly("dimension", &ValidatedModel::dimension)
      .def_property_readonly("absorbing", &ValidatedModel::absorbing)
      .def_property_readonly("perron_at_one", &ValidatedModel::perron_at_one)
      .def("absorptive_companion", &ValidatedModel::absorptive_companion)
      .def("to_json", [](const ValidatedModel& self) { return spec_to_json(self.spec()).dump(2); });

  m.def("fixture_names", &fixture_names);

  m.def(
      "minimal_root",
      [](const ValidatedModel& model) {
        const RootVector r = minimal_root(model);
        py::dict d;
        d["q"] = r.q;
        d["residual"] = r.residual;
        d["at_one"] = r.atOne;
        d["iterations"] = r.iterations;
        return d;
      },
      py::arg("model"));

  m.def(
      "extinction_probability",
      [](const ValidatedModel& model, const std::vector<int>& from) {
        const ExtinctionResult r = extinction_probability(model, state(from));
        py::dict d;
        d["value"] = r.value;
        d["method"] = r.method;
        d["tolerance"] = r.tolerance;
        d["J"] = r.j ? verdict(*r.j) : py::none();
        d["upper_bound"] = r.upperBound ? py::cast(*r.upperBound) : py::none();
        return d;
      },
      py::arg("model"), py::arg("start"));

  m.def(
      "mean_extinction_time",
      [](const ValidatedModel& model, const std::vector<int>& from) {
        const MeanTimeResult r = mean_extinction_time(model, state(from));
        py::dict d;
        d["finite"] = r.finite;
        d["value"] = r.finite ? py::cast(r.value) : py::none();
        d["criterion"] = verdict(r.criterion);
        return d;
      },
      py::arg("model"), py::arg("start"));

  m.def(
      "integral_J", [](const ValidatedModel& model) { return verdict(integral_J(model)); }, py::arg("model"));

  m.def(
      "classify",
      [](const ValidatedModel& model) {
        const ClassificationReport r = classify(model);
        py::dict d;
        d["unique"] = r.unique;
        d["recurrence"] = to_string(r.recurrence);
        d["ergodicity"] = to_string(r.ergodicity);
        d["exponentially_ergodic"] = r.exponentiallyErgodic;
        d["strongly_ergodic"] = r.stronglyErgodic;
        d["rho_at_one"] = r.evidence.rhoAtOne;
        d["q"] = r.evidence.q;
        return d;
      },
      py::arg("model"));

  m.def(
      "equilibrium_pmf",
      [](const ValidatedModel& model, std::size_t maxDegree) {
        const EquilibriumPmf r = equilibrium_pmf(model, maxDegree);
        py::dict d;
        d["probabilities"] = law(r.probabilities);
        d["method"] = r.method;
        d["tail_mass"] = r.tailMass;
        return d;
      },
      py::arg("model"), py::arg("max_degree") = 20);

  m.def(
      "decay_parameter", [](const ValidatedModel& model) { return decay_parameter(model).lambdaZ; }, py::arg("model"));

  m.def(
      "qsd",
      [](const ValidatedModel& model, std::size_t maxDegree) {
        const QsdReport r = qsd_verdict(model, maxDegree);
        py::dict d;
        d["exists"] = r.exists;
        d["verdict"] = r.verdict;
        d["lambda_z"] = r.lambdaZ;
        d["distribution"] = law(r.distribution);
        return d;
      },
      py::arg("model"), py::arg("max_degree") = 64);

  m.def(
      "transition_row",
      [](const ValidatedModel& model, const std::vector<int>& from, double t, int cap) {
        const auto gen = build_truncated(model, cap, CapKind::TotalDegree, state(from).total());
        const TransitionRow row = transition_row(gen, state(from), t);
        std::map<MultiIndex, double> p;
        for (std::size_t k = 0; k < gen.size(); ++k) p[gen.states[k]] = row.p(static_cast<Eigen::Index>(k));
        py::dict d;
        d["probabilities"] = law(p);
        d["leak"] = row.leak;
        return d;
      },
      py::arg("model"), py::arg("start"), py::arg("t"), py::arg("cap"));

  m.def(
      "simulate_extinction",
      [](const ValidatedModel& model, const std::vector<int>& from, std::size_t replicates, std::uint64_t seed,
         double tMax, std::uint64_t maxEvents, unsigned threads) {
        Estimate e;
        {
          py::gil_scoped_release release;
          e = estimate_extinction(model, config(from, tMax, replicates, seed, maxEvents, threads));
        }
        return estimate(e);
      },
      py::arg("model"), py::arg("start"), py::arg("replicates") = 1000, py::arg("seed") = 0,
      py::arg("t_max") = 1e6, py::arg("max_events") = 10'000'000, py::arg("threads") = 0);

  m.def(
      "simulate_transition",
      [](const ValidatedModel& model, const std::vector<int>& from, const std::vector<int>& to, double t,
         std::size_t replicates, std::uint64_t seed, unsigned threads) {
        Estimate e;
        {
          py::gil_scoped_release release;
          e = estimate_transition(model, state(from), state(to), t,
                                  config(from, t, replicates, seed, 10'000'000, threads));
        }
        return estimate(e);
      },
      py::arg("model"), py::arg("start"), py::arg("target"), py::arg("t"), py::arg("replicates") = 1000,
      py::arg("seed") = 0, py::arg("threads") = 0);

  m.def(
      "check",
      [](const ValidatedModel& model, std::uint64_t seed, std::size_t replicates, unsigned threads) {
        CheckOptions o;
        o.seed = seed;
        o.replicates = replicates;
        o.threads = threads;
        nlohmann::json doc;
        {
          py::gil_scoped_release release;
          doc = run_check(model, o).to_json();
        }
        return from_json(doc);
      },
      py::arg("model"), py::arg("seed") = 20240601, py::arg("replicates") = 10000, py::arg("threads") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command-line subcommand and returns (exit code, stdout, stderr).");
}
