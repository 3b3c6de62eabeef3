#include <doctest.h>

#include <cmath>

#include "../support/fixtures_util.hpp"
#include "../support/oracles.hpp"
#include "mbpi/classify.hpp"
#include "mbpi/decay.hpp"
#include "mbpi/oracle.hpp"

using namespace mbpi;
using namespace mbpi::testing;

namespace {

// max over |i| <= 6 of |(Q y)_i + lambda y_i| with y_i = prod q^i, rows from
// the truncated generator (interior rows are exact).
double vector_row_residual(const ValidatedModel& m, double lambda) {
  const auto gen = build_truncated(m, m.dimension() == 1 ? 16 : 12);
  double worst = 0.0;
  for (std::size_t r = 0; r < gen.size(); ++r) {
    if (gen.states[r].total() > 6) continue;
    double s = lambda * invariant_vector(m, gen.states[r]);
    for (std::size_t c = 0; c < gen.size(); ++c) {
      s += gen.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * invariant_vector(m, gen.states[c]);
    }
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

}  // namespace

TEST_CASE("decay parameters of the fixtures") {
  CHECK(decay_parameter(fixture("M1")).lambdaZ == 0.0);
  CHECK(std::abs(decay_parameter(fixture("M2")).lambdaZ - 0.5) <= 1e-10);
  CHECK(std::abs(decay_parameter(fixture("M3")).lambdaZ - (1.0 - kM3Root)) <= 1e-10);
  CHECK(decay_parameter(fixture("M4")).lambdaZ == 0.0);
}

TEST_CASE("invariant vectors satisfy their row identity") {
  for (const char* name : {"M1", "M2", "M3", "A2"}) {
    const auto m = fixture(name);
    CHECK(vector_row_residual(m, decay_parameter(m).lambdaZ) <= 1e-12);
  }
}

TEST_CASE("decay analysis needs resurrection equal to immigration") {
  CHECK_THROWS_AS(decay_parameter(absorbing_fixture("M2")), Error);
}

TEST_CASE("communicating check") {
  std::string why;
  CHECK(communicating(fixture("A2"), &why));
  // Immigration only into type 1 still reaches type 2 through branching.
  ModelSpec s = fixture_spec("M3");
  s.immigration = RateDistribution::conservative_from(DistributionKind::Immigration, -1, {{MultiIndex{2, 0}, 1.0}});
  CHECK(communicating(validate(s)));
}

TEST_CASE("M1 invariant measure at 0 is proportional to the equilibrium") {
  const auto m = fixture("M1");
  const auto mu = invariant_measure(m, 0.0, 64);
  CHECK(mu.method == "exact-recurrence");
  for (int j = 0; j <= 30; ++j) CHECK(std::abs(mu.coefficients.at(MultiIndex{j}) - std::ldexp(1.0, -j)) <= 1e-8);
  CHECK(mu.rowResidual <= 1e-8);
}

TEST_CASE("M2 invariant measure at its decay parameter") {
  const auto m = fixture("M2");
  const auto mu = invariant_measure(m, 0.5, 40);
  for (int j = 0; j < 40; ++j) {
    CHECK(std::abs(invariant_measure_row(m, mu.coefficients, 0.5, MultiIndex{j})) <= 1e-8);
  }
  // Generating function against M_0 exp(-int_0^s (0.5 + A)/B), by quadrature.
  for (double s : {0.1, 0.2, 0.3}) {
    double series = 0.0;
    for (const auto& [j, c] : mu.coefficients) series += c * std::pow(s, j[0]);
    const double integral = gauss_legendre(
        [](double u) {
          const double a = u - 1.0, b = 1.0 - 3.0 * u + 2.0 * u * u;
          return (0.5 + a) / b;
        },
        0.0, s);
    CHECK(std::abs(series - std::exp(-integral)) <= 1e-6);
  }
}

TEST_CASE("two-type invariant measures hold every interior row") {
  const auto m = fixture("M3");
  for (double lambda : {0.0, 0.2, 1.0 / 3.0}) {
    const auto mu = invariant_measure(m, lambda, 16);
    CHECK(mu.method == "truncated-solve");
    CHECK(mu.rowResidual <= 1e-8);
    for (const auto& [j, c] : mu.coefficients) CHECK(c > 0.0);
  }
}

TEST_CASE("quasi-stationary verdicts") {
  const auto q1 = qsd_verdict(fixture("M1"));
  CHECK(q1.exists);
  CHECK(q1.stationaryCase);
  CHECK(q1.verdict == "Exists (stationary, lambda=0)");
  CHECK(std::abs(q1.distribution.at(MultiIndex{3}) - 0.0625) <= 1e-8);
  for (const char* name : {"M2", "M3"}) {
    const auto q = qsd_verdict(fixture(name));
    CHECK_FALSE(q.exists);
    CHECK(q.verdict == "NotExists");
  }
}

TEST_CASE("a subcritical model with decaying mass has a proper quasi-stationary law") {
  // M1 branching with the mean-one immigration thinned to rate 0.2.
  const auto m = validate(birth_death_immigration(2.0, 1.0, 0.2));
  const auto d = decay_parameter(m);
  CHECK(d.lambdaZ == 0.0);
  const auto q = qsd_verdict(m);
  CHECK(q.exists);
  double sum = 0.0;
  for (const auto& [j, p] : q.distribution) sum += p;
  CHECK(sum <= 1.0 + 1e-12);
}
