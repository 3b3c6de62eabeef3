#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/fixtures_util.hpp"
#include "../support/oracles.hpp"
#include "mbpi/classify.hpp"
#include "mbpi/oracle.hpp"

using namespace mbpi;
using namespace mbpi::testing;

TEST_CASE("classification of the one-type fixtures") {
  const auto r1 = classify(fixture("M1"));
  CHECK(r1.unique);
  CHECK(r1.recurrence == Recurrence::Recurrent);
  CHECK(r1.ergodicity == Ergodicity::Ergodic);
  CHECK(r1.exponentiallyErgodic);
  CHECK_FALSE(r1.stronglyErgodic);
  REQUIRE(r1.evidence.stationaryIntegral.has_value());
  // int_0^1 (-A-H)/B = int_0^1 2/(2-u) du = 2 ln 2
  CHECK(std::abs(r1.evidence.stationaryIntegral->value - 2.0 * std::numbers::ln2) <= 1e-8);

  for (const char* name : {"M2", "M4", "M3", "A2"}) {
    const auto r = classify(fixture(name));
    CHECK(r.recurrence == Recurrence::Transient);
    CHECK_FALSE(r.stronglyErgodic);
    CHECK_FALSE(r.exponentiallyErgodic);
  }
}

TEST_CASE("weak immigration at criticality is null recurrent") {
  const auto r = classify(validate(birth_death_immigration(1.0, 1.0, 0.5)));
  CHECK(r.recurrence == Recurrence::Recurrent);
  CHECK(r.ergodicity == Ergodicity::NullRecurrent);
  CHECK_FALSE(r.exponentiallyErgodic);
}

TEST_CASE("classify needs a resurrection family") {
  CHECK_THROWS_AS(classify(absorbing_fixture("M1")), Error);
}

TEST_CASE("M1 equilibrium: recurrence against detailed balance and the oracle") {
  const auto m = fixture("M1");
  const auto pmf = equilibrium_pmf(m, 20);
  CHECK(pmf.method == "recurrence");
  const auto balance = bd_stationary(BirthDeath{2.0, 1.0, 1.0}, 20);
  for (int j = 0; j <= 20; ++j) {
    const double p = pmf.probabilities.at(MultiIndex{j});
    CHECK(std::abs(p - std::ldexp(1.0, -(j + 1))) <= 1e-8);
    CHECK(std::abs(p - balance[static_cast<std::size_t>(j)]) <= 1e-12);
  }
  const auto gen = build_truncated(m, 60);
  const auto st = stationary_solve(gen);
  for (int j = 0; j <= 20; ++j) {
    CHECK(std::abs(pmf.probabilities.at(MultiIndex{j}) - st.probabilities(j)) <= 1e-6);
  }
}

TEST_CASE("equilibrium generating function along the curve") {
  const auto m = fixture("M1");
  // sum_j 2^-(j+1) s^j = 1/(2-s)
  for (double s : {0.0, 0.25, 0.5, 0.9}) CHECK(std::abs(equilibrium_curve_value(m, s) - 1.0 / (2.0 - s)) <= 1e-9);
  const std::vector<double> pts = {0.1, 0.2};
  const auto v = equilibrium_curve_values(m, pts);
  CHECK(v.size() == 2);
  CHECK_THROWS_AS(equilibrium_curve_value(fixture("M2"), 0.5), Error);
}

TEST_CASE("equilibrium of a two-type ergodic model uses the truncated solve") {
  // Subcritical two-type model: each type dies fast or swaps type.
  ModelSpec s;
  s.n = 2;
  s.immigration = RateDistribution::conservative_from(DistributionKind::Immigration, -1,
                                                      {{MultiIndex{1, 0}, 0.5}, {MultiIndex{0, 1}, 0.5}});
  s.branch.push_back(RateDistribution::conservative_from(
      DistributionKind::Branch, 0, {{MultiIndex{0, 0}, 2.0}, {MultiIndex{0, 1}, 0.5}, {MultiIndex{1, 1}, 0.3}}));
  s.branch.push_back(RateDistribution::conservative_from(
      DistributionKind::Branch, 1, {{MultiIndex{0, 0}, 2.0}, {MultiIndex{1, 0}, 0.5}, {MultiIndex{1, 1}, 0.3}}));
  const auto m = validate(s);
  const auto r = classify(m);
  CHECK(r.ergodicity == Ergodicity::Ergodic);
  const auto pmf = equilibrium_pmf(m, 8);
  CHECK(pmf.method == "truncated-solve");
  double sum = 0.0;
  for (const auto& [j, p] : pmf.probabilities) {
    CHECK(p > 0.0);
    sum += p;
  }
  CHECK(sum + pmf.tailMass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(pmf.probabilities.at(MultiIndex{0, 0}) - pmf.pi0) <= 1e-12);
  // pi_0 from the curve formula agrees with the linear solve.
  CHECK(std::abs(equilibrium_curve_value(m, 0.0) - pmf.pi0) <= 1e-6);
}
