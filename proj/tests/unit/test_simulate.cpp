#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/fixtures_util.hpp"
#include "mbpi/simulate.hpp"

using namespace mbpi;
using namespace mbpi::testing;

namespace {

SimConfig config(MultiIndex from, std::size_t n, std::uint64_t seed = 7) {
  SimConfig c;
  c.initial = std::move(from);
  c.replicates = n;
  c.masterSeed = seed;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("random streams are reproducible and distinct") {
  RandomStream a(1, 0), b(1, 0), c(1, 1);
  for (int k = 0; k < 5; ++k) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  RandomStream u(3, 4);
  double mean = 0.0;
  for (int k = 0; k < 20000; ++k) {
    const double v = u.uniform();
    CHECK((v >= 0.0 && v < 1.0));
    mean += v;
  }
  CHECK(std::abs(mean / 20000 - 0.5) < 0.01);
}

TEST_CASE("outcomes do not depend on the thread count") {
  const auto m = absorbing_fixture("M2");
  auto c = config(MultiIndex{1}, 200);
  c.maxEvents = 2000;
  const auto one = simulate_replicates(m, c);
  c.threads = 4;
  const auto four = simulate_replicates(m, c);
  REQUIRE(one.size() == four.size());
  for (std::size_t k = 0; k < one.size(); ++k) {
    CHECK(one[k].status == four[k].status);
    CHECK(one[k].time == four[k].time);
    CHECK(one[k].state == four[k].state);
  }
}

TEST_CASE("starting at zero in an absorbing model is immediate absorption") {
  const auto r = simulate_path(absorbing_fixture("M1"), config(MultiIndex{0}, 1), 0);
  CHECK(r.status == OutcomeStatus::Absorbed);
  CHECK(r.time == 0.0);
  CHECK(r.eventCount == 0);
}

TEST_CASE("non-conservative models are refused") {
  ModelSpec s = fixture_spec("M1");
  s.branch[0].diagonal = -3.5;
  CHECK_THROWS_AS(simulate_path(validate(s), config(MultiIndex{1}, 1), 0), Error);
}

TEST_CASE("subcritical extinction is nearly certain") {
  auto c = config(MultiIndex{3}, 500);
  const auto e = estimate_extinction(absorbing_fixture("M1"), c);
  CHECK(e.value >= 0.99);
  CHECK_THROWS_AS(estimate_extinction(fixture("M1"), c), Error);
}

TEST_CASE("mean absorption time of M1 from one particle") {
  const auto e = estimate_mean_extinction_time(absorbing_fixture("M1"), config(MultiIndex{1}, 4000));
  CHECK(std::abs(e.value - 1.0) <= 3.0 * e.standardError);
  CHECK_THROWS_AS(estimate_mean_extinction_time(absorbing_fixture("M1"), config(MultiIndex{0}, 10)), Error);
}

TEST_CASE("transition estimates") {
  const auto m = fixture("M1");
  const auto at0 = estimate_transition(m, MultiIndex{0}, MultiIndex{0}, 0.0, config(MultiIndex{0}, 100));
  CHECK(at0.value == 1.0);
  // p_00(t) = 1 - t + O(t^2) from state 0 (exit rate 1).
  const double t = 0.01;
  const auto small = estimate_transition(m, MultiIndex{0}, MultiIndex{0}, t, config(MultiIndex{0}, 20000));
  CHECK(std::abs(small.value - std::exp(-t)) <= 3.0 * small.standardError + 1e-3);
}

TEST_CASE("equilibrium frequencies form a distribution") {
  auto c = config(MultiIndex{0}, 1);
  c.tMax = 2000.0;
  const auto eq = estimate_equilibrium(fixture("M1"), c, 10.0);
  double sum = 0.0;
  for (const auto& [j, f] : eq.frequencies) sum += f;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  CHECK(std::abs(eq.frequencies.at(MultiIndex{0}) - 0.5) <= 0.05);
  CHECK_THROWS_AS(estimate_equilibrium(fixture("M2"), c, 10.0), Error);
}

TEST_CASE("branching property on a single particle is trivially exact") {
  auto c = config(MultiIndex{1}, 500);
  const auto r = branching_property_check(fixture("M1"), MultiIndex{1}, 1.0, c);
  CHECK(r.residual == 0.0);
  CHECK(r.pass);
  CHECK_THROWS_AS(branching_property_check(absorbing_fixture("M1"), MultiIndex{2}, 1.0, c), Error);
}

TEST_CASE("a leg that never hits zero is degenerate") {
  auto c = config(MultiIndex{2}, 20);
  CHECK_THROWS_AS(branching_property_check(fixture("M2"), MultiIndex{40}, 0.01, c), Error);
  std::vector<ReplicateOutcome> none(5);
  CHECK_THROWS_AS(mean_absorption_time(none), Error);
}

TEST_CASE("paths CSV") {
  auto c = config(MultiIndex{1, 0}, 3);
  c.tMax = 0.5;
  std::ostringstream out;
  write_paths_csv(fixture("M3"), c, 2, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "replicate,time,x1,x2\r");
  std::getline(in, line);
  CHECK(line.rfind("0,0,1,0", 0) == 0);
}

TEST_CASE("wide offset tables are sampled in proportion to their rates") {
  // 100 immigration offsets: alias sampling path.
  ModelSpec s = birth_death_immigration(50.0, 0.0, 1.0);
  s.immigration.entries.clear();
  double total = 0.0;
  for (int k = 1; k <= 100; ++k) {
    s.immigration.entries.push_back({MultiIndex{k}, k == 1 ? 50.0 : 0.5});
    total += k == 1 ? 50.0 : 0.5;
  }
  s.immigration.diagonal = -total;
  s.resurrectionMode = ResurrectionMode::SameAsImmigration;
  const auto m = validate(s);
  auto c = config(MultiIndex{0}, 4000);
  c.tMax = 1e-6;
  std::size_t ones = 0, jumps = 0;
  for (std::size_t r = 0; r < c.replicates; ++r) {
    MultiIndex first;
    bool seen = false;
    auto cc = c;
    cc.tMax = 100.0;
    cc.maxEvents = 1;
    simulate_path(m, cc, r, [&](double time, const MultiIndex& st) {
      if (time > 0.0 && !seen) {
        first = st;
        seen = true;
      }
    });
    if (seen) {
      ++jumps;
      if (first[0] == 1) ++ones;
    }
  }
  REQUIRE(jumps > 3000);
  const double p = 50.0 / total;  // 50 / 99.5
  const double f = static_cast<double>(ones) / static_cast<double>(jumps);
  CHECK(std::abs(f - p) <= 4.0 * std::sqrt(p * (1 - p) / static_cast<double>(jumps)));
}
