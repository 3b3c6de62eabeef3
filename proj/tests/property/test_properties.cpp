#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "mbpi/decay.hpp"
#include "mbpi/extinction.hpp"
#include "mbpi/fixtures.hpp"
#include "mbpi/model_io.hpp"
#include "mbpi/oracle.hpp"
#include "mbpi/polynomial.hpp"
#include "mbpi/simulate.hpp"

using namespace mbpi;
using namespace mbpi::testing;

namespace {

constexpr int kCases = 25;

double uniform(std::mt19937_64& g, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g); }

// One-type model with offspring counts 0..3 and immigrant batches 1..2.
ModelSpec random_one_type(std::mt19937_64& g) {
  ModelSpec s;
  s.n = 1;
  std::vector<RateEntry> imm = {{MultiIndex{1}, uniform(g, 0.2, 2.0)}};
  if (g() % 2) imm.push_back({MultiIndex{2}, uniform(g, 0.0, 0.5)});
  s.immigration = RateDistribution::conservative_from(DistributionKind::Immigration, -1, imm);
  std::vector<RateEntry> br = {{MultiIndex{0}, uniform(g, 0.3, 2.0)}, {MultiIndex{2}, uniform(g, 0.0, 2.0)}};
  if (g() % 2) br.push_back({MultiIndex{3}, uniform(g, 0.0, 0.4)});
  s.branch.push_back(RateDistribution::conservative_from(DistributionKind::Branch, 0, br));
  return s;
}

// Two-type model where each type dies, switches, or produces a mixed pair.
ModelSpec random_two_type(std::mt19937_64& g) {
  ModelSpec s;
  s.n = 2;
  s.immigration = RateDistribution::conservative_from(
      DistributionKind::Immigration, -1,
      {{MultiIndex{1, 0}, uniform(g, 0.1, 1.0)}, {MultiIndex{0, 1}, uniform(g, 0.1, 1.0)}});
  s.branch.push_back(RateDistribution::conservative_from(DistributionKind::Branch, 0,
                                                         {{MultiIndex{0, 0}, uniform(g, 0.3, 2.0)},
                                                          {MultiIndex{0, 1}, uniform(g, 0.1, 1.0)},
                                                          {MultiIndex{1, 1}, uniform(g, 0.0, 1.5)}}));
  s.branch.push_back(RateDistribution::conservative_from(DistributionKind::Branch, 1,
                                                         {{MultiIndex{0, 0}, uniform(g, 0.3, 2.0)},
                                                          {MultiIndex{1, 0}, uniform(g, 0.1, 1.0)},
                                                          {MultiIndex{0, 2}, uniform(g, 0.0, 1.5)}}));
  return s;
}

ModelSpec absorbing(ModelSpec s) {
  s.resurrectionMode = ResurrectionMode::Absorbing;
  return s;
}

}  // namespace

TEST_CASE("truncated generators conserve rate") {
  std::mt19937_64 g(101);
  for (int c = 0; c < kCases; ++c) {
    for (const auto& spec : {random_one_type(g), random_two_type(g)}) {
      const auto gen = build_truncated(validate(spec), spec.n == 1 ? 30 : 10);
      for (Eigen::Index r = 0; r < gen.matrix.rows(); ++r) {
        CHECK(std::abs(gen.matrix.row(r).sum() + gen.leak(r)) <= 1e-12 * (1.0 + std::abs(gen.matrix(r, r))));
        CHECK(gen.leak(r) >= 0.0);
      }
    }
  }
}

TEST_CASE("transition rows are sub-stochastic with the leak closing the sum") {
  std::mt19937_64 g(202);
  for (int c = 0; c < kCases; ++c) {
    const auto spec = c % 2 ? random_one_type(g) : random_two_type(g);
    const auto gen = build_truncated(validate(spec), spec.n == 1 ? 30 : 10);
    const MultiIndex from = spec.n == 1 ? MultiIndex{2} : MultiIndex{1, 1};
    const double t = uniform(g, 0.1, 3.0);
    const auto row = transition_row(gen, from, t);
    CHECK(std::abs(row.p.sum() + row.leak - 1.0) <= 1e-12);
    CHECK(row.p.minCoeff() >= -1e-14);
  }
}

TEST_CASE("truncated transition matrices form a semigroup") {
  std::mt19937_64 g(303);
  for (int c = 0; c < kCases; ++c) {
    const auto spec = c % 2 ? random_one_type(g) : random_two_type(g);
    const auto gen = build_truncated(validate(spec), spec.n == 1 ? 20 : 8);
    const double s = uniform(g, 0.1, 1.5), t = uniform(g, 0.1, 1.5);
    const auto ps = transition_matrix(gen, s), pt = transition_matrix(gen, t), pst = transition_matrix(gen, s + t);
    CHECK((ps.p * pt.p - pst.p).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("minimal roots lie in the box and solve the system") {
  std::mt19937_64 g(404);
  for (int c = 0; c < kCases; ++c) {
    for (const auto& spec : {random_one_type(g), random_two_type(g)}) {
      const auto m = validate(spec);
      const auto r = minimal_root(m);
      for (std::size_t k = 0; k < m.dimension(); ++k) {
        CHECK(r.q[k] >= 0.0);
        CHECK(r.q[k] <= 1.0);
        CHECK(std::abs(eval_gf(m, GfSelector::branch(k), r.q)) <= 1e-10);
      }
      CHECK(perron_root(m, r.q) <= 1e-10);
    }
  }
}

TEST_CASE("one-type birth-death extinction agrees with the series") {
  std::mt19937_64 g(505);
  for (int c = 0; c < kCases; ++c) {
    const double death = uniform(g, 0.5, 1.5), birth = uniform(g, 0.2, 3.0), imm = uniform(g, 0.2, 2.0);
    if (std::abs(birth - death) < 0.05) continue;
    const BirthDeath ref{death, birth, imm};
    const auto m = validate(absorbing(birth_death_immigration(death, birth, imm)));
    for (int i : {1, 2, 5}) {
      const auto e = extinction_probability(m, MultiIndex{i});
      CHECK(std::abs(e.value - bd_extinction(ref, i)) <= 1e-7);
    }
  }
}

TEST_CASE("extinction probability falls as the start grows") {
  std::mt19937_64 g(606);
  for (int c = 0; c < kCases; ++c) {
    const auto m = validate(absorbing(c % 2 ? random_one_type(g) : random_two_type(g)));
    const MultiIndex e1 = m.dimension() == 1 ? MultiIndex{1} : MultiIndex{1, 0};
    const MultiIndex big = m.dimension() == 1 ? MultiIndex{3} : MultiIndex{2, 1};
    const auto a = extinction_probability(m, e1), b = extinction_probability(m, big);
    CHECK(b.value <= a.value + 1e-9);
  }
}

TEST_CASE("subcritical birth-death mean times agree with the series") {
  std::mt19937_64 g(707);
  for (int c = 0; c < kCases; ++c) {
    const double birth = uniform(g, 0.1, 1.0), death = birth + uniform(g, 0.3, 2.0), imm = uniform(g, 0.1, 1.5);
    const auto m = validate(absorbing(birth_death_immigration(death, birth, imm)));
    const BirthDeath ref{death, birth, imm};
    for (int i : {1, 3}) {
      const auto r = mean_extinction_time(m, MultiIndex{i});
      REQUIRE(r.finite);
      CHECK(std::abs(r.value - bd_mean_hitting_time(ref, i)) <= 1e-7 * (1.0 + r.value));
    }
  }
}

TEST_CASE("simulation is reproducible per seed") {
  std::mt19937_64 g(808);
  for (int c = 0; c < 5; ++c) {
    const auto m = validate(absorbing(c % 2 ? random_one_type(g) : random_two_type(g)));
    SimConfig cfg;
    cfg.initial = m.dimension() == 1 ? MultiIndex{2} : MultiIndex{1, 1};
    cfg.tMax = 5.0;
    cfg.maxEvents = 5000;
    cfg.replicates = 64;
    cfg.masterSeed = g();
    cfg.threads = 1;
    const auto a = simulate_replicates(m, cfg);
    cfg.threads = 3;
    const auto b = simulate_replicates(m, cfg);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].time == b[k].time);
      CHECK(a[k].state == b[k].state);
      CHECK(a[k].eventCount == b[k].eventCount);
    }
  }
}

TEST_CASE("model JSON round trip") {
  std::mt19937_64 g(909);
  for (int c = 0; c < kCases; ++c) {
    const auto spec = c % 2 ? random_one_type(g) : random_two_type(g);
    const auto text = spec_to_json(spec).dump();
    const auto back = spec_from_json_text(text);
    CHECK(spec_to_json(back).dump() == text);
    const std::vector<double> x(spec.n, uniform(g, 0.0, 1.0));
    const auto m1 = validate(spec), m2 = validate(back);
    CHECK(eval_gf(m1, GfSelector::branch(0), x) == eval_gf(m2, GfSelector::branch(0), x));
  }
}

TEST_CASE("invariant vectors hold on interior rows") {
  std::mt19937_64 g(1010);
  for (int c = 0; c < kCases; ++c) {
    const auto m = validate(c % 2 ? random_one_type(g) : random_two_type(g));
    const double lambda = decay_parameter(m).lambdaZ;
    CHECK(lambda >= 0.0);
    const auto gen = build_truncated(m, m.dimension() == 1 ? 16 : 12);
    for (std::size_t r = 0; r < gen.size(); ++r) {
      if (gen.states[r].total() > 6) continue;
      double s = lambda * invariant_vector(m, gen.states[r]);
      for (std::size_t k = 0; k < gen.size(); ++k) {
        s += gen.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) *
             invariant_vector(m, gen.states[k]);
      }
      CHECK(std::abs(s) <= 1e-11);
    }
  }
}

TEST_CASE("recentred polynomials agree with the original") {
  std::mt19937_64 g(1111);
  for (int c = 0; c < kCases; ++c) {
    std::vector<SparsePolynomial::Term> terms;
    for (int k = 0; k < 6; ++k) {
      terms.push_back({MultiIndex{static_cast<int>(g() % 4), static_cast<int>(g() % 4)}, uniform(g, -2.0, 2.0)});
    }
    const SparsePolynomial p(2, terms);
    const std::vector<double> center = {uniform(g, 0.0, 1.0), uniform(g, 0.0, 1.0)};
    const auto r = p.recentered(center);
    const std::vector<double> v = {uniform(g, -0.5, 0.5), uniform(g, -0.5, 0.5)};
    const std::vector<double> u = {center[0] - v[0], center[1] - v[1]};
    CHECK(std::abs(r(v) - p(u)) <= 1e-12 * (1.0 + std::abs(p(u))));
  }
}

TEST_CASE("Perron root grows along the diagonal") {
  std::mt19937_64 g(1212);
  for (int c = 0; c < kCases; ++c) {
    const auto m = validate(random_two_type(g));
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 10; ++k) {
      const std::vector<double> x(2, k / 10.0);
      const double r = perron_root(m, x);
      CHECK(r >= prev - 1e-12);
      prev = r;
    }
  }
}
