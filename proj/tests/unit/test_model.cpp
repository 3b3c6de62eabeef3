#include <doctest.h>

#include <cmath>

#include "../support/fixtures_util.hpp"
#include "mbpi/model.hpp"
#include "mbpi/polynomial.hpp"

using namespace mbpi;
using mbpi::testing::fixture;

namespace {

ErrorCode code_of(const ModelSpec& s) {
  try {
    validate(s);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("validate accepted the model");
  return ErrorCode::MalformedInput;
}

}  // namespace

TEST_CASE("M1 validates with hand-computed mean matrix") {
  const auto m = fixture("M1");
  CHECK(m.dimension() == 1);
  CHECK(m.fully_conservative());
  CHECK(m.mean_matrix()(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(m.perron_at_one() == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("M3 mean matrix and Perron root") {
  const auto m = fixture("M3");
  // dB1/du1 = -2, dB1/du2 = 2*1.2 at (1,1); symmetric for B2.
  CHECK(m.mean_matrix()(0, 0) == doctest::Approx(-2.0));
  CHECK(m.mean_matrix()(0, 1) == doctest::Approx(2.4));
  CHECK(m.mean_matrix()(1, 0) == doctest::Approx(2.4));
  CHECK(m.mean_matrix()(1, 1) == doctest::Approx(-2.0));
  // eigenvalues -2 +- 2.4
  CHECK(std::abs(m.perron_at_one() - 0.4) <= 1e-12);
  const std::vector<double> half = {0.5, 0.25};
  const auto j = jacobian(m, half);
  CHECK(j(0, 1) == doctest::Approx(2.4 * 0.25));
  CHECK(j(1, 0) == doctest::Approx(2.4 * 0.5));
}

TEST_CASE("perron_root of the one-type fixtures") {
  const std::vector<double> one = {1.0};
  CHECK(std::abs(perron_root(fixture("M1"), one) + 1.0) <= 1e-12);
  CHECK(std::abs(perron_root(fixture("M2"), one) - 1.0) <= 1e-12);
  CHECK(std::abs(perron_root(fixture("M4"), one)) <= 1e-12);
}

TEST_CASE("generating function values") {
  const auto m1 = fixture("M1");
  const auto m2 = fixture("M2");
  const std::vector<double> one = {1.0}, zero = {0.0}, half = {0.5};
  CHECK(std::abs(eval_gf(m1, GfSelector::immigration(), one)) <= 1e-15);
  CHECK(eval_gf(m1, GfSelector::branch(0), zero) == 2.0);
  CHECK(std::abs(eval_gf(m2, GfSelector::branch(0), half)) <= 1e-15);
  // jacobian(M1, u) = 2u - 3
  for (double u : {0.0, 0.3, 0.9}) {
    const std::vector<double> x = {u};
    CHECK(jacobian(m1, x)(0, 0) == doctest::Approx(2 * u - 3));
  }
}

TEST_CASE("domain checks") {
  const auto m1 = fixture("M1");
  const std::vector<double> out = {1.5};
  CHECK_THROWS_AS(eval_gf(m1, GfSelector::immigration(), out), Error);
  const std::vector<double> neg = {-0.5};
  CHECK_NOTHROW(eval_gf(m1, GfSelector::immigration(), neg));
  CHECK_THROWS_AS(jacobian(m1, neg), Error);
}

TEST_CASE("validation rejects broken models") {
  ModelSpec s = fixture_spec("M1");
  SUBCASE("negative rate") {
    s.immigration.entries[0].rate = -1.0;
    CHECK(code_of(s) == ErrorCode::NegativeRate);
  }
  SUBCASE("entries exceed exit rate") {
    s.branch[0].diagonal = -2.0;
    CHECK(code_of(s) == ErrorCode::DiagonalMismatch);
  }
  SUBCASE("diagonal index listed") {
    s.branch[0].entries.push_back({MultiIndex{1}, 0.5});
    CHECK(code_of(s) == ErrorCode::DiagonalMismatch);
  }
  SUBCASE("wrong offset length") {
    s.branch[0].entries.push_back({MultiIndex{3, 0}, 0.5});
    CHECK(code_of(s) == ErrorCode::DimensionMismatch);
  }
  SUBCASE("missing branch family") {
    s.branch.clear();
    CHECK(code_of(s) == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("single-particle splits are singular") {
  ModelSpec s = fixture_spec("M3");
  s.branch[0] = RateDistribution::conservative_from(DistributionKind::Branch, 0, {{MultiIndex{0, 1}, 1.0}});
  s.branch[1] = RateDistribution::conservative_from(DistributionKind::Branch, 1, {{MultiIndex{1, 0}, 1.0}});
  CHECK(code_of(s) == ErrorCode::Singular);
}

TEST_CASE("types that never produce each other are not positively regular") {
  ModelSpec s = fixture_spec("M3");
  s.branch[0] = RateDistribution::conservative_from(DistributionKind::Branch, 0,
                                                    {{MultiIndex{0, 0}, 1.0}, {MultiIndex{2, 0}, 1.0}});
  CHECK(code_of(s) == ErrorCode::NotPositivelyRegular);
}

TEST_CASE("zero rates are dropped and non-conservative families are kept") {
  ModelSpec s = fixture_spec("M1");
  s.immigration.entries.push_back({MultiIndex{3}, 0.0});
  s.branch[0].diagonal = -3.5;
  const auto m = validate(s);
  CHECK(m.spec().immigration.entries.size() == 1);
  CHECK_FALSE(m.branch_conservative()[0]);
  CHECK(m.immigration_conservative());
}

TEST_CASE("absorptive companion drops resurrection only") {
  const auto m = fixture("M2");
  CHECK(m.resurrection_is_immigration());
  const auto a = m.absorptive_companion();
  CHECK(a.absorbing());
  CHECK(a.resurrection_distribution() == nullptr);
  CHECK(a.mean_matrix()(0, 0) == m.mean_matrix()(0, 0));
  CHECK(a.with_resurrection_as_immigration().resurrection_is_immigration());
}

TEST_CASE("perron_eigen on a reducible pattern uses the fallback") {
  Eigen::MatrixXd a(2, 2);
  a << -1.0, 0.0, 0.0, -3.0;
  const auto r = perron_eigen(a);
  CHECK(r.value == doctest::Approx(-1.0));
}

TEST_CASE("recentred polynomial matches the original") {
  const auto m = fixture("A2");
  const auto& b = m.branch_gf(0);
  const std::vector<double> c = {0.7, 0.4};
  const SparsePolynomial r = b.recentered(c);
  for (double v1 : {0.0, 0.1, 0.3}) {
    for (double v2 : {0.0, 0.2}) {
      const std::vector<double> v = {v1, v2}, u = {c[0] - v1, c[1] - v2};
      CHECK(r(v) == doctest::Approx(b(u)).epsilon(1e-14));
    }
  }
  CHECK(r.constant_term() == doctest::Approx(b(c)));
}
