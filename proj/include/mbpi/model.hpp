#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mbpi/multi_index.hpp"
#include "mbpi/polynomial.hpp"

namespace mbpi {

enum class DistributionKind { Immigration, Resurrection, Branch };

struct RateEntry {
  MultiIndex offset;
  double rate = 0.0;
};

/// Off-diagonal rates of one family ({a_j}, {h_j} or {b^(k)_j}) plus its
/// negative diagonal entry. The diagonal index is 0 for immigration and
/// resurrection and e_k for branch(k).
struct RateDistribution {
  DistributionKind kind = DistributionKind::Immigration;
  int branchType = -1;  // k for Branch, -1 otherwise
  std::vector<RateEntry> entries;
  double diagonal = 0.0;

  double total_rate() const;
  MultiIndex diagonal_index(std::size_t n) const;
  bool conservative() const;

  /// Builds a distribution whose diagonal is minus the sum of the entries.
  static RateDistribution conservative_from(DistributionKind kind, int branchType,
                                            std::vector<RateEntry> entries);
};

enum class ResurrectionMode {
  SameAsImmigration,  // h_j = a_j
  Absorbing,          // h = 0, state 0 absorbing
  Custom,
};

struct ModelSpec {
  std::size_t n = 0;
  RateDistribution immigration;
  ResurrectionMode resurrectionMode = ResurrectionMode::SameAsImmigration;
  RateDistribution resurrection;  // used only in Custom mode
  std::vector<RateDistribution> branch;
};

enum class GfKind { A, H, B };

struct GfSelector {
  GfKind kind = GfKind::A;
  std::size_t type = 0;  // used for B

  static GfSelector immigration() { return {GfKind::A, 0}; }
  static GfSelector resurrection() { return {GfKind::H, 0}; }
  static GfSelector branch(std::size_t k) { return {GfKind::B, k}; }
};

/// Immutable, validated model: a nTBI q-matrix in factored form together with
/// the quantities every analysis needs.
class ValidatedModel {
 public:
  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t dimension() const noexcept { return spec_.n; }

  const SparsePolynomial& gf(GfSelector which) const;
  const SparsePolynomial& immigration_gf() const noexcept { return immigration_; }
  const SparsePolynomial& resurrection_gf() const noexcept { return resurrection_; }
  const SparsePolynomial& branch_gf(std::size_t k) const { return branch_.at(k); }

  /// The resurrection distribution actually in force (h), empty if absorbing.
  const RateDistribution* resurrection_distribution() const;

  bool absorbing() const noexcept { return spec_.resurrectionMode == ResurrectionMode::Absorbing; }
  bool resurrection_is_immigration() const noexcept {
    return spec_.resurrectionMode == ResurrectionMode::SameAsImmigration;
  }

  bool immigration_conservative() const noexcept { return immigrationConservative_; }
  bool resurrection_conservative() const noexcept { return resurrectionConservative_; }
  const std::vector<bool>& branch_conservative() const noexcept { return branchConservative_; }
  bool branching_conservative() const;
  bool fully_conservative() const;

  /// B_ij(1,...,1).
  const Eigen::MatrixXd& mean_matrix() const noexcept { return meanMatrix_; }
  /// Maximal real eigenvalue of mean_matrix().
  double perron_at_one() const noexcept { return perronAtOne_; }
  bool positively_regular() const noexcept { return true; }
  bool nonsingular() const noexcept { return true; }

  /// Same branching and immigration with state 0 made absorbing.
  ValidatedModel absorptive_companion() const;
  /// Same branching and immigration with h = a.
  ValidatedModel with_resurrection_as_immigration() const;

 private:
  friend ValidatedModel validate(ModelSpec spec);
  ValidatedModel() = default;

  ModelSpec spec_;
  SparsePolynomial immigration_;
  SparsePolynomial resurrection_;
  std::vector<SparsePolynomial> branch_;
  bool immigrationConservative_ = false;
  bool resurrectionConservative_ = false;
  std::vector<bool> branchConservative_;
  Eigen::MatrixXd meanMatrix_;
  double perronAtOne_ = 0.0;
};

/// Checks rates, dimensions, nonsingularity and positive regularity.
ValidatedModel validate(ModelSpec spec);

/// Generating function of a rate family including its diagonal term.
/// Domain is [-1,1]^n.
double eval_gf(const ValidatedModel& model, GfSelector which, std::span<const double> u);

/// Matrix of exact partials B_ij(u) = dB_i/du_j. Domain is [0,1]^n.
Eigen::MatrixXd jacobian(const ValidatedModel& model, std::span<const double> u);

struct PerronResult {
  double value = 0.0;
  Eigen::VectorXd vector;  // nonnegative, unit max-norm
  int iterations = 0;
  bool usedFallback = false;
};

/// Maximal real eigenvalue of an essentially nonnegative matrix by shifted
/// power iteration, bracketed by Collatz-Wielandt bounds.
PerronResult perron_eigen(const Eigen::MatrixXd& m, double relTol = 1e-12, int maxIterations = 100000);

/// rho(u), the maximal real eigenvalue of jacobian(u).
double perron_root(const ValidatedModel& model, std::span<const double> u);

/// Tolerance used when deciding rho(1) <= 0 (criticality).
inline constexpr double kCriticalityTolerance = 1e-10;

/// Branching sign-pattern reachability: true when some type-i split can
/// produce a type-j particle (i != j) or i == j and it can reproduce itself.
std::vector<std::vector<bool>> offspring_sign_pattern(const ModelSpec& spec);

}  // namespace mbpi
