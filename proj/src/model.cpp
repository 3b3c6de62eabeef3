#include "mbpi/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <set>

namespace mbpi {

namespace {

constexpr double kConservativeTol = 1e-12;

void check_distribution(RateDistribution& d, std::size_t n, const std::string& label) {
  std::erase_if(d.entries, [](const RateEntry& e) { return e.rate == 0.0; });
  const MultiIndex diag = d.diagonal_index(n);
  std::set<MultiIndex> seen;
  for (const auto& e : d.entries) {
    if (e.offset.size() != n) {
      throw Error(ErrorCode::DimensionMismatch, label + ": offset " + e.offset.to_string() +
                                                    " has length " + std::to_string(e.offset.size()) +
                                                    ", expected " + std::to_string(n));
    }
    if (!std::isfinite(e.rate) || e.rate < 0.0) {
      throw Error(ErrorCode::NegativeRate, label + ": rate at " + e.offset.to_string() + " is " +
                                               std::to_string(e.rate));
    }
    if (e.offset == diag) {
      throw Error(ErrorCode::DiagonalMismatch,
                  label + ": diagonal index " + diag.to_string() + " listed among entries");
    }
    if (!seen.insert(e.offset).second) {
      throw Error(ErrorCode::MalformedInput, label + ": duplicate offset " + e.offset.to_string());
    }
  }
  const double total = d.total_rate();
  if (!std::isfinite(d.diagonal) || !(total > 0.0)) {
    throw Error(ErrorCode::DiagonalMismatch, label + ": requires 0 < sum of rates");
  }
  if (total > -d.diagonal * (1.0 + kConservativeTol)) {
    throw Error(ErrorCode::DiagonalMismatch, label + ": sum of rates " + std::to_string(total) +
                                                 " exceeds -diagonal " + std::to_string(-d.diagonal));
  }
}

SparsePolynomial to_polynomial(const RateDistribution& d, std::size_t n) {
  std::vector<SparsePolynomial::Term> terms;
  terms.reserve(d.entries.size() + 1);
  for (const auto& e : d.entries) terms.push_back({e.offset, e.rate});
  terms.push_back({d.diagonal_index(n), d.diagonal});
  return SparsePolynomial(n, std::move(terms));
}

void check_domain(std::span<const double> u, std::size_t n, double lo, double hi) {
  if (u.size() != n) throw Error(ErrorCode::DimensionMismatch, "point has wrong dimension");
  for (double x : u) {
    if (!(x >= lo && x <= hi)) {
      throw Error(ErrorCode::OutOfDomain, "point coordinate " + std::to_string(x) + " outside [" +
                                              std::to_string(lo) + "," + std::to_string(hi) + "]");
    }
  }
}

bool positively_regular(const std::vector<std::vector<bool>>& pattern) {
  const std::size_t n = pattern.size();
  using BoolMat = std::vector<std::vector<bool>>;
  auto multiply = [n](const BoolMat& a, const BoolMat& b) {
    BoolMat c(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        if (a[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (b[k][j]) c[i][j] = true;
    return c;
  };
  // The diagonal is always allowed: a particle persists between splits, so
  // only irreducibility of the type graph matters in continuous time.
  BoolMat step = pattern;
  for (std::size_t i = 0; i < n; ++i) step[i][i] = true;
  BoolMat power = step;
  const std::size_t maxExponent = std::max<std::size_t>(1, n * n);
  for (std::size_t e = 1; e <= maxExponent; ++e) {
    bool all = true;
    for (const auto& row : power)
      for (bool b : row) all = all && b;
    if (all) return true;
    power = multiply(power, step);
  }
  return false;
}

}  // namespace

double RateDistribution::total_rate() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.rate;
  return s;
}

MultiIndex RateDistribution::diagonal_index(std::size_t n) const {
  if (kind == DistributionKind::Branch) return MultiIndex::unit(n, static_cast<std::size_t>(branchType));
  return MultiIndex(n);
}

bool RateDistribution::conservative() const {
  return std::abs(total_rate() + diagonal) <= kConservativeTol * std::max(1.0, std::abs(diagonal));
}

RateDistribution RateDistribution::conservative_from(DistributionKind kind, int branchType,
                                                     std::vector<RateEntry> entries) {
  RateDistribution d{kind, branchType, std::move(entries), 0.0};
  d.diagonal = -d.total_rate();
  return d;
}

std::vector<std::vector<bool>> offspring_sign_pattern(const ModelSpec& spec) {
  const std::size_t n = spec.n;
  std::vector<std::vector<bool>> g(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : spec.branch[i].entries) {
      for (std::size_t j = 0; j < n; ++j) {
        if (e.offset[j] > 0) g[i][j] = true;
      }
    }
  }
  return g;
}

const SparsePolynomial& ValidatedModel::gf(GfSelector which) const {
  switch (which.kind) {
    case GfKind::A: return immigration_;
    case GfKind::H: return resurrection_;
    case GfKind::B:
      if (which.type >= branch_.size()) throw Error(ErrorCode::InvalidArgument, "branch type out of range");
      return branch_[which.type];
  }
  return immigration_;
}

const RateDistribution* ValidatedModel::resurrection_distribution() const {
  switch (spec_.resurrectionMode) {
    case ResurrectionMode::SameAsImmigration: return &spec_.immigration;
    case ResurrectionMode::Custom: return &spec_.resurrection;
    case ResurrectionMode::Absorbing: return nullptr;
  }
  return nullptr;
}

bool ValidatedModel::branching_conservative() const {
  return std::all_of(branchConservative_.begin(), branchConservative_.end(), [](bool b) { return b; });
}

bool ValidatedModel::fully_conservative() const {
  return branching_conservative() && immigrationConservative_ && (absorbing() || resurrectionConservative_);
}

ValidatedModel ValidatedModel::absorptive_companion() const {
  ModelSpec s = spec_;
  s.resurrectionMode = ResurrectionMode::Absorbing;
  s.resurrection = RateDistribution{DistributionKind::Resurrection, -1, {}, 0.0};
  return validate(std::move(s));
}

ValidatedModel ValidatedModel::with_resurrection_as_immigration() const {
  ModelSpec s = spec_;
  s.resurrectionMode = ResurrectionMode::SameAsImmigration;
  s.resurrection = RateDistribution{DistributionKind::Resurrection, -1, {}, 0.0};
  return validate(std::move(s));
}

ValidatedModel validate(ModelSpec spec) {
  const std::size_t n = spec.n;
  if (n < 1) throw Error(ErrorCode::DimensionMismatch, "dimension must be at least 1");
  if (spec.branch.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(n) + " branch distributions, got " +
                                                  std::to_string(spec.branch.size()));
  }
  spec.immigration.kind = DistributionKind::Immigration;
  spec.immigration.branchType = -1;
  check_distribution(spec.immigration, n, "immigration");
  if (spec.resurrectionMode == ResurrectionMode::Custom) {
    spec.resurrection.kind = DistributionKind::Resurrection;
    spec.resurrection.branchType = -1;
    check_distribution(spec.resurrection, n, "resurrection");
  }
  for (std::size_t k = 0; k < n; ++k) {
    spec.branch[k].kind = DistributionKind::Branch;
    spec.branch[k].branchType = static_cast<int>(k);
    check_distribution(spec.branch[k], n, "branch[" + std::to_string(k) + "]");
  }

  // Singular: every offspring vector is a single particle, so B(u) = M u.
  bool singular = true;
  for (const auto& b : spec.branch) {
    for (const auto& e : b.entries) {
      if (e.offset.total() != 1) singular = false;
    }
  }
  if (singular) throw Error(ErrorCode::Singular, "every split yields exactly one particle");

  if (!positively_regular(offspring_sign_pattern(spec))) {
    throw Error(ErrorCode::NotPositivelyRegular, "offspring mean matrix G(1) is not positively regular");
  }

  ValidatedModel m;
  m.immigration_ = to_polynomial(spec.immigration, n);
  m.immigrationConservative_ = spec.immigration.conservative();
  switch (spec.resurrectionMode) {
    case ResurrectionMode::SameAsImmigration:
      m.resurrection_ = m.immigration_;
      m.resurrectionConservative_ = m.immigrationConservative_;
      break;
    case ResurrectionMode::Custom:
      m.resurrection_ = to_polynomial(spec.resurrection, n);
      m.resurrectionConservative_ = spec.resurrection.conservative();
      break;
    case ResurrectionMode::Absorbing:
      m.resurrection_ = SparsePolynomial(n, {});
      m.resurrectionConservative_ = true;
      break;
  }
  for (std::size_t k = 0; k < n; ++k) {
    m.branch_.push_back(to_polynomial(spec.branch[k], n));
    m.branchConservative_.push_back(spec.branch[k].conservative());
  }
  m.spec_ = std::move(spec);

  const std::vector<double> ones(n, 1.0);
  m.meanMatrix_ = jacobian(m, ones);
  m.perronAtOne_ = perron_eigen(m.meanMatrix_).value;
  return m;
}

double eval_gf(const ValidatedModel& model, GfSelector which, std::span<const double> u) {
  check_domain(u, model.dimension(), -1.0, 1.0);
  return model.gf(which)(u);
}

Eigen::MatrixXd jacobian(const ValidatedModel& model, std::span<const double> u) {
  const std::size_t n = model.dimension();
  check_domain(u, n, 0.0, 1.0);
  Eigen::MatrixXd jac(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) jac(i, j) = model.branch_gf(i).partial(j, u);
  return jac;
}

PerronResult perron_eigen(const Eigen::MatrixXd& m, double relTol, int maxIterations) {
  const Eigen::Index n = m.rows();
  PerronResult result;
  if (n == 1) {
    result.value = m(0, 0);
    result.vector = Eigen::VectorXd::Ones(1);
    return result;
  }
  // Shift so the matrix is nonnegative with a positive diagonal (aperiodic).
  const double shift = m.diagonal().cwiseAbs().maxCoeff() + 1.0;
  const Eigen::MatrixXd shifted = m + shift * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  for (int it = 1; it <= maxIterations; ++it) {
    const Eigen::VectorXd y = shifted * x;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x(i) > 0.0) {
        lo = std::min(lo, y(i) / x(i));
        hi = std::max(hi, y(i) / x(i));
      }
    }
    const double norm = y.cwiseAbs().maxCoeff();
    if (!(norm > 0.0)) break;
    x = y / norm;
    if (hi - lo <= relTol * std::max(1.0, std::abs(hi - shift)) ) {
      result.value = 0.5 * (lo + hi) - shift;
      result.vector = x;
      result.iterations = it;
      return result;
    }
  }
  // Reducible or slowly mixing pattern: fall back to a dense eigensolver.
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m);
  const auto& values = solver.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (values(i).real() > values(best).real()) best = i;
  }
  result.value = values(best).real();
  Eigen::VectorXd v = solver.eigenvectors().col(best).real().cwiseAbs();
  result.vector = v / v.maxCoeff();
  result.iterations = maxIterations;
  result.usedFallback = true;
  return result;
}

double perron_root(const ValidatedModel& model, std::span<const double> u) {
  return perron_eigen(jacobian(model, u)).value;
}

}  // namespace mbpi
