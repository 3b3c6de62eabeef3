#pragma once

#include <span>
#include <vector>

#include "mbpi/multi_index.hpp"

namespace mbpi {

/// Sparse multivariate polynomial sum_j c_j x^j with nonnegative integer exponents.
///
/// Generating functions of the rate families are stored this way; the diagonal
/// rate is just another term.
class SparsePolynomial {
 public:
  struct Term {
    MultiIndex exponent;
    double coefficient;
  };

  SparsePolynomial() = default;
  SparsePolynomial(std::size_t dimension, std::vector<Term> terms);

  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<Term>& terms() const noexcept { return terms_; }
  bool empty() const noexcept { return terms_.empty(); }

  double operator()(std::span<const double> x) const;

  /// Exact partial derivative with respect to x_m (term-by-term).
  double partial(std::size_t m, std::span<const double> x) const;

  /// Re-expands p(center - v) as a polynomial in v. Coefficients of like
  /// powers are merged; the constant term equals p(center).
  SparsePolynomial recentered(std::span<const double> center) const;

  double constant_term() const;
  void set_constant_term(double value);

  /// Largest total degree present.
  long degree() const;

 private:
  std::size_t dimension_ = 0;
  std::vector<Term> terms_;
};

/// x^j for a multi-index j.
double monomial(std::span<const double> x, const MultiIndex& j);

}  // namespace mbpi
