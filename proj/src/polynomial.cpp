#include "mbpi/polynomial.hpp"

#include <cmath>
#include <map>

namespace mbpi {

namespace {

double ipow(double x, int e) {
  double r = 1.0;
  double b = x;
  while (e > 0) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

SparsePolynomial::SparsePolynomial(std::size_t dimension, std::vector<Term> terms)
    : dimension_(dimension), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (t.exponent.size() != dimension_) {
      throw Error(ErrorCode::DimensionMismatch, "polynomial term has wrong dimension");
    }
  }
}

double monomial(std::span<const double> x, const MultiIndex& j) {
  double r = 1.0;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (j[k] != 0) r *= ipow(x[k], j[k]);
  }
  return r;
}

double SparsePolynomial::operator()(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.coefficient * monomial(x, t.exponent);
  return s;
}

double SparsePolynomial::partial(std::size_t m, std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    const int e = t.exponent[m];
    if (e == 0) continue;
    double r = t.coefficient * e;
    for (std::size_t k = 0; k < dimension_; ++k) {
      const int p = (k == m) ? e - 1 : t.exponent[k];
      if (p != 0) r *= ipow(x[k], p);
    }
    s += r;
  }
  return s;
}

SparsePolynomial SparsePolynomial::recentered(std::span<const double> center) const {
  // (c - v)^j = sum_{a <= j} C(j,a) c^{j-a} (-1)^{|a|} v^a, coordinatewise.
  std::map<std::vector<int>, double> acc;
  for (const auto& t : terms_) {
    std::vector<int> a(dimension_, 0);
    while (true) {
      double coef = t.coefficient;
      long sign_count = 0;
      for (std::size_t k = 0; k < dimension_; ++k) {
        const int j = t.exponent[k];
        coef *= binomial(j, a[k]) * ipow(center[k], j - a[k]);
        sign_count += a[k];
      }
      if (sign_count % 2) coef = -coef;
      acc[a] += coef;
      // odometer over a <= exponent
      std::size_t k = 0;
      while (k < dimension_) {
        if (a[k] < t.exponent[k]) {
          ++a[k];
          break;
        }
        a[k] = 0;
        ++k;
      }
      if (k == dimension_) break;
    }
  }
  std::vector<Term> out;
  out.reserve(acc.size());
  for (auto& [e, c] : acc) {
    if (c != 0.0) out.push_back({MultiIndex(e), c});
  }
  return SparsePolynomial(dimension_, std::move(out));
}

double SparsePolynomial::constant_term() const {
  for (const auto& t : terms_) {
    if (t.exponent.is_zero()) return t.coefficient;
  }
  return 0.0;
}

void SparsePolynomial::set_constant_term(double value) {
  for (auto it = terms_.begin(); it != terms_.end(); ++it) {
    if (it->exponent.is_zero()) {
      if (value == 0.0) {
        terms_.erase(it);
      } else {
        it->coefficient = value;
      }
      return;
    }
  }
  if (value != 0.0) terms_.push_back({MultiIndex(dimension_), value});
}

long SparsePolynomial::degree() const {
  long d = 0;
  for (const auto& t : terms_) d = std::max(d, t.exponent.total());
  return d;
}

}  // namespace mbpi
