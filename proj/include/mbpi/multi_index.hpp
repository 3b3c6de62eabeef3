#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "mbpi/errors.hpp"

namespace mbpi {

/// A point of Z_+^n: a population state or an offspring/immigration offset.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::size_t n) : coords_(n, 0) {}
  MultiIndex(std::initializer_list<int> coords) : coords_(coords) { check(); }
  explicit MultiIndex(std::vector<int> coords) : coords_(std::move(coords)) { check(); }

  static MultiIndex unit(std::size_t n, std::size_t k) {
    MultiIndex e(n);
    e.coords_.at(k) = 1;
    return e;
  }

  std::size_t size() const noexcept { return coords_.size(); }
  int operator[](std::size_t k) const { return coords_[k]; }
  int& operator[](std::size_t k) { return coords_[k]; }
  const std::vector<int>& coords() const noexcept { return coords_; }

  /// |i| = sum of coordinates.
  long total() const { return std::accumulate(coords_.begin(), coords_.end(), 0L); }
  bool is_zero() const { return total() == 0; }

  /// Coordinatewise i <= j.
  bool dominated_by(const MultiIndex& other) const {
    for (std::size_t k = 0; k < coords_.size(); ++k) {
      if (coords_[k] > other.coords_[k]) return false;
    }
    return true;
  }

  MultiIndex operator+(const MultiIndex& other) const {
    MultiIndex r = *this;
    for (std::size_t k = 0; k < coords_.size(); ++k) r.coords_[k] += other.coords_[k];
    return r;
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t k = 0; k < coords_.size(); ++k) {
      if (k) s += ",";
      s += std::to_string(coords_[k]);
    }
    return s + ")";
  }

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;

 private:
  void check() const {
    for (int c : coords_) {
      if (c < 0) throw Error(ErrorCode::MalformedInput, "multi-index coordinates must be nonnegative");
    }
  }

  std::vector<int> coords_;
};

}  // namespace mbpi
