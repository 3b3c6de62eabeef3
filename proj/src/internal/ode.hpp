#pragma once

#include <functional>
#include <vector>

namespace mbpi::detail {

/// Right-hand side y' = f(x, y).
using OdeRhs = std::function<void(double x, const std::vector<double>& y, std::vector<double>& dy)>;

struct OdeOptions {
  double rtol = 1e-12;
  std::vector<double> atol;  // per component; empty means 1e-30 everywhere
  double initialStep = 0.0;  // 0 picks one from the derivative scale
  double minStep = 0.0;      // 0 means relative to x only
  long maxSteps = 2000000;
};

/// Dormand-Prince 5(4) with the standard 4th-order continuous extension.
/// Driven one accepted step at a time so callers can watch for events.
class Dopri5 {
 public:
  Dopri5(OdeRhs f, double x0, std::vector<double> y0, OdeOptions options = {});

  /// Takes one accepted step, never passing xEnd. Returns false when the
  /// step size underflows or the step budget is exhausted.
  bool step(double xEnd);

  double x() const noexcept { return x_; }
  const std::vector<double>& y() const noexcept { return y_; }
  const std::vector<double>& dydx() const noexcept { return k1_; }
  long steps() const noexcept { return steps_; }
  long rejected() const noexcept { return rejected_; }

  /// Interpolates the last accepted step, x in [previous_x(), x()].
  double previous_x() const noexcept { return xPrev_; }
  void dense(double x, std::vector<double>& out) const;
  double dense_component(double x, std::size_t i) const;

 private:
  double error_norm(const std::vector<double>& yNew, const std::vector<double>& err) const;

  OdeRhs f_;
  OdeOptions opt_;
  std::size_t n_;
  double x_;
  double xPrev_;
  double h_;
  double hLast_ = 0.0;
  std::vector<double> y_;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, yNew_, err_;
  std::vector<double> rc1_, rc2_, rc3_, rc4_, rc5_;
  long steps_ = 0;
  long rejected_ = 0;
};

}  // namespace mbpi::detail
