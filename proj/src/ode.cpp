#include "internal/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mbpi::detail {

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace

Dopri5::Dopri5(OdeRhs f, double x0, std::vector<double> y0, OdeOptions options)
    : f_(std::move(f)), opt_(std::move(options)), n_(y0.size()), x_(x0), xPrev_(x0), y_(std::move(y0)) {
  if (opt_.atol.empty()) opt_.atol.assign(n_, 1e-30);
  for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &yNew_, &err_, &rc1_, &rc2_, &rc3_, &rc4_, &rc5_})
    v->assign(n_, 0.0);
  f_(x_, y_, k1_);
  if (opt_.initialStep > 0.0) {
    h_ = opt_.initialStep;
  } else {
    // Shortest time scale |y|/|y'| over components that already carry a value.
    double scale = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_; ++i) {
      if (y_[i] != 0.0 && k1_[i] != 0.0) scale = std::min(scale, std::abs(y_[i] / k1_[i]));
    }
    h_ = std::isfinite(scale) ? 1e-3 * scale : 1e-3;
  }
  rc1_ = y_;
}

double Dopri5::error_norm(const std::vector<double>& yNew, const std::vector<double>& err) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double sc = opt_.atol[i] + opt_.rtol * std::max(std::abs(y_[i]), std::abs(yNew[i]));
    const double r = err[i] / sc;
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(n_));
}

bool Dopri5::step(double xEnd) {
  const double eps = std::numeric_limits<double>::epsilon();
  while (true) {
    if (steps_ + rejected_ >= opt_.maxSteps) return false;
    double h = std::min(h_, xEnd - x_);
    const double hMin = std::max(opt_.minStep, 16.0 * eps * std::abs(x_));
    if (!(h > hMin) && xEnd - x_ > hMin) return false;
    if (!(h > 0.0)) return false;

    auto stage = [&](std::vector<double>& out, double cx, std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
      for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (const auto& [a, k] : terms) s += a * (*k)[i];
        tmp_[i] = y_[i] + h * s;
      }
      f_(x_ + cx * h, tmp_, out);
    };
    stage(k2_, c2, {{a21, &k1_}});
    stage(k3_, c3, {{a31, &k1_}, {a32, &k2_}});
    stage(k4_, c4, {{a41, &k1_}, {a42, &k2_}, {a43, &k3_}});
    stage(k5_, c5, {{a51, &k1_}, {a52, &k2_}, {a53, &k3_}, {a54, &k4_}});
    stage(k6_, 1.0, {{a61, &k1_}, {a62, &k2_}, {a63, &k3_}, {a64, &k4_}, {a65, &k5_}});
    for (std::size_t i = 0; i < n_; ++i)
      yNew_[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
    f_(x_ + h, yNew_, k7_);
    for (std::size_t i = 0; i < n_; ++i)
      err_[i] = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);

    bool finite = true;
    for (std::size_t i = 0; i < n_; ++i) finite = finite && std::isfinite(yNew_[i]) && std::isfinite(k7_[i]);
    const double err = finite ? error_norm(yNew_, err_) : std::numeric_limits<double>::infinity();
    if (err <= 1.0) {
      for (std::size_t i = 0; i < n_; ++i) {
        const double ydiff = yNew_[i] - y_[i];
        const double bspl = h * k1_[i] - ydiff;
        rc1_[i] = y_[i];
        rc2_[i] = ydiff;
        rc3_[i] = bspl;
        rc4_[i] = ydiff - h * k7_[i] - bspl;
        rc5_[i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] + d7 * k7_[i]);
      }
      xPrev_ = x_;
      hLast_ = h;
      x_ = (h == xEnd - x_) ? xEnd : x_ + h;
      y_.swap(yNew_);
      k1_.swap(k7_);
      ++steps_;
      const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      h_ = h * std::clamp(fac, 0.2, 5.0);
      return true;
    }
    ++rejected_;
    const double fac = std::isfinite(err) ? 0.9 * std::pow(err, -0.2) : 0.1;
    h_ = h * std::clamp(fac, 0.1, 0.9);
  }
}

double Dopri5::dense_component(double x, std::size_t i) const {
  if (hLast_ == 0.0) return y_[i];
  const double th = (x - xPrev_) / hLast_;
  const double th1 = 1.0 - th;
  return rc1_[i] + th * (rc2_[i] + th1 * (rc3_[i] + th * (rc4_[i] + th1 * rc5_[i])));
}

void Dopri5::dense(double x, std::vector<double>& out) const {
  out.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = dense_component(x, i);
}

}  // namespace mbpi::detail
