#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "mbpi/model.hpp"

namespace mbpi {

enum class CapKind { TotalDegree, PerCoordinate };

/// Generator restricted to a finite box of states. Jumps that would leave the
/// box are not dropped: their rate is collected in `leak`, an absorbing
/// overflow state. Killing (non-conservative diagonals) is folded into `leak` too.
struct TruncatedGenerator {
  std::size_t n = 0;
  CapKind capKind = CapKind::TotalDegree;
  int cap = 0;
  bool absorbing = false;
  std::vector<MultiIndex> states;
  Eigen::MatrixXd matrix;  // in-box rates, diagonal included
  Eigen::VectorXd leak;    // rate to the overflow state

  std::size_t size() const noexcept { return states.size(); }
  std::size_t index_of(const MultiIndex& state) const;
  bool contains(const MultiIndex& state) const;
  double max_exit_rate() const;

 private:
  friend TruncatedGenerator build_truncated(const ValidatedModel&, int, CapKind, long);
  std::map<MultiIndex, std::size_t> lookup_;
};

/// Enumerates all states within the cap. `initialTotal` is |i| of the largest
/// starting state the caller intends to use.
TruncatedGenerator build_truncated(const ValidatedModel& model, int cap, CapKind kind = CapKind::TotalDegree,
                                   long initialTotal = 0);

/// Transition probabilities on the box; leak(i) is the mass absorbed in the
/// overflow state by time t, so each row of P plus leak sums to 1.
struct TransitionMatrix {
  Eigen::MatrixXd p;
  Eigen::VectorXd leak;
  int squarings = 0;
  long terms = 0;
};

TransitionMatrix transition_matrix(const TruncatedGenerator& gen, double t);

struct TransitionRow {
  Eigen::VectorXd p;
  double leak = 0.0;
  long terms = 0;
};

/// Single row p_i.(t) by vector uniformization; cheap for large Lambda*t.
TransitionRow transition_row(const TruncatedGenerator& gen, const MultiIndex& i, double t);

struct StationaryResult {
  Eigen::VectorXd probabilities;  // indexed like gen.states
  double boundaryMass = 0.0;      // mass on states at the cap
  double leakFlux = 0.0;          // stationary rate of attempted escapes
  double errorBound = 0.0;
};

/// Solves x Q = 0, sum x = 1 with escaping jumps discarded (rows made conservative).
StationaryResult stationary_solve(const TruncatedGenerator& gen);

struct DecaySlope {
  double estimate = 0.0;  // -slope of log p_ii(t)
  std::vector<double> times;
  std::vector<double> logP;
  double maxLeak = 0.0;
};

DecaySlope decay_slope(const TruncatedGenerator& gen, const MultiIndex& i, double t1, double t2, int points = 16);

}  // namespace mbpi
