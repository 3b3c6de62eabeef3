#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "mbpi/model.hpp"

namespace mbpi {

/// xoshiro256** seeded through SplitMix64. One stream per (seed, index) pair.
class RandomStream {
 public:
  RandomStream(std::uint64_t masterSeed, std::uint64_t streamIndex);

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Exponential with the given rate (> 0).
  double exponential(double rate);

 private:
  std::uint64_t s_[4];
};

struct SimConfig {
  MultiIndex initial;
  double tMax = 100.0;
  std::uint64_t maxEvents = 10'000'000;
  std::size_t replicates = 1000;
  std::uint64_t masterSeed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

enum class OutcomeStatus { Absorbed, ReachedTMax, EventCapHit };
const char* to_string(OutcomeStatus s);

struct ReplicateOutcome {
  OutcomeStatus status = OutcomeStatus::ReachedTMax;
  double time = 0.0;   // absorption time, tMax, or time of the capping event
  MultiIndex state;    // state at `time`
  std::uint64_t eventCount = 0;
};

/// Called at t = 0 and after every jump.
using PathObserver = std::function<void(double time, const MultiIndex& state)>;

/// Exact event-by-event path of one replicate.
ReplicateOutcome simulate_path(const ValidatedModel& model, const SimConfig& config, std::uint64_t replicateIndex,
                               const PathObserver& observer = {});

/// All replicates, ordered by index; runs on config.threads worker threads.
std::vector<ReplicateOutcome> simulate_replicates(const ValidatedModel& model, const SimConfig& config);

struct Estimate {
  double value = 0.0;
  double standardError = 0.0;
  std::size_t replicatesUsed = 0;
  std::size_t censored = 0;  // reached tMax without the event of interest
  std::size_t capHits = 0;
};

/// Fraction of Absorbed outcomes.
Estimate extinction_fraction(const std::vector<ReplicateOutcome>& outcomes);
/// Mean absorption time over Absorbed outcomes; needs at least two of them.
Estimate mean_absorption_time(const std::vector<ReplicateOutcome>& outcomes);

Estimate estimate_extinction(const ValidatedModel& model, const SimConfig& config);
Estimate estimate_mean_extinction_time(const ValidatedModel& model, const SimConfig& config);

/// Empirical law of the state at time t from config.initial; counts sum to
/// config.replicates. Capped replicates are counted under `capHits`.
struct EmpiricalLaw {
  std::map<MultiIndex, std::size_t> counts;
  std::size_t replicates = 0;
  std::size_t capHits = 0;
};
EmpiricalLaw empirical_law(const ValidatedModel& model, double t, const SimConfig& config);

Estimate estimate_transition(const ValidatedModel& model, const MultiIndex& from, const MultiIndex& to, double t,
                             const SimConfig& config);

struct BranchingLeg {
  MultiIndex from;
  Estimate estimate;  // p_{from,0}(t)
};

struct BranchingPropertyReport {
  MultiIndex start;
  double t = 0.0;
  std::vector<BranchingLeg> legs;  // start, 0, then e_k with start_k > 0
  double predicted = 0.0;          // product form built from the 0 and e_k legs
  double residual = 0.0;           // log observed - log predicted
  double standardError = 0.0;      // delta method on logs
  bool pass = true;
};

/// Product-form check for p_{i0}(t) on independent replicate sets per leg.
BranchingPropertyReport branching_property_check(const ValidatedModel& model, const MultiIndex& start, double t,
                                                 const SimConfig& config);

struct EquilibriumEstimate {
  std::map<MultiIndex, double> frequencies;
  double horizon = 0.0;  // time actually observed after burn-in
  std::uint64_t events = 0;
  bool capHit = false;
};

/// Time-weighted occupation of one path over [burnIn, burnIn + config.tMax].
EquilibriumEstimate estimate_equilibrium(const ValidatedModel& model, const SimConfig& config, double burnIn);

/// replicate,time,x_1..x_n rows (CRLF) for the first `replicates` paths.
void write_paths_csv(const ValidatedModel& model, const SimConfig& config, std::size_t replicates, std::ostream& out);

}  // namespace mbpi
