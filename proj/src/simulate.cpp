#include "mbpi/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "mbpi/classify.hpp"

namespace mbpi {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// Seed for an independent batch of replicates (e.g. one leg of a check).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (salt + 1));
  return splitmix64(s);
}

// Offsets of one rate family drawn proportionally to their rates. Cumulative
// search for small supports, Vose alias tables above 64 entries.
class OffsetSampler {
 public:
  OffsetSampler() = default;
  explicit OffsetSampler(const RateDistribution& d) {
    for (const auto& e : d.entries) {
      offsets_.push_back(e.offset);
      weights_.push_back(e.rate);
      total_ += e.rate;
    }
    if (offsets_.size() > 64) {
      build_alias();
    } else {
      double acc = 0.0;
      for (double w : weights_) cumulative_.push_back(acc += w);
    }
  }

  double total() const { return total_; }

  const MultiIndex& draw(RandomStream& rng) const {
    if (!alias_.empty()) {
      const double x = rng.uniform() * static_cast<double>(offsets_.size());
      std::size_t slot = std::min(static_cast<std::size_t>(x), offsets_.size() - 1);
      return offsets_[(x - static_cast<double>(slot)) < prob_[slot] ? slot : alias_[slot]];
    }
    const double x = rng.uniform() * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    std::size_t k = static_cast<std::size_t>(it - cumulative_.begin());
    return offsets_[std::min(k, offsets_.size() - 1)];
  }

 private:
  void build_alias() {
    const std::size_t m = offsets_.size();
    prob_.assign(m, 0.0);
    alias_.assign(m, 0);
    std::vector<double> scaled(m);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < m; ++i) {
      scaled[i] = weights_[i] * static_cast<double>(m) / total_;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back(), l = large.back();
      small.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob_[i] = 1.0;
    for (std::size_t i : small) prob_[i] = 1.0;
  }

  std::vector<MultiIndex> offsets_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
  double total_ = 0.0;
};

struct EventTables {
  std::vector<OffsetSampler> branch;
  OffsetSampler immigration;
  OffsetSampler resurrection;
  bool absorbing = true;
};

EventTables make_tables(const ValidatedModel& model) {
  if (!model.branching_conservative() || !model.immigration_conservative() ||
      (!model.absorbing() && !model.resurrection_conservative())) {
    throw Error(ErrorCode::NonConservativeModel, "simulation needs conservative rate families");
  }
  EventTables t;
  for (const auto& b : model.spec().branch) t.branch.emplace_back(b);
  t.immigration = OffsetSampler(model.spec().immigration);
  t.absorbing = model.absorbing();
  if (const RateDistribution* h = model.resurrection_distribution()) t.resurrection = OffsetSampler(*h);
  return t;
}

void check_config(const ValidatedModel& model, const SimConfig& c) {
  if (c.initial.size() != model.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "initial state has wrong dimension");
  }
  if (!(c.tMax > 0.0) || c.replicates < 1 || c.maxEvents < 1) {
    throw Error(ErrorCode::InvalidArgument, "need tMax > 0, replicates >= 1 and maxEvents >= 1");
  }
}

ReplicateOutcome run_path(const EventTables& tables, const SimConfig& config, std::uint64_t index,
                          const PathObserver& observer) {
  RandomStream rng(config.masterSeed, index);
  const std::size_t n = tables.branch.size();
  ReplicateOutcome out;
  MultiIndex state = config.initial;
  double t = 0.0;
  if (observer) observer(t, state);
  while (true) {
    const bool empty = state.is_zero();
    if (empty && tables.absorbing) {
      out.status = OutcomeStatus::Absorbed;
      break;
    }
    double rate = 0.0;
    if (empty) {
      rate = tables.resurrection.total();
    } else {
      for (std::size_t k = 0; k < n; ++k) rate += state[k] * tables.branch[k].total();
      rate += tables.immigration.total();
    }
    const double dt = rng.exponential(rate);
    if (!(t + dt <= config.tMax)) {
      t = config.tMax;
      out.status = OutcomeStatus::ReachedTMax;
      break;
    }
    if (out.eventCount >= config.maxEvents) {
      out.status = OutcomeStatus::EventCapHit;
      break;
    }
    t += dt;
    ++out.eventCount;
    if (empty) {
      state = state + tables.resurrection.draw(rng);
    } else {
      double x = rng.uniform() * rate;
      std::size_t k = 0;
      for (; k < n; ++k) {
        const double w = state[k] * tables.branch[k].total();
        if (x < w && state[k] > 0) break;
        x -= w;
      }
      if (k < n) {
        state[k] -= 1;
        state = state + tables.branch[k].draw(rng);
      } else {
        state = state + tables.immigration.draw(rng);
      }
    }
    if (observer) observer(t, state);
  }
  out.time = t;
  out.state = std::move(state);
  return out;
}

template <class F>
void for_each_index(std::size_t count, unsigned threads, F&& body) {
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

Estimate proportion(std::size_t hits, std::size_t total) {
  Estimate e;
  e.replicatesUsed = total;
  e.value = static_cast<double>(hits) / static_cast<double>(total);
  e.standardError = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(total));
  return e;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t masterSeed, std::uint64_t streamIndex) {
  std::uint64_t sm = masterSeed;
  const std::uint64_t key = splitmix64(sm);
  std::uint64_t state = key ^ (streamIndex * 0xbf58476d1ce4e5b9ULL + 0x632be59bd9b4e019ULL);
  for (auto& w : s_) w = splitmix64(state);
}

std::uint64_t RandomStream::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RandomStream::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double RandomStream::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

const char* to_string(OutcomeStatus s) {
  switch (s) {
    case OutcomeStatus::Absorbed: return "Absorbed";
    case OutcomeStatus::ReachedTMax: return "ReachedTMax";
    case OutcomeStatus::EventCapHit: return "EventCapHit";
  }
  return "?";
}

ReplicateOutcome simulate_path(const ValidatedModel& model, const SimConfig& config, std::uint64_t replicateIndex,
                               const PathObserver& observer) {
  check_config(model, config);
  return run_path(make_tables(model), config, replicateIndex, observer);
}

std::vector<ReplicateOutcome> simulate_replicates(const ValidatedModel& model, const SimConfig& config) {
  check_config(model, config);
  const EventTables tables = make_tables(model);
  std::vector<ReplicateOutcome> out(config.replicates);
  for_each_index(config.replicates, config.threads,
                 [&](std::size_t i) { out[i] = run_path(tables, config, i, {}); });
  return out;
}

Estimate extinction_fraction(const std::vector<ReplicateOutcome>& outcomes) {
  if (outcomes.empty()) throw Error(ErrorCode::DegenerateEstimate, "no replicates");
  std::size_t absorbed = 0, capped = 0;
  for (const auto& o : outcomes) {
    absorbed += o.status == OutcomeStatus::Absorbed;
    capped += o.status == OutcomeStatus::EventCapHit;
  }
  Estimate e = proportion(absorbed, outcomes.size());
  e.capHits = capped;
  e.censored = outcomes.size() - absorbed;
  return e;
}

Estimate mean_absorption_time(const std::vector<ReplicateOutcome>& outcomes) {
  double sum = 0.0, sumSq = 0.0;
  std::size_t used = 0, capped = 0;
  for (const auto& o : outcomes) {
    if (o.status == OutcomeStatus::Absorbed) {
      sum += o.time;
      sumSq += o.time * o.time;
      ++used;
    }
    capped += o.status == OutcomeStatus::EventCapHit;
  }
  if (used < 2) throw Error(ErrorCode::DegenerateEstimate, "fewer than two absorbed replicates");
  Estimate e;
  e.replicatesUsed = used;
  e.censored = outcomes.size() - used;
  e.capHits = capped;
  e.value = sum / static_cast<double>(used);
  const double var = std::max(0.0, (sumSq - used * e.value * e.value) / static_cast<double>(used - 1));
  e.standardError = std::sqrt(var / static_cast<double>(used));
  return e;
}

Estimate estimate_extinction(const ValidatedModel& model, const SimConfig& config) {
  if (!model.absorbing()) throw Error(ErrorCode::WrongEncoding, "extinction estimate needs an absorbing model");
  return extinction_fraction(simulate_replicates(model, config));
}

Estimate estimate_mean_extinction_time(const ValidatedModel& model, const SimConfig& config) {
  if (!model.absorbing()) throw Error(ErrorCode::WrongEncoding, "mean extinction time needs an absorbing model");
  if (config.initial.is_zero()) throw Error(ErrorCode::InvalidArgument, "initial state must be nonzero");
  return mean_absorption_time(simulate_replicates(model, config));
}

EmpiricalLaw empirical_law(const ValidatedModel& model, double t, const SimConfig& config) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "time must be nonnegative");
  EmpiricalLaw law;
  law.replicates = config.replicates;
  if (t == 0.0) {
    check_config(model, SimConfig{config.initial, 1.0, config.maxEvents, config.replicates, config.masterSeed});
    make_tables(model);
    law.counts[config.initial] = config.replicates;
    return law;
  }
  SimConfig c = config;
  c.tMax = t;
  for (const auto& o : simulate_replicates(model, c)) {
    if (o.status == OutcomeStatus::EventCapHit) {
      ++law.capHits;
    } else {
      ++law.counts[o.state];
    }
  }
  return law;
}

Estimate estimate_transition(const ValidatedModel& model, const MultiIndex& from, const MultiIndex& to, double t,
                             const SimConfig& config) {
  if (to.size() != model.dimension()) throw Error(ErrorCode::DimensionMismatch, "target state has wrong dimension");
  SimConfig c = config;
  c.initial = from;
  const EmpiricalLaw law = empirical_law(model, t, c);
  auto it = law.counts.find(to);
  Estimate e = proportion(it == law.counts.end() ? 0 : it->second, law.replicates);
  e.capHits = law.capHits;
  return e;
}

BranchingPropertyReport branching_property_check(const ValidatedModel& model, const MultiIndex& start, double t,
                                                 const SimConfig& config) {
  if (!model.resurrection_is_immigration()) {
    throw Error(ErrorCode::WrongEncoding, "product-form check needs resurrection equal to immigration");
  }
  const std::size_t n = model.dimension();
  if (start.size() != n) throw Error(ErrorCode::DimensionMismatch, "start state has wrong dimension");
  if (start.total() < 1) throw Error(ErrorCode::InvalidArgument, "start state must be nonzero");

  BranchingPropertyReport rep;
  rep.start = start;
  rep.t = t;
  std::uint64_t salt = 0;
  auto leg = [&](const MultiIndex& from) {
    SimConfig c = config;
    c.masterSeed = derive_seed(config.masterSeed, salt++);
    BranchingLeg l{from, estimate_transition(model, from, MultiIndex(n), t, c)};
    if (!(l.estimate.value > 0.0)) {
      throw Error(ErrorCode::DegenerateEstimate, "estimate of p_{" + from.to_string() + ",0} is zero");
    }
    rep.legs.push_back(l);
    return l.estimate;
  };
  auto log_var = [](const Estimate& e) {
    return (1.0 - e.value) / (static_cast<double>(e.replicatesUsed) * e.value);
  };

  const Estimate observed = leg(start);
  if (start.total() == 1) {
    // The identity is trivial for a single particle.
    rep.predicted = observed.value;
    return rep;
  }
  const Estimate empty = leg(MultiIndex(n));
  const double total = static_cast<double>(start.total());
  double logPredicted = (1.0 - total) * std::log(empty.value);
  double var = log_var(observed) + (1.0 - total) * (1.0 - total) * log_var(empty);
  for (std::size_t k = 0; k < n; ++k) {
    if (start[k] == 0) continue;
    const Estimate single = leg(MultiIndex::unit(n, k));
    logPredicted += start[k] * std::log(single.value);
    var += static_cast<double>(start[k]) * start[k] * log_var(single);
  }
  rep.predicted = std::exp(logPredicted);
  rep.residual = std::log(observed.value) - logPredicted;
  rep.standardError = std::sqrt(var);
  rep.pass = std::abs(rep.residual) <= 3.0 * rep.standardError;
  return rep;
}

EquilibriumEstimate estimate_equilibrium(const ValidatedModel& model, const SimConfig& config, double burnIn) {
  if (model.absorbing()) throw Error(ErrorCode::NotErgodic, "absorbing model has no equilibrium");
  if (classify(model).ergodicity != Ergodicity::Ergodic) {
    throw Error(ErrorCode::NotErgodic, "model is not classified Ergodic");
  }
  if (!(burnIn >= 0.0)) throw Error(ErrorCode::InvalidArgument, "burn-in must be nonnegative");
  SimConfig c = config;
  c.tMax = burnIn + config.tMax;
  EquilibriumEstimate est;
  double lastT = 0.0;
  MultiIndex last = config.initial;
  auto add = [&](double upTo) {
    const double lo = std::max(lastT, burnIn);
    if (upTo > lo) est.frequencies[last] += upTo - lo;
  };
  const ReplicateOutcome o = simulate_path(model, c, 0, [&](double t, const MultiIndex& s) {
    add(t);
    lastT = t;
    last = s;
  });
  add(o.time);
  est.events = o.eventCount;
  est.capHit = o.status == OutcomeStatus::EventCapHit;
  est.horizon = std::max(0.0, o.time - burnIn);
  double weight = 0.0;
  for (const auto& [s, w] : est.frequencies) weight += w;
  if (!(weight > 0.0)) throw Error(ErrorCode::DegenerateEstimate, "no time observed after burn-in");
  for (auto& [s, w] : est.frequencies) w /= weight;
  return est;
}

void write_paths_csv(const ValidatedModel& model, const SimConfig& config, std::size_t replicates,
                     std::ostream& out) {
  const std::size_t n = model.dimension();
  out << "replicate,time";
  for (std::size_t k = 1; k <= n; ++k) out << ",x" << k;
  out << "\r\n";
  const auto precision = out.precision(17);
  for (std::size_t r = 0; r < replicates; ++r) {
    simulate_path(model, config, r, [&](double t, const MultiIndex& s) {
      out << r << ',' << t;
      for (std::size_t k = 0; k < n; ++k) out << ',' << s[k];
      out << "\r\n";
    });
  }
  out.precision(precision);
}

}  // namespace mbpi
