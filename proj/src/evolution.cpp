#include "rcps/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>

namespace rcps::evolution {

Population::Population(std::vector<StrategyId> members) : members_(std::move(members)) {
  if (members_.size() < 2) throw std::invalid_argument("population: needs at least 2 members");
}

Population Population::from_counts(std::span<const std::pair<StrategyId, std::size_t>> counts) {
  std::vector<StrategyId> members;
  for (const auto& [id, n] : counts) members.insert(members.end(), n, id);
  return Population(std::move(members));
}

std::size_t Population::count(StrategyId id) const {
  return static_cast<std::size_t>(std::count(members_.begin(), members_.end(), id));
}

bool Population::is_fixated() const {
  return std::all_of(members_.begin(), members_.end(),
                     [&](const StrategyId& s) { return s == members_.front(); });
}

namespace {

// Deterministic matches: group members by strategy and reuse one match per
// strategy pair. Yields the same totals as playing every pair.
std::vector<double> deterministic_fitness(const Population& pop, std::size_t match_stages,
                                          const PayoffMatrix& m, Rng& rng) {
  std::vector<StrategyId> kinds;
  std::vector<std::size_t> kind_of(pop.size());
  std::vector<double> kind_count;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    auto it = std::find(kinds.begin(), kinds.end(), pop[i]);
    if (it == kinds.end()) {
      kinds.push_back(pop[i]);
      kind_count.push_back(0.0);
      it = kinds.end() - 1;
    }
    kind_of[i] = static_cast<std::size_t>(it - kinds.begin());
    kind_count[kind_of[i]] += 1.0;
  }
  const std::size_t k = kinds.size();
  std::vector<double> score(k * k);  // score[a*k+b]: a's total against b
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      auto t = game::match_totals(kinds[a], kinds[b], match_stages, 0.0, m, rng);
      score[a * k + b] = t[0];
      score[b * k + a] = t[1];
    }
  }
  std::vector<double> per_kind(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) per_kind[a] += kind_count[b] * score[a * k + b];
    per_kind[a] -= score[a * k + a];  // no match against itself
  }
  std::vector<double> fitness(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) fitness[i] = per_kind[kind_of[i]];
  return fitness;
}

}  // namespace

std::vector<double> round_robin_fitness(const Population& pop, std::size_t match_stages,
                                        double noise, const PayoffMatrix& m, Rng& rng) {
  const bool stochastic =
      noise > 0.0 || std::any_of(pop.members().begin(), pop.members().end(),
                                 [](const StrategyId& s) { return s.is_random(); });
  std::vector<double> fitness;
  if (!stochastic) {
    fitness = deterministic_fitness(pop, match_stages, m, rng);
  } else {
    fitness.assign(pop.size(), 0.0);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      for (std::size_t j = i + 1; j < pop.size(); ++j) {
        auto t = game::match_totals(pop[i], pop[j], match_stages, noise, m, rng);
        fitness[i] += t[0];
        fitness[j] += t[1];
      }
    }
  }
  const double lowest = *std::min_element(fitness.begin(), fitness.end());
  if (lowest < 0.0) {
    for (double& f : fitness) f -= lowest;
  }
  return fitness;
}

Population moran_step(const Population& pop, std::span<const double> fitness, Rng& rng) {
  if (fitness.size() != pop.size()) {
    throw std::invalid_argument("moran_step: fitness length differs from population size");
  }
  double total = 0.0;
  for (double f : fitness) {
    if (!(f >= 0.0)) throw std::invalid_argument("moran_step: fitness must be non-negative");
    total += f;
  }
  const std::size_t n = pop.size();
  std::size_t parent = n - 1;
  if (total > 0.0) {
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += fitness[i];
      if (target < acc && fitness[i] > 0.0) {
        parent = i;
        break;
      }
    }
    // Rounding can leave target just past acc; fall back to the last positive.
    if (acc <= target) {
      while (fitness[parent] <= 0.0) --parent;
    }
  } else {
    parent = uniform_index(rng, n);
  }
  const std::size_t dying = uniform_index(rng, n);
  Population next = pop;
  next.members_[dying] = pop[parent];
  return next;
}

std::size_t MoranConfig::population_size() const {
  std::size_t n = 0;
  for (const auto& [id, c] : initial_counts) n += c;
  return n;
}

void MoranConfig::validate() const {
  if (initial_counts.empty()) throw std::invalid_argument("initial_counts: empty");
  for (std::size_t i = 0; i < initial_counts.size(); ++i) {
    for (std::size_t j = i + 1; j < initial_counts.size(); ++j) {
      if (initial_counts[i].first == initial_counts[j].first) {
        throw std::invalid_argument("initial_counts: duplicate strategy " +
                                    initial_counts[i].first.name());
      }
    }
  }
  if (population_size() < 2) throw std::invalid_argument("initial_counts: population must be >= 2");
  if (rounds_max < 1) throw std::invalid_argument("rounds_max: must be >= 1");
  if (match_stages < 1) throw std::invalid_argument("match_stages: must be >= 1");
  if (!(noise >= 0.0 && noise < 1.0)) throw std::invalid_argument("noise: must be in [0, 1)");
  if (replicates < 1) throw std::invalid_argument("replicates: must be >= 1");
}

std::optional<StrategyId> MoranTrace::winner() const {
  if (fixation) return fixation->winner;
  if (counts.empty()) return std::nullopt;
  const auto& last = counts.back();
  auto best = std::max_element(last.begin(), last.end());
  if (std::count(last.begin(), last.end(), *best) != 1) return std::nullopt;
  return strategies[static_cast<std::size_t>(best - last.begin())];
}

namespace {
std::vector<std::size_t> tally(const Population& pop, const std::vector<StrategyId>& columns) {
  std::vector<std::size_t> c(columns.size(), 0);
  for (const auto& s : pop.members()) {
    c[static_cast<std::size_t>(std::find(columns.begin(), columns.end(), s) - columns.begin())]++;
  }
  return c;
}
}  // namespace

MoranTrace run_moran_replicate(const MoranConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  MoranTrace trace;
  trace.seed = seed;
  for (const auto& [id, c] : cfg.initial_counts) trace.strategies.push_back(id);
  Population pop = Population::from_counts(cfg.initial_counts);
  trace.counts.push_back(tally(pop, trace.strategies));
  if (pop.is_fixated()) {
    trace.fixation = Fixation{pop[0], 0};
    return trace;
  }
  Rng rng(seed);
  for (std::size_t round = 1; round <= cfg.rounds_max; ++round) {
    auto fitness = round_robin_fitness(pop, cfg.match_stages, cfg.noise, cfg.matrix, rng);
    pop = moran_step(pop, fitness, rng);
    trace.counts.push_back(tally(pop, trace.strategies));
    if (pop.is_fixated()) {
      trace.fixation = Fixation{pop[0], round};
      break;
    }
  }
  return trace;
}

std::vector<MoranTrace> run_moran(const MoranConfig& cfg, unsigned threads) {
  cfg.validate();
  std::vector<MoranTrace> traces(cfg.replicates);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.replicates));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.replicates; r = next++) {
      traces[r] = run_moran_replicate(cfg, child_seed(cfg.seed, r));
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return traces;
}

MoranSummary summarize(std::span<const MoranTrace> traces) {
  MoranSummary s;
  s.replicates = traces.size();
  if (traces.empty()) return s;
  for (const auto& id : traces.front().strategies) s.winner_counts.emplace_back(id, 0);
  double fixation_rounds = 0.0;
  for (const auto& t : traces) {
    if (auto w = t.winner()) {
      for (auto& [id, c] : s.winner_counts) {
        if (id == *w) ++c;
      }
    }
    if (t.fixation) {
      ++s.fixated;
      fixation_rounds += static_cast<double>(t.fixation->round);
    }
  }
  if (s.fixated > 0) s.mean_fixation_round = fixation_rounds / static_cast<double>(s.fixated);
  return s;
}

}  // namespace rcps::evolution
