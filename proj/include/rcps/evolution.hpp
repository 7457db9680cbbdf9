#ifndef RCPS_EVOLUTION_HPP
#define RCPS_EVOLUTION_HPP

// Constant-size Moran birth-death process over a population of repeated-game
// strategies. Fitness is the undiscounted round-robin total.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rcps/game.hpp"
#include "rcps/random.hpp"

namespace rcps::evolution {

using game::PayoffMatrix;
using game::StrategyId;

class Population {
 public:
  // Throws std::invalid_argument if fewer than two members.
  explicit Population(std::vector<StrategyId> members);
  // Members laid out in the given order, count by count.
  static Population from_counts(std::span<const std::pair<StrategyId, std::size_t>> counts);

  std::size_t size() const { return members_.size(); }
  const std::vector<StrategyId>& members() const { return members_; }
  const StrategyId& operator[](std::size_t i) const { return members_[i]; }

  std::size_t count(StrategyId id) const;
  bool is_fixated() const;

  friend bool operator==(const Population&, const Population&) = default;

 private:
  friend Population moran_step(const Population&, std::span<const double>, Rng&);
  std::vector<StrategyId> members_;
};

// Every unordered pair of members plays one match of `match_stages` stages.
// Member fitness is its total score over its N-1 matches, shifted so that the
// minimum is non-negative. Matches are drawn from rng in (i, j), i < j order.
std::vector<double> round_robin_fitness(const Population& pop, std::size_t match_stages,
                                        double noise, const PayoffMatrix& m, Rng& rng);

// One birth-death event: the parent is drawn proportionally to fitness (birth
// is uniform when every fitness is zero), the dying member uniformly, and the
// dead slot receives a copy of the parent. The two may coincide.
// Throws std::invalid_argument on a length mismatch or negative fitness.
Population moran_step(const Population& pop, std::span<const double> fitness, Rng& rng);

struct MoranConfig {
  std::vector<std::pair<StrategyId, std::size_t>> initial_counts;
  std::size_t rounds_max = 1000;
  std::size_t match_stages = 100;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::size_t replicates = 1;
  PayoffMatrix matrix = PayoffMatrix::standard();

  std::size_t population_size() const;
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Fixation {
  StrategyId winner;
  std::size_t round;
};

struct MoranTrace {
  std::vector<StrategyId> strategies;         // column order, from initial_counts
  std::vector<std::vector<std::size_t>> counts;  // counts[round][column], round 0 = initial
  std::optional<Fixation> fixation;
  std::uint64_t seed = 0;

  std::size_t rounds() const { return counts.empty() ? 0 : counts.size() - 1; }
  // Fixated strategy, otherwise the strict majority in the last round.
  std::optional<StrategyId> winner() const;
};

// Runs one replicate from an explicit seed.
MoranTrace run_moran_replicate(const MoranConfig& cfg, std::uint64_t seed);

// Replicate r runs from child_seed(cfg.seed, r). Replicates are spread over
// `threads` workers (0 = hardware concurrency); output order is by replicate.
std::vector<MoranTrace> run_moran(const MoranConfig& cfg, unsigned threads = 0);

struct MoranSummary {
  std::size_t replicates = 0;
  std::vector<std::pair<StrategyId, std::size_t>> winner_counts;  // column order
  std::size_t fixated = 0;
  std::optional<double> mean_fixation_round;
};

MoranSummary summarize(std::span<const MoranTrace> traces);

}  // namespace rcps::evolution

#endif  // RCPS_EVOLUTION_HPP
