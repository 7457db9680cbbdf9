#ifndef RCPS_GAME_HPP
#define RCPS_GAME_HPP

// Two-player Prisoner's Dilemma: stage game, strategy state machines, noisy
// repeated matches, discounted payoff accounting and the closed-form
// cooperation analysis for a single all-defect deviation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rcps/random.hpp"

namespace rcps::game {

enum class Action : std::uint8_t { Cooperate, Defect };

// "C" / "D"
char to_char(Action a);
std::optional<Action> action_from_char(char c);
inline Action flip(Action a) {
  return a == Action::Cooperate ? Action::Defect : Action::Cooperate;
}

// Stage-game rewards. Construction enforces T > R > P > S and 2R > T + S.
class PayoffMatrix {
 public:
  PayoffMatrix(double temptation, double reward, double punishment, double sucker);
  // T=5, R=3, P=1, S=0
  static PayoffMatrix standard() { return {5.0, 3.0, 1.0, 0.0}; }

  double temptation() const { return t_; }
  double reward() const { return r_; }
  double punishment() const { return p_; }
  double sucker() const { return s_; }

  // Payoff of the player choosing `own` against `other`.
  double payoff(Action own, Action other) const;

  friend bool operator==(const PayoffMatrix&, const PayoffMatrix&) = default;

 private:
  double t_, r_, p_, s_;
};

std::pair<double, double> stage_payoffs(Action a1, Action a2, const PayoffMatrix& m);

class StrategyId {
 public:
  enum class Kind : std::uint8_t {
    AllCooperate,
    AllDefect,
    GrimTrigger,
    TitForTat,
    TitForTwoTats,
    RandomCoin
  };

  constexpr StrategyId(Kind kind = Kind::AllCooperate) : kind_(kind) {}  // NOLINT
  // Throws std::invalid_argument unless p is in [0, 1].
  static StrategyId random_coin(double p);

  Kind kind() const { return kind_; }
  // Cooperation probability; meaningful for RandomCoin only.
  double probability() const { return p_; }
  bool is_random() const { return kind_ == Kind::RandomCoin; }

  // Short CLI name: allc, alld, grim, tft, tf2t, random:<p>
  std::string name() const;
  // Inverse of name(). Throws std::invalid_argument listing the valid names.
  static StrategyId parse(std::string_view name);
  static std::string valid_names();

  friend bool operator==(const StrategyId&, const StrategyId&) = default;
  friend auto operator<=>(const StrategyId&, const StrategyId&) = default;

 private:
  Kind kind_;
  double p_ = 0.0;
};

inline constexpr StrategyId kAllCooperate{StrategyId::Kind::AllCooperate};
inline constexpr StrategyId kAllDefect{StrategyId::Kind::AllDefect};
inline constexpr StrategyId kGrimTrigger{StrategyId::Kind::GrimTrigger};
inline constexpr StrategyId kTitForTat{StrategyId::Kind::TitForTat};
inline constexpr StrategyId kTitForTwoTats{StrategyId::Kind::TitForTwoTats};

// Per-player memory. Only the fields used by `id` ever leave their neutral
// value. `observed` counts the opponent actions folded in so far.
struct StrategyState {
  StrategyId id;
  bool triggered = false;                       // GrimTrigger
  std::uint8_t recent_opponent_defections = 0;  // TitForTwoTats, saturates at 2
  std::optional<Action> last_opponent_action;   // TitForTat
  std::size_t observed = 0;

  explicit StrategyState(StrategyId strategy = {}) : id(strategy) {}
  friend bool operator==(const StrategyState&, const StrategyState&) = default;
};

// Folds one realized opponent action into the state.
void observe(StrategyState& state, Action opponent);

// Action for the coming stage given an up-to-date state. Draws from rng only
// for RandomCoin.
Action decide(const StrategyState& state, Rng& rng);

// Folds the unseen tail of `opponent_history` (realized actions, stage order)
// and returns the action together with the updated state. A history shorter
// than what the state has already seen is replayed from scratch.
std::pair<Action, StrategyState> next_action(const StrategyState& state,
                                             std::span<const Action> opponent_history, Rng& rng);

struct StageRecord {
  std::size_t stage;  // 1-based
  std::array<Action, 2> intended;
  std::array<Action, 2> realized;
  std::array<double, 2> payoffs;
};

struct MatchTrace {
  std::vector<StageRecord> stages;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

// Repeated match. Every intended action is flipped independently with
// probability `noise`; both players observe only the realized actions.
// Throws std::invalid_argument if stages == 0 or noise is outside [0, 1).
MatchTrace play_match(StrategyId s1, StrategyId s2, std::size_t stages, double noise,
                      std::uint64_t seed, const PayoffMatrix& m = PayoffMatrix::standard());

// Undiscounted totals of a match drawn from `rng`; same dynamics as
// play_match without recording the trace.
std::array<double, 2> match_totals(StrategyId s1, StrategyId s2, std::size_t stages, double noise,
                                   const PayoffMatrix& m, Rng& rng);

struct DiscountSeries {
  double delta = 0.0;
  // cumulative[player][n-1] = sum_{t<=n} delta^(t-1) * payoff_t
  std::array<std::vector<double>, 2> cumulative;
};

// Throws std::invalid_argument unless delta is in [0, 1).
DiscountSeries discounted_series(const MatchTrace& trace, double delta);

struct StreamValues {
  double coop_total;
  double deviation_total;
};

// Punishers supported by the deviation analysis.
bool is_punisher(StrategyId id);

// Stage-t payoff (t >= 1) of an all-defect deviator facing `punisher`.
double deviation_payoff(const PayoffMatrix& m, StrategyId punisher, std::size_t stage);

// Infinite-horizon discounted totals of the cooperative path and of an
// all-defect deviation against `punisher`.
StreamValues stream_values(const PayoffMatrix& m, double delta, StrategyId punisher);

// Smallest delta with coop_total >= deviation_total, in closed form.
double cooperation_threshold(const PayoffMatrix& m, StrategyId punisher);

// Same threshold located by bisection on stream_values.
double bisect_cooperation_threshold(const PayoffMatrix& m, StrategyId punisher,
                                    double tolerance = 1e-12);

// Finite-horizon partial sums of both streams, n = 1..stages.
struct PartialSums {
  std::vector<double> coop;
  std::vector<double> deviation;
};
PartialSums stream_partial_sums(const PayoffMatrix& m, double delta, StrategyId punisher,
                                std::size_t stages);

// First stage n <= max_stages where the cumulative cooperative payoff
// catches the cumulative deviation payoff.
std::optional<std::size_t> crossover_stage(const PayoffMatrix& m, double delta,
                                           StrategyId punisher, std::size_t max_stages);

}  // namespace rcps::game

#endif  // RCPS_GAME_HPP
