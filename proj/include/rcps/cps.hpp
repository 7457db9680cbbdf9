#ifndef RCPS_CPS_HPP
#define RCPS_CPS_HPP

// Slot-based simulation of a software-defined CPS managed by NFV agents.
//
// Each slot follows the controller message cycle: the controller polls the
// data plane (StatusReport), relays classified events to the agents
// (EventReport), every agent updates its EWMA status estimate and decides
// (AgentProcessing), decisions go back to the controller (DecisionMsg), and
// the controller installs flow rules when someone acted (FlowRule).
//
// An agent whose estimate drops to the threshold or below plays the
// cooperate/defect game. Cooperating agents run the recovery routine with
// probability coin_p; every executed recovery costs `recovery_cost` and
// scales the next slot's bad-event probability by (1 - mitigation).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rcps/game.hpp"
#include "rcps/random.hpp"

namespace rcps::cps {

using game::Action;
using game::PayoffMatrix;
using game::StrategyId;

// Configuration problem tied to one named field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Bad-event probability p_bad applies to slots in [start, end).
struct ThreatWindow {
  std::size_t start = 0;
  std::size_t end = 0;
  double p_bad = 0.0;
  friend bool operator==(const ThreatWindow&, const ThreatWindow&) = default;
};

class ThreatSchedule {
 public:
  ThreatSchedule() = default;
  // Throws ConfigError("threat_windows", ...) on empty, overlapping or
  // out-of-range windows.
  explicit ThreatSchedule(std::vector<ThreatWindow> windows);

  double p_bad(std::size_t slot) const;
  const std::vector<ThreatWindow>& windows() const { return windows_; }
  // First slot after the last window, 0 if there are none.
  std::size_t quiet_from() const;

 private:
  std::vector<ThreatWindow> windows_;  // sorted by start
};

struct EventBatch {
  std::size_t slot = 0;
  std::size_t good = 0;
  std::size_t total = 0;
};

struct AgentState {
  std::size_t id = 0;
  double alpha = 0.8;
  double status = 1.0;  // S_n, starts at S_0 = 1
  double threshold = 0.8;
  StrategyId strategy = game::kTitForTat;
  double coin_p = 0.5;
  double resources_spent = 0.0;
  std::size_t recoveries = 0;
  // (own, peer) realized actions for every game round with a peer present.
  std::vector<std::pair<Action, Action>> game_history;
  game::StrategyState game_state;

  std::vector<Action> peer_actions() const;
};

AgentState make_agent(std::size_t id, double alpha, double threshold, StrategyId strategy,
                      double coin_p);

class Decision {
 public:
  static Decision noop() { return Decision(); }
  // Throws std::invalid_argument for a recovering defector.
  static Decision play(Action action, bool executed_recovery);

  bool is_play() const { return play_; }
  Action action() const { return action_; }
  bool executed_recovery() const { return recovery_; }
  // "NoOp", "C" or "D"
  std::string label() const;

  friend bool operator==(const Decision&, const Decision&) = default;

 private:
  Decision() = default;
  bool play_ = false;
  Action action_ = Action::Cooperate;
  bool recovery_ = false;
};

// Independent per-agent batches of `events_per_agent` events, each bad with
// probability `p_bad`.
std::vector<EventBatch> generate_slot_events(double p_bad, std::size_t slot,
                                             std::size_t events_per_agent,
                                             std::size_t agent_count, Rng& rng);
std::vector<EventBatch> generate_slot_events(const ThreatSchedule& schedule, std::size_t slot,
                                             std::size_t events_per_agent,
                                             std::size_t agent_count, Rng& rng);

// S_n = S_{n-1} * alpha + (good / total) * (1 - alpha). Empty batches leave
// the estimate untouched.
AgentState update_status(const AgentState& agent, const EventBatch& batch);

Decision agent_decide(const AgentState& agent, std::span<const Action> peer_history, Rng& rng);

enum class MessageKind : int {
  StatusReport = 1,
  EventReport = 2,
  AgentProcessing = 3,
  DecisionMsg = 4,
  FlowRule = 5,
};
const char* to_string(MessageKind kind);

struct Message {
  std::size_t order = 0;  // 1-based position within the slot
  MessageKind kind = MessageKind::StatusReport;
};

struct WorldState {
  std::size_t slot = 0;
  double threat_intensity = 0.0;  // effective p_bad of the current slot
  double mitigation_carry = 1.0;  // factor applied to the next slot's p_bad
  std::vector<AgentState> agents;
  std::vector<std::optional<double>> payoffs;  // stage payoffs of the last slot

  double next_intensity(double base_p_bad) const { return base_p_bad * mitigation_carry; }
};

// Throws std::invalid_argument for mitigation outside [0, 1], negative cost
// or a decision count that differs from the agent count.
WorldState apply_decisions(const WorldState& world, std::span<const Decision> decisions,
                           const PayoffMatrix& m, double mitigation, double recovery_cost);

struct CpsConfig {
  std::size_t agents = 2;
  std::size_t slots = 200;
  std::size_t events_per_agent = 100;
  double alpha = 0.8;
  double threshold = 0.8;
  std::vector<StrategyId> strategies{game::kTitForTat};  // one entry = all agents
  double coin_p = 0.5;
  double mitigation = 0.5;
  double recovery_cost = 1.0;
  PayoffMatrix matrix = PayoffMatrix::standard();
  ThreatSchedule threats;
  std::uint64_t seed = 0;

  StrategyId strategy_of(std::size_t agent) const;
  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct SlotRecord {
  std::size_t slot = 0;
  double threat_intensity = 0.0;
  std::vector<double> status;
  std::vector<std::size_t> bad_events;
  std::vector<Decision> decisions;
  std::vector<std::optional<double>> payoffs;
  std::vector<double> resources;
  std::vector<Message> messages;
};

struct CpsTrace {
  CpsConfig config;
  std::uint64_t seed = 0;
  std::vector<SlotRecord> slots;

  std::size_t game_invocations() const;  // agent-slots with a Play decision
  std::size_t total_bad_events() const;
  std::size_t executed_recoveries() const;
  // First slot >= from where every agent's estimate exceeds its threshold.
  std::optional<std::size_t> recovered_at(std::size_t from) const;
};

CpsTrace run_cps(const CpsConfig& config);

}  // namespace rcps::cps

#endif  // RCPS_CPS_HPP
