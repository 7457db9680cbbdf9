#include "rcps/cps.hpp"

#include <algorithm>
#include <cmath>

namespace rcps::cps {

ThreatSchedule::ThreatSchedule(std::vector<ThreatWindow> windows) : windows_(std::move(windows)) {
  std::sort(windows_.begin(), windows_.end(),
            [](const ThreatWindow& a, const ThreatWindow& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < windows_.size(); ++i) {
    const auto& w = windows_[i];
    if (w.end <= w.start) {
      throw ConfigError("threat_windows", "window end must be greater than start");
    }
    if (!(w.p_bad >= 0.0 && w.p_bad <= 1.0)) {
      throw ConfigError("threat_windows", "p_bad must be in [0, 1]");
    }
    if (i > 0 && w.start < windows_[i - 1].end) {
      throw ConfigError("threat_windows", "windows overlap");
    }
  }
}

double ThreatSchedule::p_bad(std::size_t slot) const {
  for (const auto& w : windows_) {
    if (slot >= w.start && slot < w.end) return w.p_bad;
  }
  return 0.0;
}

std::size_t ThreatSchedule::quiet_from() const {
  return windows_.empty() ? 0 : windows_.back().end;
}

std::vector<Action> AgentState::peer_actions() const {
  std::vector<Action> out;
  out.reserve(game_history.size());
  for (const auto& [own, peer] : game_history) out.push_back(peer);
  return out;
}

AgentState make_agent(std::size_t id, double alpha, double threshold, StrategyId strategy,
                      double coin_p) {
  AgentState a;
  a.id = id;
  a.alpha = alpha;
  a.threshold = threshold;
  a.strategy = strategy;
  a.coin_p = coin_p;
  a.game_state = game::StrategyState(strategy);
  return a;
}

Decision Decision::play(Action action, bool executed_recovery) {
  if (executed_recovery && action != Action::Cooperate) {
    throw std::invalid_argument("decision: only a cooperating agent can execute recovery");
  }
  Decision d;
  d.play_ = true;
  d.action_ = action;
  d.recovery_ = executed_recovery;
  return d;
}

std::string Decision::label() const {
  if (!play_) return "NoOp";
  return std::string(1, game::to_char(action_));
}

std::vector<EventBatch> generate_slot_events(double p_bad, std::size_t slot,
                                             std::size_t events_per_agent,
                                             std::size_t agent_count, Rng& rng) {
  if (events_per_agent < 1) throw std::invalid_argument("events_per_agent must be >= 1");
  std::vector<EventBatch> batches(agent_count);
  for (auto& b : batches) {
    b.slot = slot;
    b.total = events_per_agent;
    for (std::size_t e = 0; e < events_per_agent; ++e) {
      if (!bernoulli(rng, p_bad)) ++b.good;
    }
  }
  return batches;
}

std::vector<EventBatch> generate_slot_events(const ThreatSchedule& schedule, std::size_t slot,
                                             std::size_t events_per_agent,
                                             std::size_t agent_count, Rng& rng) {
  return generate_slot_events(schedule.p_bad(slot), slot, events_per_agent, agent_count, rng);
}

AgentState update_status(const AgentState& agent, const EventBatch& batch) {
  AgentState next = agent;
  if (batch.total == 0) return next;
  const double s = static_cast<double>(batch.good) / static_cast<double>(batch.total);
  next.status = std::clamp(agent.status * agent.alpha + s * (1.0 - agent.alpha), 0.0, 1.0);
  return next;
}

Decision agent_decide(const AgentState& agent, std::span<const Action> peer_history, Rng& rng) {
  if (agent.status > agent.threshold) return Decision::noop();
  const auto [action, state] = game::next_action(agent.game_state, peer_history, rng);
  if (action == Action::Defect) return Decision::play(Action::Defect, false);
  return Decision::play(Action::Cooperate, bernoulli(rng, agent.coin_p));
}

const char* to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::StatusReport: return "StatusReport";
    case MessageKind::EventReport: return "EventReport";
    case MessageKind::AgentProcessing: return "AgentProcessing";
    case MessageKind::DecisionMsg: return "DecisionMsg";
    case MessageKind::FlowRule: return "FlowRule";
  }
  return "?";
}

WorldState apply_decisions(const WorldState& world, std::span<const Decision> decisions,
                           const PayoffMatrix& m, double mitigation, double recovery_cost) {
  if (!(mitigation >= 0.0 && mitigation <= 1.0)) {
    throw std::invalid_argument("mitigation must be in [0, 1]");
  }
  if (!(recovery_cost >= 0.0)) throw std::invalid_argument("recovery_cost must be >= 0");
  if (decisions.size() != world.agents.size()) {
    throw std::invalid_argument("one decision per agent required");
  }
  WorldState next = world;
  const std::size_t n = decisions.size();
  next.payoffs.assign(n, std::nullopt);
  next.mitigation_carry = 1.0;

  std::vector<std::size_t> players;
  for (std::size_t i = 0; i < n; ++i) {
    if (!decisions[i].is_play()) continue;
    players.push_back(i);
    if (decisions[i].executed_recovery()) {
      auto& a = next.agents[i];
      a.resources_spent += recovery_cost;
      ++a.recoveries;
      next.mitigation_carry *= 1.0 - mitigation;
    }
  }
  if (players.size() < 2) return next;

  // With two players this is the plain stage game. With more, each player
  // gets its mean payoff over all co-players and observes D if any of them
  // defected.
  for (std::size_t i : players) {
    const Action own = decisions[i].action();
    double sum = 0.0;
    Action peer = Action::Cooperate;
    for (std::size_t j : players) {
      if (j == i) continue;
      sum += m.payoff(own, decisions[j].action());
      if (decisions[j].action() == Action::Defect) peer = Action::Defect;
    }
    next.payoffs[i] = sum / static_cast<double>(players.size() - 1);
    auto& a = next.agents[i];
    a.game_history.emplace_back(own, peer);
    game::observe(a.game_state, peer);
  }
  return next;
}

StrategyId CpsConfig::strategy_of(std::size_t agent) const {
  return strategies.size() == 1 ? strategies.front() : strategies.at(agent);
}

void CpsConfig::validate() const {
  if (agents < 1) throw ConfigError("agents", "must be >= 1");
  if (slots < 1) throw ConfigError("slots", "must be >= 1");
  if (events_per_agent < 1) throw ConfigError("events_per_agent", "must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "must be in [0, 1]");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold", "must be in (0, 1)");
  if (strategies.empty() || (strategies.size() != 1 && strategies.size() != agents)) {
    throw ConfigError("strategy", "give one strategy or one per agent");
  }
  if (!(coin_p >= 0.0 && coin_p <= 1.0)) throw ConfigError("coin_p", "must be in [0, 1]");
  if (!(mitigation >= 0.0 && mitigation <= 1.0)) {
    throw ConfigError("mitigation", "must be in [0, 1]");
  }
  if (!(recovery_cost >= 0.0) || !std::isfinite(recovery_cost)) {
    throw ConfigError("recovery_cost", "must be a finite value >= 0");
  }
}

std::size_t CpsTrace::game_invocations() const {
  std::size_t n = 0;
  for (const auto& s : slots) {
    n += static_cast<std::size_t>(std::count_if(s.decisions.begin(), s.decisions.end(),
                                                [](const Decision& d) { return d.is_play(); }));
  }
  return n;
}

std::size_t CpsTrace::total_bad_events() const {
  std::size_t n = 0;
  for (const auto& s : slots) {
    for (auto b : s.bad_events) n += b;
  }
  return n;
}

std::size_t CpsTrace::executed_recoveries() const {
  std::size_t n = 0;
  for (const auto& s : slots) {
    n += static_cast<std::size_t>(std::count_if(s.decisions.begin(), s.decisions.end(),
                                                [](const Decision& d) {
                                                  return d.executed_recovery();
                                                }));
  }
  return n;
}

std::optional<std::size_t> CpsTrace::recovered_at(std::size_t from) const {
  for (const auto& s : slots) {
    if (s.slot < from) continue;
    bool ok = true;
    for (double v : s.status) ok = ok && v > config.threshold;
    if (ok) return s.slot;
  }
  return std::nullopt;
}

CpsTrace run_cps(const CpsConfig& config) {
  config.validate();
  CpsTrace trace;
  trace.config = config;
  trace.seed = config.seed;
  trace.slots.reserve(config.slots);

  Rng rng(config.seed);
  WorldState world;
  for (std::size_t i = 0; i < config.agents; ++i) {
    world.agents.push_back(
        make_agent(i, config.alpha, config.threshold, config.strategy_of(i), config.coin_p));
  }

  for (std::size_t n = 1; n <= config.slots; ++n) {
    SlotRecord rec;
    rec.slot = n;
    auto emit = [&](MessageKind kind) { rec.messages.push_back({rec.messages.size() + 1, kind}); };

    emit(MessageKind::StatusReport);
    world.slot = n;
    world.threat_intensity = world.next_intensity(config.threats.p_bad(n));
    const auto batches = generate_slot_events(world.threat_intensity, n, config.events_per_agent,
                                              config.agents, rng);
    emit(MessageKind::EventReport);

    std::vector<Decision> decisions;
    decisions.reserve(config.agents);
    for (std::size_t i = 0; i < config.agents; ++i) {
      auto& agent = world.agents[i];
      agent = update_status(agent, batches[i]);
      decisions.push_back(agent_decide(agent, agent.peer_actions(), rng));
      rec.status.push_back(agent.status);
      rec.bad_events.push_back(batches[i].total - batches[i].good);
    }
    emit(MessageKind::AgentProcessing);
    emit(MessageKind::DecisionMsg);

    world = apply_decisions(world, decisions, config.matrix, config.mitigation,
                            config.recovery_cost);
    const bool any_play =
        std::any_of(decisions.begin(), decisions.end(), [](const Decision& d) { return d.is_play(); });
    if (any_play) emit(MessageKind::FlowRule);

    rec.threat_intensity = world.threat_intensity;
    rec.decisions = std::move(decisions);
    rec.payoffs = world.payoffs;
    for (const auto& a : world.agents) rec.resources.push_back(a.resources_spent);
    trace.slots.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace rcps::cps
