#include "rcps/game.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace rcps::game {

char to_char(Action a) { return a == Action::Cooperate ? 'C' : 'D'; }

std::optional<Action> action_from_char(char c) {
  if (c == 'C') return Action::Cooperate;
  if (c == 'D') return Action::Defect;
  return std::nullopt;
}

PayoffMatrix::PayoffMatrix(double temptation, double reward, double punishment, double sucker)
    : t_(temptation), r_(reward), p_(punishment), s_(sucker) {
  if (!(std::isfinite(t_) && std::isfinite(r_) && std::isfinite(p_) && std::isfinite(s_))) {
    throw std::invalid_argument("payoff matrix: values must be finite");
  }
  if (!(t_ > r_ && r_ > p_ && p_ > s_)) {
    throw std::invalid_argument("payoff matrix: requires T > R > P > S");
  }
  if (!(2.0 * r_ > t_ + s_)) {
    throw std::invalid_argument("payoff matrix: requires 2R > T + S");
  }
}

double PayoffMatrix::payoff(Action own, Action other) const {
  if (own == Action::Cooperate) return other == Action::Cooperate ? r_ : s_;
  return other == Action::Cooperate ? t_ : p_;
}

std::pair<double, double> stage_payoffs(Action a1, Action a2, const PayoffMatrix& m) {
  return {m.payoff(a1, a2), m.payoff(a2, a1)};
}

StrategyId StrategyId::random_coin(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("random strategy: probability must be in [0, 1]");
  }
  StrategyId id(Kind::RandomCoin);
  id.p_ = p;
  return id;
}

std::string StrategyId::name() const {
  switch (kind_) {
    case Kind::AllCooperate: return "allc";
    case Kind::AllDefect: return "alld";
    case Kind::GrimTrigger: return "grim";
    case Kind::TitForTat: return "tft";
    case Kind::TitForTwoTats: return "tf2t";
    case Kind::RandomCoin: {
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof(buf), p_);
      return "random:" + std::string(buf, res.ptr);
    }
  }
  return {};
}

std::string StrategyId::valid_names() { return "allc, alld, grim, tft, tf2t, random:<p>"; }

StrategyId StrategyId::parse(std::string_view name) {
  if (name == "allc") return kAllCooperate;
  if (name == "alld") return kAllDefect;
  if (name == "grim") return kGrimTrigger;
  if (name == "tft") return kTitForTat;
  if (name == "tf2t") return kTitForTwoTats;
  constexpr std::string_view prefix = "random:";
  if (name.starts_with(prefix)) {
    auto digits = name.substr(prefix.size());
    double p = 0.0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), p);
    if (res.ec == std::errc() && res.ptr == digits.data() + digits.size() && p >= 0.0 && p <= 1.0) {
      return random_coin(p);
    }
  }
  throw std::invalid_argument("unknown strategy '" + std::string(name) +
                              "'; valid names: " + valid_names());
}

void observe(StrategyState& state, Action opponent) {
  ++state.observed;
  switch (state.id.kind()) {
    case StrategyId::Kind::GrimTrigger:
      if (opponent == Action::Defect) state.triggered = true;
      break;
    case StrategyId::Kind::TitForTat:
      state.last_opponent_action = opponent;
      break;
    case StrategyId::Kind::TitForTwoTats:
      if (opponent == Action::Defect) {
        if (state.recent_opponent_defections < 2) ++state.recent_opponent_defections;
      } else {
        state.recent_opponent_defections = 0;
      }
      break;
    default:
      break;
  }
}

Action decide(const StrategyState& state, Rng& rng) {
  switch (state.id.kind()) {
    case StrategyId::Kind::AllCooperate: return Action::Cooperate;
    case StrategyId::Kind::AllDefect: return Action::Defect;
    case StrategyId::Kind::GrimTrigger:
      return state.triggered ? Action::Defect : Action::Cooperate;
    case StrategyId::Kind::TitForTat:
      return state.last_opponent_action.value_or(Action::Cooperate);
    case StrategyId::Kind::TitForTwoTats:
      return state.recent_opponent_defections >= 2 ? Action::Defect : Action::Cooperate;
    case StrategyId::Kind::RandomCoin:
      return bernoulli(rng, state.id.probability()) ? Action::Cooperate : Action::Defect;
  }
  return Action::Cooperate;
}

std::pair<Action, StrategyState> next_action(const StrategyState& state,
                                             std::span<const Action> opponent_history, Rng& rng) {
  StrategyState next = state;
  if (opponent_history.size() < next.observed) next = StrategyState(state.id);
  for (std::size_t i = next.observed; i < opponent_history.size(); ++i) {
    observe(next, opponent_history[i]);
  }
  Action a = decide(next, rng);
  return {a, next};
}

namespace {

void check_match_args(std::size_t stages, double noise) {
  if (stages == 0) throw std::invalid_argument("match: stages must be >= 1");
  if (!(noise >= 0.0 && noise < 1.0)) throw std::invalid_argument("match: noise must be in [0, 1)");
}

// Flips are independent Bernoulli(noise) trials over the action sequence
// p1, p2, p1, p2, ...; the gap to the next flip is drawn geometrically so
// that unflipped actions cost no draws.
class FlipChannel {
 public:
  FlipChannel(double noise, Rng& rng)
      : log_keep_(noise > 0.0 ? std::log1p(-noise) : 0.0), rng_(rng) {
    draw();
  }
  bool next() {
    if (log_keep_ == 0.0) return false;
    if (gap_ > 0) {
      --gap_;
      return false;
    }
    draw();
    return true;
  }
  // Actions guaranteed to pass unflipped from here on.
  std::uint64_t quiet() const { return log_keep_ == 0.0 ? UINT64_MAX : gap_; }
  void skip(std::uint64_t actions) {
    if (log_keep_ != 0.0) gap_ -= actions;
  }

 private:
  void draw() {
    if (log_keep_ == 0.0) return;
    const double g = std::floor(std::log1p(-uniform01(rng_)) / log_keep_);
    gap_ = g < 1e18 ? static_cast<std::uint64_t>(g) : UINT64_MAX;
  }
  double log_keep_;
  Rng& rng_;
  std::uint64_t gap_ = 0;
};

// True if observing `opponent` leaves everything but the counter unchanged.
bool is_stationary(const StrategyState& st, Action opponent) {
  if (st.id.is_random()) return false;
  StrategyState next = st;
  observe(next, opponent);
  next.observed = st.observed;
  return next == st;
}

// One stage loop shared by play_match and match_totals. on_stage receives a
// repeat count: when both players sit in a stationary state and the channel
// is quiet, the identical stages up to the next flip are reported at once.
template <typename OnStage>
void simulate(StrategyId s1, StrategyId s2, std::size_t stages, double noise,
              const PayoffMatrix& m, Rng& rng, OnStage&& on_stage) {
  StrategyState st1(s1), st2(s2);
  FlipChannel channel(noise, rng);
  std::size_t n = 1;
  while (n <= stages) {
    const Action i1 = decide(st1, rng);
    const Action i2 = decide(st2, rng);
    if (is_stationary(st1, i2) && is_stationary(st2, i1)) {
      const std::uint64_t run = std::min<std::uint64_t>(channel.quiet() / 2, stages - n + 1);
      if (run > 1) {
        on_stage(n, run, i1, i2, i1, i2, m.payoff(i1, i2), m.payoff(i2, i1));
        channel.skip(2 * run);
        st1.observed += run;
        st2.observed += run;
        n += run;
        continue;
      }
    }
    const Action r1 = channel.next() ? flip(i1) : i1;
    const Action r2 = channel.next() ? flip(i2) : i2;
    on_stage(n, std::uint64_t{1}, i1, i2, r1, r2, m.payoff(r1, r2), m.payoff(r2, r1));
    observe(st1, r2);
    observe(st2, r1);
    ++n;
  }
}

}  // namespace

MatchTrace play_match(StrategyId s1, StrategyId s2, std::size_t stages, double noise,
                      std::uint64_t seed, const PayoffMatrix& m) {
  check_match_args(stages, noise);
  MatchTrace trace;
  trace.noise = noise;
  trace.seed = seed;
  trace.stages.reserve(stages);
  Rng rng(seed);
  simulate(s1, s2, stages, noise, m, rng,
           [&](std::size_t n, std::uint64_t repeat, Action i1, Action i2, Action r1, Action r2,
               double p1, double p2) {
             for (std::uint64_t k = 0; k < repeat; ++k) {
               trace.stages.push_back({n + k, {i1, i2}, {r1, r2}, {p1, p2}});
             }
           });
  return trace;
}

std::array<double, 2> match_totals(StrategyId s1, StrategyId s2, std::size_t stages, double noise,
                                   const PayoffMatrix& m, Rng& rng) {
  check_match_args(stages, noise);
  std::array<double, 2> totals{0.0, 0.0};
  simulate(s1, s2, stages, noise, m, rng,
           [&](std::size_t, std::uint64_t repeat, Action, Action, Action, Action, double p1,
               double p2) {
             totals[0] += static_cast<double>(repeat) * p1;
             totals[1] += static_cast<double>(repeat) * p2;
           });
  return totals;
}

namespace {
void check_delta(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::invalid_argument("discount factor must be in [0, 1)");
  }
}
}  // namespace

DiscountSeries discounted_series(const MatchTrace& trace, double delta) {
  check_delta(delta);
  DiscountSeries series;
  series.delta = delta;
  for (int p = 0; p < 2; ++p) {
    auto& cum = series.cumulative[p];
    cum.reserve(trace.stages.size());
    double weight = 1.0, sum = 0.0;
    for (const auto& stage : trace.stages) {
      sum += weight * stage.payoffs[p];
      cum.push_back(sum);
      weight *= delta;
    }
  }
  return series;
}

bool is_punisher(StrategyId id) {
  return id == kGrimTrigger || id == kTitForTat || id == kTitForTwoTats;
}

namespace {
void check_punisher(StrategyId id) {
  if (!is_punisher(id)) {
    throw std::invalid_argument("punisher must be grim, tft or tf2t (got " + id.name() + ")");
  }
}
// Stages in which the deviator still collects T before punishment starts.
std::size_t grace_stages(StrategyId punisher) { return punisher == kTitForTwoTats ? 2 : 1; }
}  // namespace

double deviation_payoff(const PayoffMatrix& m, StrategyId punisher, std::size_t stage) {
  check_punisher(punisher);
  return stage <= grace_stages(punisher) ? m.temptation() : m.punishment();
}

StreamValues stream_values(const PayoffMatrix& m, double delta, StrategyId punisher) {
  check_delta(delta);
  check_punisher(punisher);
  const double T = m.temptation(), R = m.reward(), P = m.punishment();
  const double coop = R / (1.0 - delta);
  double dev = 0.0;
  if (punisher == kTitForTwoTats) {
    dev = T + delta * T + delta * delta * P / (1.0 - delta);
  } else {
    dev = T + delta * P / (1.0 - delta);
  }
  return {coop, dev};
}

double cooperation_threshold(const PayoffMatrix& m, StrategyId punisher) {
  check_punisher(punisher);
  const double ratio = (m.temptation() - m.reward()) / (m.temptation() - m.punishment());
  return punisher == kTitForTwoTats ? std::sqrt(ratio) : ratio;
}

double bisect_cooperation_threshold(const PayoffMatrix& m, StrategyId punisher, double tolerance) {
  check_punisher(punisher);
  auto gap = [&](double d) {
    auto v = stream_values(m, d, punisher);
    return v.coop_total - v.deviation_total;
  };
  // gap(0) = R - T < 0 and gap grows without bound as delta -> 1.
  double lo = 0.0, hi = 1.0 - 1e-15;
  for (int iter = 0; iter < 200 && hi - lo > tolerance; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) >= 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

PartialSums stream_partial_sums(const PayoffMatrix& m, double delta, StrategyId punisher,
                                std::size_t stages) {
  check_delta(delta);
  check_punisher(punisher);
  PartialSums sums;
  sums.coop.reserve(stages);
  sums.deviation.reserve(stages);
  double weight = 1.0, coop = 0.0, dev = 0.0;
  for (std::size_t n = 1; n <= stages; ++n) {
    coop += weight * m.reward();
    dev += weight * deviation_payoff(m, punisher, n);
    sums.coop.push_back(coop);
    sums.deviation.push_back(dev);
    weight *= delta;
  }
  return sums;
}

std::optional<std::size_t> crossover_stage(const PayoffMatrix& m, double delta,
                                           StrategyId punisher, std::size_t max_stages) {
  const auto sums = stream_partial_sums(m, delta, punisher, max_stages);
  for (std::size_t i = 0; i < max_stages; ++i) {
    if (sums.coop[i] >= sums.deviation[i]) return i + 1;
  }
  return std::nullopt;
}

}  // namespace rcps::game
