#include "rcps/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

namespace rcps::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument(what + ": '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

game::PayoffMatrix parse_matrix(const std::string& text) {
  auto parts = split(text, ',');
  if (parts.size() != 4) throw std::invalid_argument("--matrix: expected T,R,P,S");
  return {parse_double(parts[0], "--matrix"), parse_double(parts[1], "--matrix"),
          parse_double(parts[2], "--matrix"), parse_double(parts[3], "--matrix")};
}

std::vector<std::pair<game::StrategyId, std::size_t>> parse_counts(const std::string& text) {
  std::vector<std::pair<game::StrategyId, std::size_t>> counts;
  for (const auto& item : split(text, ',')) {
    auto eq = item.rfind('=');
    if (eq == std::string::npos) throw std::invalid_argument("--init: expected name=count, got '" + item + "'");
    const std::string digits = item.substr(eq + 1);
    std::size_t n = 0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (digits.empty() || res.ec != std::errc() || res.ptr != digits.data() + digits.size()) {
      throw std::invalid_argument("--init: bad count in '" + item + "'");
    }
    counts.emplace_back(game::StrategyId::parse(item.substr(0, eq)), n);
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Scenario documents

namespace {

const std::vector<std::string> kScenarioKeys = {
    "agents",     "slots",      "events_per_agent", "alpha",  "threshold",      "strategy",
    "coin_p",     "mitigation", "recovery_cost",    "matrix", "threat_windows", "seed"};

double number_field(const json& v, const std::string& field) {
  if (!v.is_number()) throw cps::ConfigError(field, "expected a number");
  return v.get<double>();
}

std::uint64_t count_field(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw cps::ConfigError(field, "expected a non-negative integer");
}

game::PayoffMatrix matrix_field(const json& v) {
  std::array<double, 4> vals{};
  if (v.is_array()) {
    if (v.size() != 4) throw cps::ConfigError("matrix", "expected [T, R, P, S]");
    for (std::size_t i = 0; i < 4; ++i) vals[i] = number_field(v[i], "matrix");
  } else if (v.is_object()) {
    static const char* names[] = {"T", "R", "P", "S"};
    for (const auto& [key, val] : v.items()) {
      if (std::none_of(std::begin(names), std::end(names), [&](const char* n) { return key == n; })) {
        throw cps::ConfigError("matrix." + key, "unknown key");
      }
    }
    for (std::size_t i = 0; i < 4; ++i) {
      if (!v.contains(names[i])) throw cps::ConfigError(std::string("matrix.") + names[i], "missing");
      vals[i] = number_field(v[names[i]], std::string("matrix.") + names[i]);
    }
  } else {
    throw cps::ConfigError("matrix", "expected an object {T, R, P, S} or an array");
  }
  try {
    return {vals[0], vals[1], vals[2], vals[3]};
  } catch (const std::invalid_argument& e) {
    throw cps::ConfigError("matrix", e.what());
  }
}

game::StrategyId strategy_name(const json& v) {
  if (!v.is_string()) throw cps::ConfigError("strategy", "expected a strategy name");
  try {
    return game::StrategyId::parse(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw cps::ConfigError("strategy", e.what());
  }
}

cps::ThreatSchedule windows_field(const json& v) {
  if (!v.is_array()) throw cps::ConfigError("threat_windows", "expected a list");
  std::vector<cps::ThreatWindow> windows;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& w = v[i];
    const std::string where = "threat_windows[" + std::to_string(i) + "]";
    if (!w.is_object()) throw cps::ConfigError(where, "expected {start, end, p_bad}");
    for (const auto& [key, val] : w.items()) {
      if (key != "start" && key != "end" && key != "p_bad") {
        throw cps::ConfigError(where + "." + key, "unknown key");
      }
    }
    for (const char* key : {"start", "end", "p_bad"}) {
      if (!w.contains(key)) throw cps::ConfigError(where + "." + key, "missing");
    }
    windows.push_back({count_field(w["start"], where + ".start"), count_field(w["end"], where + ".end"),
                       number_field(w["p_bad"], where + ".p_bad")});
  }
  return cps::ThreatSchedule(std::move(windows));
}

}  // namespace

cps::CpsConfig parse_cps_config(const json& doc) {
  if (!doc.is_object()) throw cps::ConfigError("<document>", "expected a JSON object");
  for (const auto& [key, val] : doc.items()) {
    if (std::find(kScenarioKeys.begin(), kScenarioKeys.end(), key) == kScenarioKeys.end()) {
      throw cps::ConfigError(key, "unknown key");
    }
  }
  for (const char* key : {"alpha", "threshold"}) {
    if (!doc.contains(key)) throw cps::ConfigError(key, "required key is missing");
  }

  cps::CpsConfig cfg;
  if (doc.contains("agents")) cfg.agents = count_field(doc["agents"], "agents");
  if (doc.contains("slots")) cfg.slots = count_field(doc["slots"], "slots");
  if (doc.contains("events_per_agent")) {
    cfg.events_per_agent = count_field(doc["events_per_agent"], "events_per_agent");
  }
  cfg.alpha = number_field(doc["alpha"], "alpha");
  cfg.threshold = number_field(doc["threshold"], "threshold");
  if (doc.contains("strategy")) {
    const auto& s = doc["strategy"];
    cfg.strategies.clear();
    if (s.is_array()) {
      for (const auto& item : s) cfg.strategies.push_back(strategy_name(item));
    } else {
      cfg.strategies.push_back(strategy_name(s));
    }
  }
  if (doc.contains("coin_p")) cfg.coin_p = number_field(doc["coin_p"], "coin_p");
  if (doc.contains("mitigation")) cfg.mitigation = number_field(doc["mitigation"], "mitigation");
  if (doc.contains("recovery_cost")) {
    cfg.recovery_cost = number_field(doc["recovery_cost"], "recovery_cost");
  }
  if (doc.contains("matrix")) cfg.matrix = matrix_field(doc["matrix"]);
  if (doc.contains("threat_windows")) cfg.threats = windows_field(doc["threat_windows"]);
  if (doc.contains("seed")) cfg.seed = count_field(doc["seed"], "seed");
  cfg.validate();
  return cfg;
}

json to_json(const cps::CpsConfig& c) {
  json doc;
  doc["agents"] = c.agents;
  doc["slots"] = c.slots;
  doc["events_per_agent"] = c.events_per_agent;
  doc["alpha"] = c.alpha;
  doc["threshold"] = c.threshold;
  if (c.strategies.size() == 1) {
    doc["strategy"] = c.strategies.front().name();
  } else {
    doc["strategy"] = json::array();
    for (const auto& s : c.strategies) doc["strategy"].push_back(s.name());
  }
  doc["coin_p"] = c.coin_p;
  doc["mitigation"] = c.mitigation;
  doc["recovery_cost"] = c.recovery_cost;
  doc["matrix"] = {{"T", c.matrix.temptation()},
                   {"R", c.matrix.reward()},
                   {"P", c.matrix.punishment()},
                   {"S", c.matrix.sucker()}};
  doc["threat_windows"] = json::array();
  for (const auto& w : c.threats.windows()) {
    doc["threat_windows"].push_back({{"start", w.start}, {"end", w.end}, {"p_bad", w.p_bad}});
  }
  doc["seed"] = c.seed;
  return doc;
}

// ---------------------------------------------------------------------------
// Writers

void write_match_csv(std::ostream& os, const game::MatchTrace& trace) {
  os << "stage,a1,a2,p1,p2\n";
  for (const auto& s : trace.stages) {
    os << s.stage << ',' << game::to_char(s.realized[0]) << ',' << game::to_char(s.realized[1])
       << ',' << format_number(s.payoffs[0]) << ',' << format_number(s.payoffs[1]) << '\n';
  }
}

void write_moran_csv(std::ostream& os, const evolution::MoranTrace& trace) {
  os << "round";
  for (const auto& s : trace.strategies) os << ',' << s.name();
  os << '\n';
  for (std::size_t r = 0; r < trace.counts.size(); ++r) {
    os << r;
    for (auto c : trace.counts[r]) os << ',' << c;
    os << '\n';
  }
}

json summary_json(const evolution::MoranSummary& summary) {
  json doc;
  doc["replicates"] = summary.replicates;
  doc["winner_counts"] = json::object();
  for (const auto& [id, n] : summary.winner_counts) doc["winner_counts"][id.name()] = n;
  doc["fixated"] = summary.fixated;
  if (summary.mean_fixation_round) {
    doc["mean_fixation_round"] = *summary.mean_fixation_round;
  } else {
    doc["mean_fixation_round"] = nullptr;
  }
  return doc;
}

void write_status_csv(std::ostream& os, const cps::CpsTrace& trace) {
  os << "slot";
  for (std::size_t i = 0; i < trace.config.agents; ++i) os << ",agent" << i;
  os << '\n';
  for (const auto& s : trace.slots) {
    os << s.slot;
    for (double v : s.status) os << ',' << format_number(v);
    os << '\n';
  }
}

void write_decisions_csv(std::ostream& os, const cps::CpsTrace& trace) {
  os << "slot,agent,decision,executed_recovery,payoff,resources_cum\n";
  for (const auto& s : trace.slots) {
    for (std::size_t i = 0; i < s.decisions.size(); ++i) {
      const auto& d = s.decisions[i];
      os << s.slot << ',' << i << ',' << d.label() << ',' << (d.executed_recovery() ? 1 : 0) << ',';
      if (s.payoffs[i]) os << format_number(*s.payoffs[i]);
      os << ',' << format_number(s.resources[i]) << '\n';
    }
  }
}

void write_messages_csv(std::ostream& os, const cps::CpsTrace& trace) {
  os << "slot,order,kind\n";
  for (const auto& s : trace.slots) {
    for (const auto& m : s.messages) os << s.slot << ',' << m.order << ',' << cps::to_string(m.kind) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  body(os);
  os.flush();
  if (!os) throw IoError("write failed: " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

game::StrategyId punisher_from_flag(const std::string& name) {
  auto id = game::StrategyId::parse(name);
  if (!game::is_punisher(id)) throw std::invalid_argument("--punisher must be grim, tft or tf2t");
  return id;
}

struct PayoffTrendArgs {
  std::vector<double> deltas;
  std::string punisher = "grim";
  std::size_t stages = 10;
  std::string matrix = "5,3,1,0";
  std::string out;
};

int cmd_payoff_trend(const PayoffTrendArgs& a, std::ostream& out) {
  const auto m = parse_matrix(a.matrix);
  const auto punisher = punisher_from_flag(a.punisher);
  std::vector<double> deltas = a.deltas;
  if (deltas.empty()) deltas = {0.0, 0.2, 0.6, 0.95};
  for (double d : deltas) {
    if (!(d >= 0.0 && d < 1.0)) throw std::invalid_argument("--delta must be in [0, 1)");
  }
  write_file(a.out, [&](std::ostream& os) {
    os << "stage,delta,coop_cum,dev_cum,crossed\n";
    for (double d : deltas) {
      const auto sums = game::stream_partial_sums(m, d, punisher, a.stages);
      const auto cross = game::crossover_stage(m, d, punisher, a.stages);
      for (std::size_t n = 1; n <= a.stages; ++n) {
        os << n << ',' << format_number(d) << ',' << format_number(sums.coop[n - 1]) << ','
           << format_number(sums.deviation[n - 1]) << ',' << (cross && n >= *cross ? 1 : 0) << '\n';
      }
    }
  });
  out << "delta_star=" << format_number(game::cooperation_threshold(m, punisher)) << '\n';
  return kOk;
}

struct ThresholdArgs {
  std::vector<std::string> punishers;
  std::string matrix = "5,3,1,0";
};

int cmd_threshold(const ThresholdArgs& a, std::ostream& out) {
  const auto m = parse_matrix(a.matrix);
  std::vector<std::string> names = a.punishers;
  if (names.empty()) names = {"grim", "tft", "tf2t"};
  out << "punisher,closed_form,bisection\n";
  for (const auto& name : names) {
    const auto p = punisher_from_flag(name);
    out << name << ',' << format_number(game::cooperation_threshold(m, p)) << ','
        << format_number(game::bisect_cooperation_threshold(m, p)) << '\n';
  }
  return kOk;
}

struct MatchArgs {
  std::string s1, s2;
  std::size_t stages = 10;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string matrix = "5,3,1,0";
  std::string out;
};

int cmd_match(const MatchArgs& a) {
  const auto m = parse_matrix(a.matrix);
  const auto trace =
      game::play_match(game::StrategyId::parse(a.s1), game::StrategyId::parse(a.s2), a.stages,
                       a.noise, a.seed, m);
  write_file(a.out, [&](std::ostream& os) { write_match_csv(os, trace); });
  return kOk;
}

struct MoranArgs {
  std::size_t pop = 100;
  std::string init = "tft=50,tf2t=50";
  std::size_t rounds = 1000;
  std::size_t match_stages = 100;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::size_t replicates = 1;
  unsigned threads = 0;
  std::string matrix = "5,3,1,0";
  std::string out;
};

int cmd_moran(const MoranArgs& a, std::ostream& out) {
  evolution::MoranConfig cfg;
  cfg.initial_counts = parse_counts(a.init);
  if (cfg.population_size() != a.pop) {
    throw std::invalid_argument("--init counts sum to " + std::to_string(cfg.population_size()) +
                                ", expected --pop " + std::to_string(a.pop));
  }
  cfg.rounds_max = a.rounds;
  cfg.match_stages = a.match_stages;
  cfg.noise = a.noise;
  cfg.seed = a.seed;
  cfg.replicates = a.replicates;
  cfg.matrix = parse_matrix(a.matrix);
  cfg.validate();

  const fs::path dir(a.out);
  make_dir(dir);
  const auto traces = evolution::run_moran(cfg, a.threads);
  const int width = static_cast<int>(std::to_string(traces.size() - 1).size());
  for (std::size_t r = 0; r < traces.size(); ++r) {
    std::string idx = std::to_string(r);
    idx.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(idx.size()))), '0');
    write_file(dir / ("replicate_" + idx + ".csv"),
               [&](std::ostream& os) { write_moran_csv(os, traces[r]); });
  }
  const auto summary = summary_json(evolution::summarize(traces));
  write_file(dir / "summary.json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
  out << summary.dump() << '\n';
  return kOk;
}

struct CpsArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

int cmd_cps(const CpsArgs& a, std::ostream& out) {
  std::ifstream in(a.config, std::ios::binary);
  if (!in) throw IoError("cannot read " + a.config);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw cps::ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  auto cfg = parse_cps_config(doc);
  if (a.seed) cfg.seed = *a.seed;

  const fs::path dir(a.out_dir);
  make_dir(dir);
  const auto trace = cps::run_cps(cfg);
  write_file(dir / "status.csv", [&](std::ostream& os) { write_status_csv(os, trace); });
  write_file(dir / "decisions.csv", [&](std::ostream& os) { write_decisions_csv(os, trace); });
  write_file(dir / "messages.csv", [&](std::ostream& os) { write_messages_csv(os, trace); });
  const auto echo = to_json(cfg).dump(2);
  write_file(dir / "config.json", [&](std::ostream& os) { os << echo << '\n'; });
  out << echo << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Resilient CPS simulation lab: repeated-game analysis, Moran dynamics and "
               "reactive agent management",
               "rcps"};
  app.require_subcommand(1);

  PayoffTrendArgs trend;
  auto* trend_cmd = app.add_subcommand("payoff-trend", "Cumulative discounted payoff of cooperation vs one deviation");
  trend_cmd->add_option("--delta", trend.deltas, "Discount factor (repeatable, default 0,0.2,0.6,0.95)");
  trend_cmd->add_option("--punisher", trend.punisher, "grim | tft | tf2t")->capture_default_str();
  trend_cmd->add_option("--stages", trend.stages, "Stages per series")->capture_default_str()->check(CLI::PositiveNumber);
  trend_cmd->add_option("--matrix", trend.matrix, "T,R,P,S")->capture_default_str();
  trend_cmd->add_option("--out", trend.out, "Output CSV")->required();

  ThresholdArgs thr;
  auto* thr_cmd = app.add_subcommand("threshold", "Minimum discount factor sustaining cooperation");
  thr_cmd->add_option("--punisher", thr.punishers, "grim | tft | tf2t (repeatable)");
  thr_cmd->add_option("--matrix", thr.matrix, "T,R,P,S")->capture_default_str();

  MatchArgs match;
  auto* match_cmd = app.add_subcommand("match", "Play one repeated match");
  match_cmd->add_option("--s1", match.s1, "Strategy of player 1")->required();
  match_cmd->add_option("--s2", match.s2, "Strategy of player 2")->required();
  match_cmd->add_option("--stages", match.stages)->capture_default_str()->check(CLI::PositiveNumber);
  match_cmd->add_option("--noise", match.noise, "Action flip probability in [0, 1)")->capture_default_str();
  match_cmd->add_option("--seed", match.seed)->capture_default_str();
  match_cmd->add_option("--matrix", match.matrix, "T,R,P,S")->capture_default_str();
  match_cmd->add_option("--out", match.out, "Output CSV")->required();

  MoranArgs moran;
  auto* moran_cmd = app.add_subcommand("moran", "Moran process over a strategy population");
  moran_cmd->add_option("--pop", moran.pop, "Population size")->capture_default_str();
  moran_cmd->add_option("--init", moran.init, "name=count[,name=count...]")->capture_default_str();
  moran_cmd->add_option("--rounds", moran.rounds)->capture_default_str()->check(CLI::PositiveNumber);
  moran_cmd->add_option("--match-stages", moran.match_stages)->capture_default_str()->check(CLI::PositiveNumber);
  moran_cmd->add_option("--noise", moran.noise)->capture_default_str();
  moran_cmd->add_option("--seed", moran.seed)->capture_default_str();
  moran_cmd->add_option("--replicates", moran.replicates)->capture_default_str()->check(CLI::PositiveNumber);
  moran_cmd->add_option("--threads", moran.threads, "Worker threads, 0 = all cores")->capture_default_str();
  moran_cmd->add_option("--matrix", moran.matrix, "T,R,P,S")->capture_default_str();
  moran_cmd->add_option("--out", moran.out, "Output directory")->required();

  CpsArgs cps_args;
  auto* cps_cmd = app.add_subcommand("cps", "Run the reactive CPS management simulation");
  cps_cmd->add_option("--config", cps_args.config, "Scenario JSON document")->required();
  cps_cmd->add_option("--seed", cps_args.seed, "Overrides the document's seed");
  cps_cmd->add_option("--out-dir", cps_args.out_dir, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  try {
    if (*trend_cmd) return cmd_payoff_trend(trend, out);
    if (*thr_cmd) return cmd_threshold(thr, out);
    if (*match_cmd) return cmd_match(match);
    if (*moran_cmd) return cmd_moran(moran, out);
    if (*cps_cmd) return cmd_cps(cps_args, out);
  } catch (const cps::ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kConfigError;
}

}  // namespace rcps::cli
