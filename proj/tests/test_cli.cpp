#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "rcps/cli.hpp"

namespace fs = std::filesystem;
using namespace rcps;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("rcps_cli_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(slurp(path));
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

const char* kBreachScenario = R"({
  "alpha": 0.8, "threshold": 0.8, "slots": 150, "strategy": "allc", "coin_p": 1.0,
  "mitigation": 0.5, "threat_windows": [{"start": 40, "end": 70, "p_bad": 0.9}], "seed": 5
})";

}  // namespace

TEST_CASE("number formatting is shortest round-trip") {
  CHECK(cli::format_number(1.0) == "1");
  CHECK(cli::format_number(0.6) == "0.6");
  CHECK(cli::format_number(4.8) == "4.8");
  CHECK(cli::format_number(std::sqrt(0.5)) == "0.7071067811865476");
}

TEST_CASE("parse helpers") {
  CHECK(cli::parse_matrix("5,3,1,0") == game::PayoffMatrix::standard());
  CHECK_THROWS(cli::parse_matrix("5,3,1"));
  CHECK_THROWS(cli::parse_matrix("5,3,x,0"));
  CHECK_THROWS(cli::parse_matrix("3,5,1,0"));
  auto c = cli::parse_counts("tft=50,tf2t=50");
  REQUIRE(c.size() == 2);
  CHECK(c[0] == std::pair{game::kTitForTat, std::size_t{50}});
  CHECK(c[1] == std::pair{game::kTitForTwoTats, std::size_t{50}});
  CHECK_THROWS(cli::parse_counts("tft50"));
  CHECK_THROWS(cli::parse_counts("tft=-1"));
  CHECK_THROWS(cli::parse_counts("nope=3"));
}

TEST_CASE("payoff-trend") {
  TempDir dir;
  SUBCASE("delta 0.6 grim crosses at stage 4") {
    auto r = run({"payoff-trend", "--delta", "0.6", "--punisher", "grim", "--stages", "4", "--out",
                  dir / "t.csv"});
    REQUIRE(r.code == 0);
    auto rows = csv(dir / "t.csv");
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == std::vector<std::string>{"stage", "delta", "coop_cum", "dev_cum", "crossed"});
    CHECK(rows[1][4] == "0");
    CHECK(rows[3][4] == "0");
    CHECK(rows[4][4] == "1");
    CHECK(rows[2][2] == "4.8");
    CHECK(r.out.find("delta_star=0.5") != std::string::npos);
  }
  SUBCASE("delta 0 never crosses") {
    auto r = run({"payoff-trend", "--delta", "0", "--punisher", "grim", "--stages", "5", "--out",
                  dir / "t.csv"});
    REQUIRE(r.code == 0);
    auto rows = csv(dir / "t.csv");
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i][2] == "3");
      CHECK(rows[i][3] == "5");
      CHECK(rows[i][4] == "0");
    }
  }
  SUBCASE("tf2t threshold line") {
    auto r = run({"payoff-trend", "--punisher", "tf2t", "--out", dir / "t.csv"});
    REQUIRE(r.code == 0);
    const auto pos = r.out.find("delta_star=");
    REQUIRE(pos != std::string::npos);
    const double v = std::stod(r.out.substr(pos + 11));
    CHECK(std::abs(v - 0.707107) <= 1e-6);
    // Default delta set, 10 stages each.
    CHECK(csv(dir / "t.csv").size() == 41);
  }
  SUBCASE("multiple deltas in the given order") {
    auto r = run({"payoff-trend", "--delta", "0.95", "--delta", "0.2", "--stages", "3", "--out",
                  dir / "t.csv"});
    REQUIRE(r.code == 0);
    auto rows = csv(dir / "t.csv");
    REQUIRE(rows.size() == 7);
    CHECK(rows[1][1] == "0.95");
    CHECK(rows[3][4] == "1");
    CHECK(rows[4][1] == "0.2");
  }
  SUBCASE("bad flags exit 2") {
    CHECK(run({"payoff-trend", "--punisher", "alld", "--out", dir / "t.csv"}).code == 2);
    CHECK(run({"payoff-trend", "--delta", "1", "--out", dir / "t.csv"}).code == 2);
    CHECK(run({"payoff-trend", "--matrix", "1,2,3", "--out", dir / "t.csv"}).code == 2);
    CHECK(run({"payoff-trend", "--stages", "zero", "--out", dir / "t.csv"}).code == 2);
    CHECK(run({"payoff-trend"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
  }
}

TEST_CASE("threshold command") {
  auto r = run({"threshold"});
  REQUIRE(r.code == 0);
  std::istringstream is(r.out);
  std::string line;
  std::getline(is, line);
  CHECK(line == "punisher,closed_form,bisection");
  const std::pair<const char*, double> expected[] = {
      {"grim", 0.5}, {"tft", 0.5}, {"tf2t", std::sqrt(0.5)}};
  for (const auto& [name, value] : expected) {
    REQUIRE(std::getline(is, line));
    const auto a = line.find(','), b = line.rfind(',');
    CHECK(line.substr(0, a) == name);
    CHECK(std::stod(line.substr(a + 1, b - a - 1)) == value);
    CHECK(std::abs(std::stod(line.substr(b + 1)) - value) <= 1e-9);
  }
  CHECK(run({"threshold", "--punisher", "allc"}).code == 2);
}

TEST_CASE("match command") {
  TempDir dir;
  SUBCASE("tft vs alld") {
    REQUIRE(run({"match", "--s1", "tft", "--s2", "alld", "--stages", "3", "--noise", "0", "--out",
                 dir / "m.csv"}).code == 0);
    CHECK(slurp(dir / "m.csv") == "stage,a1,a2,p1,p2\n1,C,D,0,5\n2,D,D,1,1\n3,D,D,1,1\n");
  }
  SUBCASE("grim vs grim") {
    REQUIRE(run({"match", "--s1", "grim", "--s2", "grim", "--stages", "5", "--out", dir / "m.csv"}).code == 0);
    CHECK(slurp(dir / "m.csv") == "stage,a1,a2,p1,p2\n1,C,C,3,3\n2,C,C,3,3\n3,C,C,3,3\n4,C,C,3,3\n5,C,C,3,3\n");
  }
  SUBCASE("byte identical reruns") {
    std::vector<std::string> args{"match", "--s1", "tft", "--s2", "random:0.4", "--stages", "200",
                                  "--noise", "0.1", "--seed", "77"};
    auto a = args, b = args;
    a.insert(a.end(), {"--out", dir / "a.csv"});
    b.insert(b.end(), {"--out", dir / "b.csv"});
    REQUIRE(run(a).code == 0);
    REQUIRE(run(b).code == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  }
  SUBCASE("unknown strategy lists valid names") {
    auto r = run({"match", "--s1", "pavlov", "--s2", "tft", "--out", dir / "m.csv"});
    CHECK(r.code == 2);
    CHECK(r.err.find("tf2t") != std::string::npos);
    CHECK(r.err.find("alld") != std::string::npos);
  }
  SUBCASE("noise out of range") {
    CHECK(run({"match", "--s1", "tft", "--s2", "tft", "--noise", "1", "--out", dir / "m.csv"}).code == 2);
  }
}

TEST_CASE("moran command") {
  TempDir dir;
  SUBCASE("already fixated population") {
    auto r = run({"moran", "--init", "tft=100", "--replicates", "2", "--out", dir / "m"});
    REQUIRE(r.code == 0);
    auto summary = nlohmann::json::parse(slurp(dir / "m/summary.json"));
    CHECK(summary["replicates"] == 2);
    CHECK(summary["winner_counts"]["tft"] == 2);
    CHECK(summary["mean_fixation_round"] == 0.0);
    CHECK(slurp(dir / "m/replicate_0.csv") == "round,tft\n0,100\n");
  }
  SUBCASE("small noisy run writes one file per replicate") {
    auto r = run({"moran", "--pop", "12", "--init", "tft=6,tf2t=6", "--rounds", "50",
                  "--match-stages", "10", "--noise", "0.05", "--seed", "3", "--replicates", "11",
                  "--out", dir / "m"});
    REQUIRE(r.code == 0);
    for (int i = 0; i < 11; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "m/replicate_%02d.csv", i);
      auto rows = csv(dir / name);
      REQUIRE(rows.size() >= 2);
      CHECK(rows[0] == std::vector<std::string>{"round", "tft", "tf2t"});
      for (std::size_t k = 1; k < rows.size(); ++k) {
        CHECK(std::stoul(rows[k][1]) + std::stoul(rows[k][2]) == 12);
      }
    }
    auto summary = nlohmann::json::parse(slurp(dir / "m/summary.json"));
    CHECK(summary["replicates"] == 11);
    CHECK(summary.contains("mean_fixation_round"));
    const std::string first = slurp(dir / "m/replicate_04.csv");
    REQUIRE(run({"moran", "--pop", "12", "--init", "tft=6,tf2t=6", "--rounds", "50",
                 "--match-stages", "10", "--noise", "0.05", "--seed", "3", "--replicates", "11",
                 "--threads", "4", "--out", dir / "m2"}).code == 0);
    CHECK(slurp(dir / "m2/replicate_04.csv") == first);
    CHECK(slurp(dir / "m2/summary.json") == slurp(dir / "m/summary.json"));
  }
  SUBCASE("counts must sum to the population") {
    auto r = run({"moran", "--init", "tft=50,tf2t=40", "--out", dir / "m"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--pop") != std::string::npos);
  }
}

TEST_CASE("scenario documents") {
  SUBCASE("defaults fill missing keys") {
    auto cfg = cli::parse_cps_config(nlohmann::json::parse(R"({"alpha": 0.8, "threshold": 0.8})"));
    CHECK(cfg.agents == 2);
    CHECK(cfg.coin_p == 0.5);
    CHECK(cfg.mitigation == 0.5);
    CHECK(cfg.matrix == game::PayoffMatrix::standard());
  }
  SUBCASE("echo round trips") {
    auto cfg = cli::parse_cps_config(nlohmann::json::parse(kBreachScenario));
    auto again = cli::parse_cps_config(cli::to_json(cfg));
    CHECK(cli::to_json(again) == cli::to_json(cfg));
    CHECK(again.threats.windows() == cfg.threats.windows());
  }
  auto field_of = [](const char* text) {
    try {
      cli::parse_cps_config(nlohmann::json::parse(text));
    } catch (const cps::ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  CHECK(field_of(R"({"threshold": 0.8})") == "alpha");
  CHECK(field_of(R"({"alpha": 0.8})") == "threshold");
  CHECK(field_of(R"({"alpha": "x", "threshold": 0.8})") == "alpha");
  CHECK(field_of(R"({"alpha": 0.8, "threshold": 0.8, "colour": 1})") == "colour");
  CHECK(field_of(R"({"alpha": 0.8, "threshold": 0.8, "agents": -1})") == "agents");
  CHECK(field_of(R"({"alpha": 0.8, "threshold": 0.8, "strategy": "nope"})") == "strategy");
  CHECK(field_of(R"({"alpha": 0.8, "threshold": 0.8, "matrix": [3, 5, 1, 0]})") == "matrix");
  CHECK(field_of(R"({"alpha": 0.8, "threshold": 0.8, "matrix": {"T": 5, "R": 3, "P": 1}})") == "matrix.S");
  CHECK(field_of(R"({"alpha": 0.8, "threshold": 0.8, "threat_windows": [{"start": 1, "end": 5}]})") ==
        "threat_windows[0].p_bad");
  CHECK(field_of(R"({"alpha": 0.8, "threshold": 0.8,
        "threat_windows": [{"start": 1, "end": 5, "p_bad": 1}, {"start": 3, "end": 9, "p_bad": 1}]})") ==
        "threat_windows");
  CHECK(field_of(R"({"alpha": 2, "threshold": 0.8})") == "alpha");
  CHECK(field_of(R"([1, 2])") == "<document>");
}

TEST_CASE("cps command") {
  TempDir dir;
  SUBCASE("zero threat") {
    write(dir / "s.json", R"({"alpha": 0.8, "threshold": 0.8, "slots": 100})");
    auto r = run({"cps", "--config", dir / "s.json", "--out-dir", dir / "o"});
    REQUIRE(r.code == 0);
    auto status = csv(dir / "o/status.csv");
    REQUIRE(status.size() == 101);
    CHECK(status[0] == std::vector<std::string>{"slot", "agent0", "agent1"});
    for (std::size_t i = 1; i < status.size(); ++i) {
      CHECK(std::stod(status[i][1]) == 1.0);
      CHECK(std::stod(status[i][2]) == 1.0);
    }
    auto decisions = csv(dir / "o/decisions.csv");
    REQUIRE(decisions.size() == 201);
    CHECK(decisions[0] ==
          std::vector<std::string>{"slot", "agent", "decision", "executed_recovery", "payoff", "resources_cum"});
    for (std::size_t i = 1; i < decisions.size(); ++i) CHECK(decisions[i][2] == "NoOp");
    auto echo = nlohmann::json::parse(slurp(dir / "o/config.json"));
    CHECK(echo["coin_p"] == 0.5);
    CHECK(echo["agents"] == 2);
  }
  SUBCASE("breach scenario plays exactly in breached slots") {
    write(dir / "s.json", kBreachScenario);
    REQUIRE(run({"cps", "--config", dir / "s.json", "--out-dir", dir / "o"}).code == 0);
    auto status = csv(dir / "o/status.csv");
    auto decisions = csv(dir / "o/decisions.csv");
    auto messages = csv(dir / "o/messages.csv");
    CHECK(messages[0] == std::vector<std::string>{"slot", "order", "kind"});
    std::size_t plays = 0;
    for (std::size_t i = 1; i < decisions.size(); ++i) {
      const auto slot = std::stoul(decisions[i][0]);
      const auto agent = std::stoul(decisions[i][1]);
      const double s = std::stod(status[slot][1 + agent]);
      const bool breached = !(s > 0.8);
      CHECK((decisions[i][2] != "NoOp") == breached);
      if (breached) {
        ++plays;
        CHECK(slot >= 40);
      }
    }
    CHECK(plays > 0);
    // FlowRule iff some agent played in that slot.
    std::map<unsigned long, bool> flow, played;
    for (std::size_t i = 1; i < messages.size(); ++i) {
      if (messages[i][2] == "FlowRule") flow[std::stoul(messages[i][0])] = true;
    }
    for (std::size_t i = 1; i < decisions.size(); ++i) {
      if (decisions[i][2] != "NoOp") played[std::stoul(decisions[i][0])] = true;
    }
    CHECK(flow == played);
  }
  SUBCASE("seed flag overrides and reruns are byte identical") {
    write(dir / "s.json", kBreachScenario);
    REQUIRE(run({"cps", "--config", dir / "s.json", "--seed", "9", "--out-dir", dir / "a"}).code == 0);
    REQUIRE(run({"cps", "--config", dir / "s.json", "--seed", "9", "--out-dir", dir / "b"}).code == 0);
    for (const char* f : {"status.csv", "decisions.csv", "messages.csv", "config.json"}) {
      CHECK(slurp(dir / (std::string("a/") + f)) == slurp(dir / (std::string("b/") + f)));
    }
    CHECK(nlohmann::json::parse(slurp(dir / "a/config.json"))["seed"] == 9);
  }
  SUBCASE("missing alpha exits 2 and names it") {
    write(dir / "s.json", R"({"threshold": 0.8})");
    auto r = run({"cps", "--config", dir / "s.json", "--out-dir", dir / "o"});
    CHECK(r.code == 2);
    CHECK(r.err.find("alpha") != std::string::npos);
  }
  SUBCASE("malformed json exits 2") {
    write(dir / "s.json", "{\"alpha\": 0.8,");
    CHECK(run({"cps", "--config", dir / "s.json", "--out-dir", dir / "o"}).code == 2);
  }
  SUBCASE("unreadable config exits 3") {
    CHECK(run({"cps", "--config", dir / "missing.json", "--out-dir", dir / "o"}).code == 3);
  }
  SUBCASE("unwritable output exits 3") {
    write(dir / "s.json", R"({"alpha": 0.8, "threshold": 0.8, "slots": 3})");
    write(dir / "blocker", "file, not a directory");
    CHECK(run({"cps", "--config", dir / "s.json", "--out-dir", dir / "blocker/o"}).code == 3);
  }
}

TEST_CASE("installed binary exit codes") {
  TempDir dir;
  const std::string bin = RCPS_CLI_PATH;
  auto status = [](const std::string& cmd) {
    int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  CHECK(status(bin + " --help") == 0);
  CHECK(status(bin + " match --s1 tft --s2 alld --stages 3 --out " + (dir / "m.csv")) == 0);
  CHECK(status(bin + " match --s1 nope --s2 alld --out " + (dir / "m.csv")) == 2);
  CHECK(status(bin + " moran --init tft=3 --pop 4 --out " + (dir / "x")) == 2);
}
