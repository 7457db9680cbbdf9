#ifndef RCPS_CLI_HPP
#define RCPS_CLI_HPP

// Batch front end: argument handling, scenario documents and the CSV/JSON
// trace writers behind the `rcps` tool.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcps/cps.hpp"
#include "rcps/evolution.hpp"
#include "rcps/game.hpp"

namespace rcps::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3 };

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest decimal text that round-trips to the same double.
std::string format_number(double v);

// "T,R,P,S"
game::PayoffMatrix parse_matrix(const std::string& text);

// "tft=50,tf2t=50"
std::vector<std::pair<game::StrategyId, std::size_t>> parse_counts(const std::string& text);

// Scenario document for the cps command. `alpha` and `threshold` are
// required; every other key falls back to the CpsConfig defaults. Unknown
// keys and ill-typed values raise cps::ConfigError naming the key.
cps::CpsConfig parse_cps_config(const nlohmann::json& doc);
nlohmann::json to_json(const cps::CpsConfig& config);

void write_match_csv(std::ostream& os, const game::MatchTrace& trace);
void write_moran_csv(std::ostream& os, const evolution::MoranTrace& trace);
nlohmann::json summary_json(const evolution::MoranSummary& summary);
void write_status_csv(std::ostream& os, const cps::CpsTrace& trace);
void write_decisions_csv(std::ostream& os, const cps::CpsTrace& trace);
void write_messages_csv(std::ostream& os, const cps::CpsTrace& trace);

// Entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rcps::cli

#endif  // RCPS_CLI_HPP
