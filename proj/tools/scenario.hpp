#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tradeup/dynamic_solver.hpp"

namespace tradeup {

struct Scenario {
    Setting setting;
    std::optional<std::string> kind;  // canonical kind the setting was built from, if any
    PriceGridSpec grid;
    SolverOptions solver;
    std::string table_name = "price_path.csv";
    std::string summary_name = "summary.json";
    std::vector<Vec2> profiles;  // extra price profiles for the static demand table
};

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// strict: unknown keys, wrong types and invalid settings all raise ScenarioError
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

// explicit graph and atoms, so parsing the result gives back the same Setting
std::string emit_setting(const Setting& setting);
Setting parse_setting(const std::string& text);

std::string format_double(double x);

// comma-separated on-path table, LF line endings
std::string price_table(const EquilibriumOutcome& eq);

}  // namespace tradeup
