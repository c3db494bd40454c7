#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "scenario.hpp"
#include "tradeup/transitional.hpp"

using namespace tradeup;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kParseError = 1;
constexpr int kBudget = 2;
constexpr int kVerification = 3;
constexpr int kCompute = 4;

struct Options {
    std::string scenario;
    std::string out = ".";
    std::optional<double> grid_step;
    std::optional<int> horizon;
    std::optional<int> refine;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json profile_json(const PriceProfile& p) {
    json j;
    for (State i : kVarieties) j[std::string(state_name(i))] = p.is_offered(i) ? json(p.price(i)) : json(nullptr);
    return j;
}

json optimum_json(const StaticOptimum& o) {
    return {{"prices", profile_json(o.prices)},
            {"profit", o.profit},
            {"segments", {{"a", o.allocation.measure(State::A)}, {"b", o.allocation.measure(State::B)},
                          {"o", o.allocation.measure(State::O)}}},
            {"tolerance", o.tolerance}};
}

json check_json(const Check& c) {
    return {{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"tolerance", c.tolerance}};
}

Scenario load(const Options& o) {
    auto sc = load_scenario(o.scenario);
    if (o.horizon) {
        if (*o.horizon < 1) throw ScenarioError("--horizon: must be at least 1");
        sc.setting.horizon = *o.horizon;
    }
    if (o.grid_step) {
        if (!(*o.grid_step > 0.0)) throw ScenarioError("--grid-step: must be positive");
        sc.grid.step = *o.grid_step;
        sc.grid.points.clear();
    }
    if (o.refine) {
        if (*o.refine < 0) throw ScenarioError("--refine: must be nonnegative");
        sc.grid.refinement_rounds = *o.refine;
    }
    return sc;
}

void write_file(const fs::path& p, const std::string& body) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << body;
}

json base_report(const Scenario& sc, const std::string& command) {
    json r;
    r["command"] = command;
    r["setting"] = json::parse(emit_setting(sc.setting));
    if (sc.kind) r["kind"] = *sc.kind;
    r["grid"] = {{"step", sc.grid.coarse_step()}, {"finest_step", sc.grid.finest_step()}};
    return r;
}

json classification_json(const Classification& c) {
    json j{{"class", class_name(c.kind)}, {"reason", c.reason}, {"monopoly", optimum_json(c.monopoly)}};
    j["pbar"] = c.no_trading_up ? optimum_json(*c.no_trading_up) : json(nullptr);
    return j;
}

void finish(const Options& o, const Scenario& sc, json& report, Clock::time_point t0) {
    report["timings_ms"] = ms_since(t0);
    write_file(fs::path(o.out) / sc.summary_name, report.dump(2) + "\n");
}

int cmd_static(const Options& o) {
    const auto t0 = Clock::now();
    const auto sc = load(o);
    auto report = base_report(sc, "static");
    const auto c = classify_setting(sc.setting, sc.grid);
    report["classification"] = classification_json(c);

    // coarse sample of the no-trading-up region
    json omega = json::array();
    for (int i = 0; i <= 10; ++i)
        for (int k = 0; k <= 10; ++k) {
            const Vec2 p{i / 10.0, k / 10.0};
            omega.push_back({p[0], p[1], in_omega(static_profile(sc.setting, p), sc.setting)});
        }
    report["omega_sample"] = omega;

    std::vector<PriceProfile> asked{c.monopoly.prices};
    if (c.no_trading_up) asked.push_back(c.no_trading_up->prices);
    for (const auto& p : sc.profiles) asked.push_back(static_profile(sc.setting, p));
    json demand = json::array();
    for (const auto& p : asked) {
        const auto a = demand_segments(sc.setting.population, p, sc.setting, sc.setting.initial_state);
        demand.push_back({{"prices", profile_json(p)},
                          {"a", a.measure(State::A)},
                          {"b", a.measure(State::B)},
                          {"o", a.measure(State::O)},
                          {"profit", static_profit(sc.setting.population, p, sc.setting, sc.setting.initial_state)}});
    }
    report["demand"] = demand;

    std::cout << "class " << class_name(c.kind) << "\n";
    std::cout << "p^m (" << format_double(c.monopoly.prices.p[0]) << ", " << format_double(c.monopoly.prices.p[1])
              << ") profit " << format_double(c.monopoly.profit) << "\n";
    if (c.no_trading_up)
        std::cout << "pbar (" << format_double(c.no_trading_up->prices.p[0]) << ", "
                  << format_double(c.no_trading_up->prices.p[1]) << ") profit "
                  << format_double(c.no_trading_up->profit) << "\n";
    else
        std::cout << "pbar: no price profile leaves trading up empty\n";
    finish(o, sc, report, t0);
    return 0;
}

// solve, refine as asked, and attach the bound checks
struct Solved {
    EquilibriumOutcome eq;
    Classification cls;
    std::vector<Check> bounds;
};

Solved solve(const Scenario& sc) {
    Solved s;
    s.cls = classify_setting(sc.setting, sc.grid);
    s.eq = solve_pbe(sc.setting, sc.grid, sc.solver);
    for (int r = 0; r < sc.grid.refinement_rounds; ++r) s.eq = refine_solution(s.eq, sc.grid, sc.solver);
    const double step = s.eq.grid_step;
    const double W = horizon_weight(sc.setting.delta, 0, sc.setting.last_period());
    if (s.cls.no_trading_up) {
        const auto& pb = *s.cls.no_trading_up;
        Check profit{"profit_bound", s.eq.profit >= pb.profit * W - step, "", step};
        profit.detail = "profit " + format_double(s.eq.profit) + " vs pi(pbar)*W " + format_double(pb.profit * W);
        Check floor{"price_floor", true, "", step};
        floor.passed = price_floor_check(s.eq, pb, step, &floor.detail);
        s.bounds = {profit, floor};
    } else {
        s.bounds.push_back({"profit_bound", true, "no-trading-up region empty; bound vacuous", step});
    }
    return s;
}

json solved_json(const Solved& s) {
    json j;
    j["classification"] = classification_json(s.cls);
    j["profit"] = s.eq.profit;
    j["exhaustion_period"] = s.eq.exhaustion_period ? json(*s.eq.exhaustion_period) : json(nullptr);
    j["residual_trading_up"] = s.eq.residual_trading_up;
    j["nodes"] = s.eq.nodes;
    j["solve_grid_step"] = s.eq.grid_step;
    json checks = json::array();
    for (const auto& c : s.bounds) checks.push_back(check_json(c));
    j["bound_checks"] = checks;
    return j;
}

int cmd_solve(const Options& o) {
    const auto t0 = Clock::now();
    const auto sc = load(o);
    auto report = base_report(sc, "solve");
    const auto s = solve(sc);
    report.update(solved_json(s));
    report["table"] = sc.table_name;
    write_file(fs::path(o.out) / sc.table_name, price_table(s.eq));
    std::cout << "profit " << format_double(s.eq.profit) << ", " << s.eq.price_path.size() << " on-path rows, exhaustion "
              << (s.eq.exhaustion_period ? std::to_string(*s.eq.exhaustion_period) : "none") << "\n";
    finish(o, sc, report, t0);
    return 0;
}

json transitional_json(const TransitionalCertificate& c) {
    return {{"passed", c.passed},
            {"precondition_met", c.precondition_met},
            {"consumers_ok", c.consumers_ok},
            {"profit_ok", c.profit_ok},
            {"one_time_change", c.one_time_change},
            {"price_increase", c.price_increase},
            {"extended_monopoly", optimum_json(c.optima.monopoly)},
            {"extended_pbar", optimum_json(c.optima.pbar)},
            {"p0_direct", c.prices.p0_direct},
            {"p1_direct", c.prices.p1_direct},
            {"p1_indirect", c.prices.p1_indirect},
            {"allocation_matches", c.prices.allocation_matches},
            {"plan_profit", c.plan_profit},
            {"target_profit", c.target_profit},
            {"tolerance", c.tolerance},
            {"first_violation", c.first_violation}};
}

bool is_transitional(const Setting& s) {
    try {
        extend(s);
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

int cmd_verify(const Options& o) {
    const auto t0 = Clock::now();
    const auto sc = load(o);
    auto report = base_report(sc, "verify");
    std::vector<Check> checks;
    if (is_transitional(sc.setting)) {
        const auto c = verify_transitional_equilibrium(sc.setting, sc.grid, false);
        report["transitional"] = transitional_json(c);
        checks.push_back({"transitional_precondition", c.precondition_met,
                          "extended monopoly profit " + format_double(c.optima.monopoly.profit) + " vs pbar " +
                              format_double(c.optima.pbar.profit),
                          1e-9});
        checks.push_back({"transitional_consumers", c.consumers_ok, c.consumers_ok ? "" : c.first_violation, 1e-9});
        checks.push_back({"transitional_profit", c.profit_ok,
                          "plan " + format_double(c.plan_profit) + " target " + format_double(c.target_profit),
                          c.tolerance});
        checks.push_back({"transitional_allocation", c.prices.allocation_matches, "", 1e-9});
        checks.push_back({"one_time_price_increase", c.one_time_change && c.price_increase,
                          "p0 " + format_double(c.prices.p0_direct) + " p1 " + format_double(c.prices.p1_direct), 1e-9});
    } else {
        const auto s = solve(sc);
        report.update(solved_json(s));
        checks = s.bounds;
        checks.push_back(bellman_check(s.eq));
        checks.push_back(consumer_rationality_check(s.eq, 1e-9));
        checks.push_back(skimming_check(s.eq));
        checks.push_back(decomposition_suite(s.eq));
        const auto& rows = s.eq.residual_trading_up;
        checks.push_back({"exhaustion", true,
                          s.eq.exhaustion_period ? "exhausted at " + std::to_string(*s.eq.exhaustion_period)
                                                 : "residual at T " + format_double(rows.empty() ? 0.0 : rows.back()),
                          0.0});
        if (s.cls.monopoly_strategies_apply()) {
            const auto m = verify_monopoly_pbe(sc.setting, sc.grid);
            checks.push_back({"monopoly_pbe", m.passed, m.first_violation.empty()
                                                            ? "plan " + format_double(m.plan_profit) + " target " +
                                                                  format_double(m.target_profit)
                                                            : m.first_violation,
                              1e-9});
            // the solved profit should be the repeated monopoly profit
            const double W = horizon_weight(sc.setting.delta, 0, sc.setting.last_period());
            checks.push_back({"repeated_monopoly_profit",
                              std::abs(s.eq.profit - m.monopoly.profit * W) <= s.eq.grid_step,
                              "solved " + format_double(s.eq.profit) + " vs " + format_double(m.monopoly.profit * W),
                              s.eq.grid_step});
        }
    }
    json table = json::array();
    bool all = true;
    for (const auto& c : checks) {
        table.push_back(check_json(c));
        all &= c.passed;
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (tol " << format_double(c.tolerance) << ")"
                  << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
    }
    report["checks"] = table;
    report["passed"] = all;
    finish(o, sc, report, t0);
    return all ? 0 : kVerification;
}

int cmd_transitional(const Options& o) {
    const auto t0 = Clock::now();
    const auto sc = load(o);
    auto report = base_report(sc, "transitional");
    const auto g = extend(sc.setting);
    const auto c = verify_transitional_equilibrium(sc.setting, sc.grid, false);
    report["alpha"] = g.alpha;
    report["beta"] = g.beta;
    report["transitional"] = transitional_json(c);
    std::cout << "alpha " << format_double(g.alpha) << " beta " << format_double(g.beta) << "\n";
    std::cout << "extended p^m profit " << format_double(c.optima.monopoly.profit) << ", pbar profit "
              << format_double(c.optima.pbar.profit) << (c.precondition_met ? " (coincide)" : " (differ)") << "\n";
    std::cout << "direct price " << format_double(c.prices.p0_direct) << " then " << format_double(c.prices.p1_direct)
              << ", indirect " << format_double(c.prices.p1_indirect) << "\n";
    finish(o, sc, report, t0);
    return 0;
}

int cmd_classify(const Options& o) {
    const auto t0 = Clock::now();
    const auto sc = load(o);
    auto report = base_report(sc, "classify");
    const auto c = classify_setting(sc.setting, sc.grid);
    report["classification"] = classification_json(c);
    std::cout << class_name(c.kind) << ": " << c.reason << "\n";
    finish(o, sc, report, t0);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic pricing with trading up"};
    app.require_subcommand(1);
    Options o;
    std::map<std::string, int (*)(const Options&)> commands{{"static", cmd_static},   {"solve", cmd_solve},
                                                            {"verify", cmd_verify},   {"transitional", cmd_transitional},
                                                            {"classify", cmd_classify}};
    const std::map<std::string, std::string> about{
        {"static", "one-period optima, demand and trading-up report"},
        {"solve", "solve the dynamic game, write the price path table"},
        {"verify", "solve and run the property checks; exit 3 on failure"},
        {"transitional", "extended-game reconstruction and certificate"},
        {"classify", "which equilibrium class the setting falls in"}};
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--scenario", o.scenario, "scenario file")->required();
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--grid-step", o.grid_step, "override the grid step");
        sub->add_option("--horizon", o.horizon, "override the number of periods");
        sub->add_option("--refine", o.refine, "refinement rounds");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kParseError;
    }
    try {
        for (const auto& [name, fn] : commands)
            if (app.got_subcommand(name)) return fn(o);
    } catch (const ScenarioError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParseError;
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget exceeded after " << e.nodes_reached << " nodes: " << e.what() << "\n";
        return kBudget;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCompute;
    }
    return kCompute;
}
