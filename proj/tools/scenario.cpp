#include "scenario.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tradeup {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ScenarioError(where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(where, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) fail(where, "unknown key '" + k + "'");
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    return j.get<int>();
}

std::string text(const json& j, const std::string& where) {
    if (!j.is_string()) fail(where, "expected a string");
    return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where, std::size_t size = 0) {
    if (!j.is_array()) fail(where, "expected an array");
    if (size && j.size() != size) fail(where, "expected " + std::to_string(size) + " entries");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

State state(const json& j, const std::string& where) {
    try {
        return parse_state(text(j, where));
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
}

TypePopulation population(const json& j) {
    const std::string w = "population";
    only_keys(j, w, {"uniform_full", "lattice", "atoms", "linear_band"});
    if (j.size() != 1) fail(w, "give exactly one of uniform_full, lattice, atoms, linear_band");
    try {
        if (j.contains("uniform_full")) return TypePopulation::uniform_full(integer(j["uniform_full"], w + ".uniform_full"));
        if (j.contains("lattice")) {
            const auto& l = j["lattice"];
            only_keys(l, w + ".lattice", {"n", "lo", "hi"});
            const int n = integer(l.at("n"), w + ".lattice.n");
            const double lo = l.contains("lo") ? number(l["lo"], w + ".lattice.lo") : 0.0;
            const double hi = l.contains("hi") ? number(l["hi"], w + ".lattice.hi") : 1.0;
            return TypePopulation::lattice(n, lo, hi);
        }
        if (j.contains("linear_band")) {
            const auto& b = j["linear_band"];
            only_keys(b, w + ".linear_band", {"n", "intercept", "slope", "width", "thickness"});
            return TypePopulation::linear_band(
                integer(b.at("n"), w + ".linear_band.n"), number(b.at("intercept"), w + ".linear_band.intercept"),
                number(b.at("slope"), w + ".linear_band.slope"),
                b.contains("width") ? number(b["width"], w + ".linear_band.width") : 0.0,
                b.contains("thickness") ? integer(b["thickness"], w + ".linear_band.thickness") : 1);
        }
        const auto& a = j["atoms"];
        if (!a.is_array() || a.empty()) fail(w + ".atoms", "expected a nonempty array of [va, vb, mass]");
        std::vector<TypeAtom> atoms;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto v = numbers(a[i], w + ".atoms[" + std::to_string(i) + "]", 3);
            atoms.push_back({v[0], v[1], v[2]});
        }
        return TypePopulation(std::move(atoms));
    } catch (const json::out_of_range& e) {
        fail(w, std::string("missing field: ") + e.what());
    } catch (const std::invalid_argument& e) {
        fail(w, e.what());
    }
}

Scenario from_json(const json& j) {
    only_keys(j, "scenario", {"setting", "population", "delta", "horizon", "price_floor", "price_caps",
                              "fixed_prices", "grid", "solver", "outputs"});
    for (const char* k : {"setting", "population", "delta", "horizon"})
        if (!j.contains(k)) fail("scenario", std::string("missing '") + k + "'");
    Scenario sc;
    const auto pop = population(j["population"]);
    const double delta = number(j["delta"], "delta");
    const int horizon = integer(j["horizon"], "horizon");

    const auto& s = j["setting"];
    only_keys(s, "setting", {"kind", "graph", "initial_state"});
    Setting setting;
    if (s.contains("kind")) {
        if (s.contains("graph")) fail("setting", "give either kind or graph, not both");
        const auto name = text(s["kind"], "setting.kind");
        try {
            setting = canonical_setting(parse_kind(name), pop, 0.5, 1);
        } catch (const std::invalid_argument& e) {
            fail("setting.kind", e.what());
        }
        sc.kind = name;
    } else {
        if (!s.contains("graph")) fail("setting", "need kind or graph");
        const auto& g = s["graph"];
        if (!g.is_array()) fail("setting.graph", "expected an array of [from, to] arcs");
        std::vector<std::pair<State, State>> arcs;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::string w = "setting.graph[" + std::to_string(i) + "]";
            if (!g[i].is_array() || g[i].size() != 2) fail(w, "expected [from, to]");
            arcs.emplace_back(state(g[i][0], w + "[0]"), state(g[i][1], w + "[1]"));
        }
        try {
            setting.graph = TransitionGraph(arcs);
        } catch (const std::invalid_argument& e) {
            fail("setting.graph", e.what());
        }
        setting.population = pop;
    }
    if (s.contains("initial_state")) setting.initial_state = state(s["initial_state"], "setting.initial_state");
    setting.delta = delta;
    setting.horizon = horizon;
    if (j.contains("price_floor")) setting.price_floor = number(j["price_floor"], "price_floor");
    if (j.contains("price_caps")) {
        const auto c = numbers(j["price_caps"], "price_caps", 2);
        setting.price_cap = {c[0], c[1]};
    }
    if (j.contains("fixed_prices")) {
        const auto& f = j["fixed_prices"];
        if (!f.is_array() || f.size() != 2) fail("fixed_prices", "expected [a, b] with null for free prices");
        for (int k = 0; k < 2; ++k)
            setting.fixed_price[k] = f[k].is_null() ? std::nullopt
                                                    : std::optional<double>(number(f[k], "fixed_prices[" + std::to_string(k) + "]"));
    }
    try {
        setting.validate();
    } catch (const std::invalid_argument& e) {
        fail("setting", e.what());
    }
    sc.setting = setting;

    if (j.contains("grid")) {
        const auto& g = j["grid"];
        only_keys(g, "grid", {"step", "lo", "hi", "points", "refinement_rounds", "refinement_factor"});
        if (g.contains("step")) sc.grid.step = number(g["step"], "grid.step");
        if (g.contains("lo")) sc.grid.lo = number(g["lo"], "grid.lo");
        if (g.contains("hi")) sc.grid.hi = number(g["hi"], "grid.hi");
        if (g.contains("points")) sc.grid.points = numbers(g["points"], "grid.points");
        if (g.contains("refinement_rounds")) sc.grid.refinement_rounds = integer(g["refinement_rounds"], "grid.refinement_rounds");
        if (g.contains("refinement_factor")) sc.grid.refinement_factor = number(g["refinement_factor"], "grid.refinement_factor");
        if (!(sc.grid.step > 0.0)) fail("grid.step", "must be positive");
        if (sc.grid.refinement_rounds < 0) fail("grid.refinement_rounds", "must be nonnegative");
        if (!(sc.grid.refinement_factor > 1.0)) fail("grid.refinement_factor", "must exceed 1");
    }
    if (j.contains("solver")) {
        const auto& v = j["solver"];
        only_keys(v, "solver", {"budget", "enumeration_limit", "tie_break"});
        if (v.contains("budget")) {
            const int b = integer(v["budget"], "solver.budget");
            if (b < 1) fail("solver.budget", "must be positive");
            sc.solver.node_budget = static_cast<std::size_t>(b);
        }
        if (v.contains("enumeration_limit")) {
            const int e = integer(v["enumeration_limit"], "solver.enumeration_limit");
            if (e < 1) fail("solver.enumeration_limit", "must be positive");
            sc.solver.enumeration_limit = static_cast<std::size_t>(e);
        }
        if (v.contains("tie_break") && text(v["tie_break"], "solver.tie_break") != "default")
            fail("solver.tie_break", "only 'default' is supported");
    }
    if (j.contains("outputs")) {
        const auto& o = j["outputs"];
        only_keys(o, "outputs", {"table", "summary", "profiles"});
        if (o.contains("table")) sc.table_name = text(o["table"], "outputs.table");
        if (o.contains("summary")) sc.summary_name = text(o["summary"], "outputs.summary");
        if (o.contains("profiles")) {
            const auto& p = o["profiles"];
            if (!p.is_array()) fail("outputs.profiles", "expected an array of [p_a, p_b]");
            for (std::size_t i = 0; i < p.size(); ++i) {
                const auto v = numbers(p[i], "outputs.profiles[" + std::to_string(i) + "]", 2);
                sc.profiles.push_back({v[0], v[1]});
            }
        }
    }
    return sc;
}

// line and column of a byte offset, for parse diagnostics
std::string position(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

Scenario parse_scenario(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ScenarioError(position(body, e.byte) + ": malformed document (" + e.what() + ")");
    }
    return from_json(j);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError(path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_scenario(ss.str());
    } catch (const ScenarioError& e) {
        throw ScenarioError(path + ": " + e.what());
    }
}

std::string emit_setting(const Setting& s) {
    json j;
    json arcs = json::array();
    for (auto [from, to] : s.graph.arcs()) arcs.push_back({state_name(from), state_name(to)});
    j["setting"] = {{"graph", arcs}, {"initial_state", state_name(s.initial_state)}};
    json atoms = json::array();
    for (const auto& a : s.population.atoms()) atoms.push_back({a.va, a.vb, a.mass});
    j["population"] = {{"atoms", atoms}};
    j["delta"] = s.delta;
    j["horizon"] = s.horizon;
    j["price_floor"] = s.price_floor;
    j["price_caps"] = {s.price_cap[0], s.price_cap[1]};
    json fixed = json::array();
    for (const auto& f : s.fixed_price) fixed.push_back(f ? json(*f) : json(nullptr));
    j["fixed_prices"] = fixed;
    return j.dump(2) + "\n";
}

Setting parse_setting(const std::string& text) { return parse_scenario(text).setting; }

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string price_table(const EquilibriumOutcome& eq) {
    std::string out = "period,history_signature,state,p_a,p_b,mass_a,mass_b,mass_o,traded_up_mass\n";
    for (const auto& r : eq.price_path) {
        out += std::to_string(r.period) + ',' + r.signature + ',' + std::string(state_name(r.state)) + ',';
        out += (r.prices.offered[0] ? format_double(r.prices.p[0]) : "") + ',';
        out += (r.prices.offered[1] ? format_double(r.prices.p[1]) : "") + ',';
        for (int k = 0; k < 3; ++k) out += format_double(r.mass[k]) + ',';
        out += format_double(r.traded_up_mass) + '\n';
    }
    return out;
}

}  // namespace tradeup
