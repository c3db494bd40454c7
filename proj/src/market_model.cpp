#include "tradeup/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tradeup {

char state_char(State s) { return "abo"[index_of(s)]; }

std::string_view state_name(State s) {
    static constexpr std::array<std::string_view, 3> names{"a", "b", "o"};
    return names[index_of(s)];
}

State parse_state(std::string_view name) {
    if (name == "a" || name == "A") return State::A;
    if (name == "b" || name == "B") return State::B;
    if (name == "o" || name == "O") return State::O;
    throw std::invalid_argument("unknown state '" + std::string(name) + "'");
}

TransitionGraph::TransitionGraph() {
    for (State s : kStates) adm_[index_of(s)][index_of(s)] = true;
}

TransitionGraph::TransitionGraph(const std::vector<std::pair<State, State>>& arcs) {
    for (auto [from, to] : arcs) adm_[index_of(from)][index_of(to)] = true;
    for (State s : kStates)
        if (!adm_[index_of(s)][index_of(s)])
            throw std::invalid_argument(std::string("graph lacks the self-loop (") + state_char(s) +
                                        "," + state_char(s) + ")");
}

std::vector<State> TransitionGraph::successors(State from) const {
    std::vector<State> out;
    for (State s : kStates)
        if (admits(from, s)) out.push_back(s);
    return out;
}

bool TransitionGraph::is_absorbing(State s) const {
    for (State t : kStates)
        if (t != s && admits(s, t)) return false;
    return true;
}

std::vector<std::pair<State, State>> TransitionGraph::arcs() const {
    std::vector<std::pair<State, State>> out;
    for (State f : kStates)
        for (State t : kStates)
            if (admits(f, t)) out.emplace_back(f, t);
    return out;
}

bool is_admissible(const TransitionGraph& graph, State from, State to) {
    return graph.admits(from, to);
}

TypePopulation::TypePopulation(std::vector<TypeAtom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw std::invalid_argument("population has no atoms");
    double total = 0.0;
    std::set<std::pair<double, double>> seen;
    for (const auto& a : atoms_) {
        if (!(a.va >= 0.0 && a.va <= 1.0 && a.vb >= 0.0 && a.vb <= 1.0))
            throw std::invalid_argument("atom values must lie in [0,1]");
        if (!(a.mass >= 0.0)) throw std::invalid_argument("atom mass must be nonnegative");
        if (!seen.emplace(a.va, a.vb).second)
            throw std::invalid_argument("duplicate atom (" + std::to_string(a.va) + "," +
                                        std::to_string(a.vb) + ")");
        total += a.mass;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("population mass is " + std::to_string(total) + ", expected 1");
}

double TypePopulation::min_value(State variety) const {
    double m = 1.0;
    for (const auto& a : atoms_) m = std::min(m, a.value_of(variety));
    return m;
}

double TypePopulation::max_value(State variety) const {
    double m = 0.0;
    for (const auto& a : atoms_) m = std::max(m, a.value_of(variety));
    return m;
}

TypePopulation TypePopulation::uniform_full(int n) {
    if (n < 1) throw std::invalid_argument("grid resolution must be positive");
    std::vector<TypeAtom> atoms;
    atoms.reserve(static_cast<std::size_t>(n) * n);
    const double m = 1.0 / (static_cast<double>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) atoms.push_back({(i + 0.5) / n, (j + 0.5) / n, m});
    return TypePopulation(std::move(atoms));
}

TypePopulation TypePopulation::lattice(int n, double lo, double hi) {
    return lattice(n, Vec2{lo, lo}, Vec2{hi, hi});
}

TypePopulation TypePopulation::lattice(int n, Vec2 lo, Vec2 hi) {
    if (n < 2) throw std::invalid_argument("lattice needs at least 2 points per side");
    std::vector<TypeAtom> atoms;
    atoms.reserve(static_cast<std::size_t>(n) * n);
    const double m = 1.0 / (static_cast<double>(n) * n);
    auto at = [n](double l, double h, int i) { return i == n - 1 ? h : l + (h - l) * i / (n - 1); };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) atoms.push_back({at(lo[0], hi[0], i), at(lo[1], hi[1], j), m});
    return TypePopulation(std::move(atoms));
}

TypePopulation TypePopulation::linear_band(int n, double intercept, double slope, double width,
                                           int thickness) {
    if (n < 1 || thickness < 1) throw std::invalid_argument("band resolution must be positive");
    if (thickness > 1 && !(width > 0.0)) throw std::invalid_argument("thick band needs a width");
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < n; ++i) {
        const double va = (i + 0.5) / n;
        for (int k = 0; k < thickness; ++k) {
            const double off = thickness == 1 ? 0.0 : width * ((k + 0.5) / thickness - 0.5);
            const double vb = intercept + slope * va + off;
            if (vb < 0.0 || vb > 1.0) continue;
            pts.emplace_back(va, vb);
        }
    }
    if (pts.empty()) throw std::invalid_argument("band leaves the unit square entirely");
    std::vector<TypeAtom> atoms;
    const double m = 1.0 / static_cast<double>(pts.size());
    for (auto [va, vb] : pts) atoms.push_back({va, vb, m});
    return TypePopulation(std::move(atoms));
}

namespace {
constexpr std::array<std::pair<SettingKind, std::string_view>, 8> kKindNames{{
    {SettingKind::TwoRentals, "two_rentals"},
    {SettingKind::TwoDurables, "two_durables"},
    {SettingKind::Mixed, "mixed"},
    {SettingKind::SingleDurable, "single_durable"},
    {SettingKind::PositiveSelection, "positive_selection"},
    {SettingKind::BoardLike, "board_like"},
    {SettingKind::TradingDown, "trading_down"},
    {SettingKind::Transitional, "transitional"},
}};
}  // namespace

std::string_view kind_name(SettingKind k) {
    for (auto [kind, name] : kKindNames)
        if (kind == k) return name;
    return "?";
}

SettingKind parse_kind(std::string_view name) {
    for (auto [kind, n] : kKindNames)
        if (n == name) return kind;
    throw std::invalid_argument("unknown setting kind '" + std::string(name) + "'");
}

void Setting::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (!(price_floor < 0.0)) throw std::invalid_argument("price floor must be negative");
    for (State i : kVarieties) {
        const int k = index_of(i);
        if (!(price_cap[k] > price_floor))
            throw std::invalid_argument("price cap must exceed the price floor");
        if (fixed_price[k] && (*fixed_price[k] < price_floor || *fixed_price[k] > price_cap[k]))
            throw std::invalid_argument("fixed price outside [floor, cap]");
    }
    if (population.size() == 0) throw std::invalid_argument("empty population");
}

Setting canonical_setting(SettingKind kind, TypePopulation population, double delta, int horizon) {
    using S = State;
    const std::vector<std::pair<S, S>> loops{{S::A, S::A}, {S::B, S::B}, {S::O, S::O}};
    auto with = [&](std::vector<std::pair<S, S>> extra) {
        extra.insert(extra.end(), loops.begin(), loops.end());
        return TransitionGraph(extra);
    };
    Setting s;
    s.population = std::move(population);
    s.delta = delta;
    s.horizon = horizon;
    switch (kind) {
        case SettingKind::TwoRentals:
            s.initial_state = S::O;
            s.graph = with({{S::O, S::A}, {S::O, S::B}, {S::A, S::O}, {S::A, S::B},
                            {S::B, S::O}, {S::B, S::A}});
            break;
        case SettingKind::TwoDurables:
            s.initial_state = S::O;
            s.graph = with({{S::O, S::A}, {S::O, S::B}});
            break;
        case SettingKind::Mixed:
            s.initial_state = S::O;
            s.graph = with({{S::O, S::A}, {S::A, S::O}, {S::A, S::B}, {S::O, S::B}});
            break;
        case SettingKind::SingleDurable:
            s.initial_state = S::O;
            s.graph = with({{S::O, S::A}});
            break;
        case SettingKind::PositiveSelection:
            s.initial_state = S::A;
            s.graph = with({{S::A, S::O}});
            break;
        case SettingKind::BoardLike: {
            s.initial_state = S::O;
            s.graph = with({{S::O, S::A}, {S::O, S::B}});
            const double lo = s.population.min_value(S::B);
            s.fixed_price[index_of(S::B)] = lo > 0.0 ? 0.0 : lo - 0.01;
            break;
        }
        case SettingKind::TradingDown:
            s.initial_state = S::A;
            s.graph = with({{S::A, S::B}, {S::A, S::O}, {S::B, S::O}});
            break;
        case SettingKind::Transitional:
            s.initial_state = S::O;
            s.graph = with({{S::O, S::A}, {S::A, S::O}, {S::A, S::B}});
            break;
    }
    s.validate();
    return s;
}

double horizon_weight(double delta, int t, int T) {
    if (t < 0 || t > T) throw std::out_of_range("period outside 0..T");
    double w = 0.0, d = 1.0;
    for (int tau = t; tau <= T; ++tau) {
        w += d;
        d *= delta;
    }
    return w;
}

std::vector<ConsumptionPath> enumerate_paths(const Setting& setting, State from_state, int t,
                                             std::size_t budget) {
    const int T = setting.last_period();
    if (t < 0 || t > T) throw std::out_of_range("period outside 0..T");
    std::vector<ConsumptionPath> out;
    ConsumptionPath cur{t, from_state, {}};
    const auto extend = [&](auto&& self, State prev) -> void {
        if (static_cast<int>(cur.choices.size()) == T - t + 1) {
            if (out.size() >= budget)
                throw EnumerationBudgetExceeded("path enumeration exceeds budget of " +
                                                std::to_string(budget));
            out.push_back(cur);
            return;
        }
        for (State s : setting.graph.successors(prev)) {
            cur.choices.push_back(s);
            self(self, s);
            cur.choices.pop_back();
        }
    };
    extend(extend, from_state);
    return out;
}

Vec2 total_consumption(const ConsumptionPath& path, double delta, int T) {
    if (path.start_period + static_cast<int>(path.choices.size()) - 1 != T)
        throw std::invalid_argument("path does not end at the last period");
    Vec2 chi{0.0, 0.0};
    double d = 1.0;
    for (State s : path.choices) {
        const Vec2 u = unit(s);
        chi[0] += d * u[0];
        chi[1] += d * u[1];
        d *= delta;
    }
    return chi;
}

double total_payment(const ConsumptionPath& path, const std::vector<PriceProfile>& prices,
                     double delta, const TransitionGraph& graph) {
    if (prices.size() < path.choices.size())
        throw std::invalid_argument("one price profile per period is required");
    double rho = 0.0, d = 1.0;
    State prev = path.previous;
    for (std::size_t k = 0; k < path.choices.size(); ++k) {
        const State s = path.choices[k];
        const double p = prices[k].price(s);
        if (is_variety(s) && s == prev && !graph.admits(s, State::O) && p != 0.0)
            throw std::invalid_argument(std::string("nonzero price for the already-held variety ") +
                                        state_char(s));
        rho += d * p;
        d *= delta;
        prev = s;
    }
    return rho;
}

double total_value(const TypeAtom& atom, const ConsumptionPath& path, double delta, int T) {
    return dot(atom.values(), total_consumption(path, delta, T));
}

std::string path_string(const ConsumptionPath& path) {
    std::string s;
    for (State x : path.choices) s.push_back(state_char(x));
    return s;
}

bool sold_once(const Setting& setting, State variety) {
    return is_variety(variety) && !setting.graph.admits(variety, State::O);
}

double price_scale(const Setting& setting, int t, State from, State variety) {
    if (!is_variety(variety) || !setting.graph.admits(from, variety)) return 0.0;
    if (variety == from) return setting.graph.admits(from, State::O) ? 1.0 : 0.0;
    return sold_once(setting, variety) ? horizon_weight(setting.delta, t, setting.last_period())
                                       : 1.0;
}

PriceProfile posted_profile(const Setting& setting, int t, State from, Vec2 per_period) {
    PriceProfile pp;
    for (State i : kVarieties) {
        const double k = price_scale(setting, t, from, i);
        if (k == 0.0) continue;
        pp.offered[index_of(i)] = true;
        pp.p[index_of(i)] = per_period[index_of(i)] * k;
    }
    return pp;
}

}  // namespace tradeup
