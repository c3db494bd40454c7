#include "tradeup/static_game.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace tradeup {

namespace {
constexpr double kTieTol = 1e-12;

std::vector<double> ascending_unique(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(),
                        [](double x, double y) { return std::abs(x - y) <= 1e-13; }),
            v.end());
    return v;
}
}  // namespace

std::vector<double> PriceGridSpec::candidates(double floor, double cap) const {
    std::vector<double> out;
    if (!points.empty()) {
        for (double p : points)
            if (p >= floor - 1e-12 && p <= cap + 1e-12) out.push_back(std::clamp(p, floor, cap));
    } else {
        if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
        const double a = std::max(lo, floor), b = std::min(hi, cap);
        const long k0 = static_cast<long>(std::ceil((a - lo) / step - 1e-9));
        for (long k = k0;; ++k) {
            const double p = lo + static_cast<double>(k) * step;
            if (p > b + 1e-9) break;
            out.push_back(std::min(p, b));
        }
    }
    return ascending_unique(std::move(out));
}

double PriceGridSpec::coarse_step() const {
    if (points.empty()) return step;
    auto v = ascending_unique(points);
    double s = 1.0;
    for (std::size_t i = 1; i < v.size(); ++i) s = std::min(s, v[i] - v[i - 1]);
    return s;
}

double PriceGridSpec::finest_step() const {
    double s = coarse_step();
    for (int r = 0; r < refinement_rounds; ++r) s /= refinement_factor;
    return s;
}

double choice_cost(const PriceProfile& prices, State current, State choice) {
    (void)current;
    return prices.is_offered(choice) ? prices.price(choice) : 0.0;
}

namespace {
// seller-favoring order among exactly tied choices: varieties before o, pricier first, a before b
bool preferred_on_tie(State x, double cx, State y, double cy) {
    if (is_variety(x) != is_variety(y)) return is_variety(x);
    if (cx != cy) return cx > cy;
    return index_of(x) < index_of(y);
}

State choose(const Vec2& v, const PriceProfile& prices, const std::vector<State>& options,
             State current) {
    State best = options.front();
    double best_u = dot(v, unit(best)) - choice_cost(prices, current, best);
    double best_c = choice_cost(prices, current, best);
    for (std::size_t k = 1; k < options.size(); ++k) {
        const State y = options[k];
        const double c = choice_cost(prices, current, y);
        const double u = dot(v, unit(y)) - c;
        if (u > best_u + kTieTol || (u >= best_u - kTieTol && preferred_on_tie(y, c, best, best_c))) {
            best = y;
            best_u = std::max(u, best_u);
            best_c = c;
        }
    }
    return best;
}
}  // namespace

State static_choice(const TypeAtom& atom, const PriceProfile& prices, const Setting& setting,
                    State current_state) {
    return choose(atom.values(), prices, setting.graph.successors(current_state), current_state);
}

Allocation demand_segments(const TypePopulation& population, const PriceProfile& prices,
                           const Setting& setting, State current_state) {
    Allocation out;
    const auto options = setting.graph.successors(current_state);
    out.assignment.reserve(population.size());
    for (const auto& a : population.atoms()) {
        const State y = choose(a.values(), prices, options, current_state);
        out.assignment.push_back(y);
        out.segment_measure[index_of(y)] += a.mass;
    }
    return out;
}

double static_profit(const TypePopulation& population, const PriceProfile& prices,
                     const Setting& setting, State current_state) {
    const auto options = setting.graph.successors(current_state);
    double profit = 0.0;
    for (const auto& a : population.atoms()) {
        const State y = choose(a.values(), prices, options, current_state);
        profit += a.mass * choice_cost(prices, current_state, y);
    }
    return profit;
}

PriceProfile static_profile(const Setting& setting, Vec2 p) {
    PriceProfile pp;
    const State x = setting.initial_state;
    for (State i : kVarieties) {
        const bool offered = setting.graph.admits(x, i) &&
                             (i != x || setting.graph.admits(x, State::O));
        pp.offered[index_of(i)] = offered;
        pp.p[index_of(i)] = offered ? p[index_of(i)] : 0.0;
    }
    return pp;
}

bool has_trading_up(const Allocation& allocation, const TypePopulation& population,
                    const TransitionGraph& graph) {
    for (std::size_t k = 0; k < population.size(); ++k) {
        const auto& a = population[k];
        if (!(a.mass > 0.0)) continue;
        const State x = allocation.assignment[k];
        const double vx = a.value_of(x);
        for (State y : graph.successors(x))
            if (a.value_of(y) > vx) return true;
    }
    return false;
}

TradingUpReport detect_trading_up(const std::map<State, std::vector<TypeAtom>>& population_by_state,
                                  const TransitionGraph& graph) {
    TradingUpReport r;
    for (const auto& [x, atoms] : population_by_state) {
        for (std::size_t k = 0; k < atoms.size(); ++k) {
            const auto& a = atoms[k];
            if (!(a.mass > 0.0)) continue;
            for (State y : graph.successors(x)) {
                const double gain = a.value_of(y) - a.value_of(x);
                if (gain > 0.0) r.instances.push_back({k, x, y, gain});
            }
        }
    }
    r.exists = !r.instances.empty();
    return r;
}

namespace {
bool omega_member(const PriceProfile& prices, const Setting& setting) {
    const State x0 = setting.initial_state;
    const auto options = setting.graph.successors(x0);
    std::array<std::vector<State>, 3> up;
    for (State x : kStates) up[index_of(x)] = setting.graph.successors(x);
    for (const auto& a : setting.population.atoms()) {
        if (!(a.mass > 0.0)) continue;
        const State y = choose(a.values(), prices, options, x0);
        const double vy = a.value_of(y);
        for (State z : up[index_of(y)])
            if (a.value_of(z) > vy) return false;
    }
    return true;
}

std::vector<double> axis_candidates(const Setting& setting, const PriceGridSpec& spec, State i,
                                    bool offered) {
    if (!offered) return {0.0};
    const auto& fixed = setting.fixed_price[index_of(i)];
    if (fixed) return {*fixed};
    auto c = spec.candidates(setting.price_floor, setting.price_cap[index_of(i)]);
    if (c.empty()) throw std::invalid_argument("price grid has no candidates inside [floor, cap]");
    return c;
}

std::vector<double> refine_axis(const Setting& setting, const PriceGridSpec& spec, State i,
                                bool offered, double centre, double old_step, double new_step) {
    if (!offered || setting.fixed_price[index_of(i)]) return {centre};
    const double lo = std::max(setting.price_floor, spec.points.empty() ? spec.lo : -1e300);
    const double hi = std::min(setting.price_cap[index_of(i)], spec.points.empty() ? spec.hi : 1e300);
    std::vector<double> out;
    const long n = std::lround(old_step / new_step);
    for (long j = -n; j <= n; ++j) {
        const double p = centre + static_cast<double>(j) * new_step;
        if (p >= lo - 1e-12 && p <= hi + 1e-12) out.push_back(std::clamp(p, lo, hi));
    }
    return ascending_unique(std::move(out));
}

template <class Accept>
std::optional<StaticOptimum> grid_search(const Setting& setting, const PriceGridSpec& spec,
                                         Accept accept) {
    const State x0 = setting.initial_state;
    const PriceProfile shape = static_profile(setting, {0.0, 0.0});
    const bool oa = shape.offered[0], ob = shape.offered[1];
    auto ca = axis_candidates(setting, spec, State::A, oa);
    auto cb = axis_candidates(setting, spec, State::B, ob);

    std::optional<PriceProfile> best;
    double best_profit = 0.0;
    auto scan = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
        std::optional<PriceProfile> round_best;
        double round_profit = 0.0;
        for (double pa : xs)
            for (double pb : ys) {
                const PriceProfile pp = static_profile(setting, {pa, pb});
                if (!accept(pp)) continue;
                const double pi = static_profit(setting.population, pp, setting, x0);
                if (!round_best || pi > round_profit + kTieTol) {
                    round_best = pp;
                    round_profit = pi;
                }
            }
        return std::pair(round_best, round_profit);
    };

    std::tie(best, best_profit) = scan(ca, cb);
    if (!best) return std::nullopt;
    double step = spec.coarse_step();
    for (int r = 0; r < spec.refinement_rounds; ++r) {
        const double next = step / spec.refinement_factor;
        auto ra = refine_axis(setting, spec, State::A, oa, best->p[0], step, next);
        auto rb = refine_axis(setting, spec, State::B, ob, best->p[1], step, next);
        auto [cand, pi] = scan(ra, rb);
        if (cand) {
            best = cand;
            best_profit = pi;
        }
        step = next;
    }
    StaticOptimum out;
    out.prices = *best;
    out.allocation = demand_segments(setting.population, out.prices, setting, x0);
    out.profit = best_profit;
    out.tolerance = spec.finest_step();
    return out;
}
}  // namespace

bool in_omega(const PriceProfile& prices, const Setting& setting) {
    return omega_member(prices, setting);
}

StaticOptimum monopoly_price(const Setting& setting, const PriceGridSpec& spec) {
    auto r = grid_search(setting, spec, [](const PriceProfile&) { return true; });
    if (!r) throw std::invalid_argument("empty candidate set");
    return *r;
}

StaticOptimum pbar(const Setting& setting, const PriceGridSpec& spec) {
    auto r = grid_search(setting, spec,
                         [&](const PriceProfile& pp) { return omega_member(pp, setting); });
    if (!r) throw EmptyOmega("no candidate price profile leaves the static allocation free of trading-up");
    return *r;
}

std::vector<State> reachable_states(const Setting& setting) {
    std::array<bool, 3> seen{};
    std::deque<State> q{setting.initial_state};
    seen[index_of(setting.initial_state)] = true;
    while (!q.empty()) {
        const State x = q.front();
        q.pop_front();
        for (State y : setting.graph.successors(x))
            if (!seen[index_of(y)]) {
                seen[index_of(y)] = true;
                q.push_back(y);
            }
    }
    std::vector<State> out;
    for (State s : kStates)
        if (seen[index_of(s)]) out.push_back(s);
    return out;
}

std::string_view class_name(SettingClass c) {
    switch (c) {
        case SettingClass::AbsorbingInitial: return "absorbing_initial";
        case SettingClass::PositiveSelection: return "positive_selection";
        case SettingClass::BoardLike: return "board_like";
        case SettingClass::TradingDown: return "trading_down";
        case SettingClass::NoTUOAtMonopoly: return "no_tuo_at_monopoly";
        case SettingClass::TUOAtMonopoly: return "tuo_at_monopoly";
    }
    return "?";
}

Classification classify_setting(const Setting& setting, const PriceGridSpec& spec) {
    Classification c;
    c.monopoly = monopoly_price(setting, spec);
    try {
        c.no_trading_up = pbar(setting, spec);
    } catch (const EmptyOmega&) {
    }

    const State x0 = setting.initial_state;
    const auto reach = reachable_states(setting);
    std::vector<State> others;
    for (State s : reach)
        if (s != x0) others.push_back(s);
    const auto& atoms = setting.population.atoms();
    auto all_atoms = [&](auto pred) { return std::all_of(atoms.begin(), atoms.end(), pred); };
    const bool others_absorbing = std::all_of(others.begin(), others.end(), [&](State s) {
        return setting.graph.is_absorbing(s);
    });

    if (setting.graph.is_absorbing(x0)) {
        c.kind = SettingClass::AbsorbingInitial;
        c.reason = "initial state is absorbing";
        return c;
    }
    if (others_absorbing && all_atoms([&](const TypeAtom& a) {
            return std::all_of(others.begin(), others.end(),
                               [&](State s) { return a.value_of(x0) >= a.value_of(s); });
        })) {
        c.kind = SettingClass::PositiveSelection;
        c.reason = "initial state weakly most preferred, every other reachable state absorbing";
        return c;
    }
    if (others_absorbing && all_atoms([&](const TypeAtom& a) {
            return std::all_of(others.begin(), others.end(),
                               [&](State s) { return a.value_of(x0) <= a.value_of(s); });
        })) {
        for (State i : others) {
            const auto& f = setting.fixed_price[index_of(i)];
            if (f && setting.graph.admits(x0, i) && *f < setting.population.min_value(i)) {
                c.kind = SettingClass::BoardLike;
                c.certificate_variety = i;
                c.certificate_price = *f;
                c.reason = std::string("variety ") + state_char(i) +
                           " fixed below its minimum value guarantees positive utility";
                return c;
            }
        }
    }
    bool down = true;
    for (State x : reach)
        for (State y : setting.graph.successors(x))
            if (y != x && !all_atoms([&](const TypeAtom& a) { return a.value_of(y) <= a.value_of(x); }))
                down = false;
    if (down) {
        c.kind = SettingClass::TradingDown;
        c.reason = "every admissible transition leads to a weakly less valued state";
        return c;
    }
    if (in_omega(c.monopoly.prices, setting) ||
        (c.no_trading_up && std::abs(c.no_trading_up->profit - c.monopoly.profit) <= kTieTol)) {
        c.kind = SettingClass::NoTUOAtMonopoly;
        c.reason = "monopoly allocation leaves no trading-up opportunity";
    } else {
        c.kind = SettingClass::TUOAtMonopoly;
        c.reason = c.no_trading_up ? "monopoly allocation leaves trading-up opportunities"
                                   : "no price profile avoids trading-up in the static game";
    }
    return c;
}

}  // namespace tradeup
