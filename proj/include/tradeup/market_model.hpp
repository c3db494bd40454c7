#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tradeup {

enum class State : std::uint8_t { A = 0, B = 1, O = 2 };

inline constexpr std::array<State, 3> kStates{State::A, State::B, State::O};
inline constexpr std::array<State, 2> kVarieties{State::A, State::B};

using Vec2 = std::array<double, 2>;

constexpr int index_of(State s) { return static_cast<int>(s); }
constexpr bool is_variety(State s) { return s != State::O; }
constexpr Vec2 unit(State s) {
    switch (s) {
        case State::A: return {1.0, 0.0};
        case State::B: return {0.0, 1.0};
        default: return {0.0, 0.0};
    }
}
inline double dot(const Vec2& x, const Vec2& y) { return x[0] * y[0] + x[1] * y[1]; }

char state_char(State s);
std::string_view state_name(State s);
State parse_state(std::string_view name);

class TransitionGraph {
public:
    TransitionGraph();  // self-loops only
    explicit TransitionGraph(const std::vector<std::pair<State, State>>& arcs);

    bool admits(State from, State to) const { return adm_[index_of(from)][index_of(to)]; }
    // states reachable in one step, including the self-loop, in A, B, O order
    std::vector<State> successors(State from) const;
    bool is_absorbing(State s) const;
    std::vector<std::pair<State, State>> arcs() const;
    bool operator==(const TransitionGraph&) const = default;

private:
    std::array<std::array<bool, 3>, 3> adm_{};
};

bool is_admissible(const TransitionGraph& graph, State from, State to);

struct TypeAtom {
    double va = 0.0;
    double vb = 0.0;
    double mass = 0.0;

    Vec2 values() const { return {va, vb}; }
    double value_of(State s) const { return s == State::A ? va : s == State::B ? vb : 0.0; }
    bool operator==(const TypeAtom&) const = default;
};

class TypePopulation {
public:
    TypePopulation() = default;
    explicit TypePopulation(std::vector<TypeAtom> atoms);  // validates

    const std::vector<TypeAtom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    const TypeAtom& operator[](std::size_t i) const { return atoms_[i]; }
    double min_value(State variety) const;
    double max_value(State variety) const;
    bool operator==(const TypePopulation&) const = default;

    // equal-mass atoms at cell midpoints (i+0.5)/n of the unit square
    static TypePopulation uniform_full(int n);
    // equal-mass closed lattice lo + i*(hi-lo)/(n-1), endpoints included
    static TypePopulation lattice(int n, double lo, double hi);
    static TypePopulation lattice(int n, Vec2 lo, Vec2 hi);
    // band v_b = intercept + slope*v_a (+/- width/2), n points along v_a, clipped to [0,1]
    static TypePopulation linear_band(int n, double intercept, double slope, double width = 0.0,
                                      int thickness = 1);

private:
    std::vector<TypeAtom> atoms_;
};

enum class SettingKind {
    TwoRentals,
    TwoDurables,
    Mixed,
    SingleDurable,
    PositiveSelection,
    BoardLike,
    TradingDown,
    Transitional
};

std::string_view kind_name(SettingKind k);
SettingKind parse_kind(std::string_view name);

struct Setting {
    State initial_state = State::O;
    TransitionGraph graph;
    TypePopulation population;
    double delta = 0.9;
    int horizon = 1;  // periods t = 0..horizon-1
    double price_floor = -1.0;
    // per-period caps; absorbing varieties scale them by the horizon weight at the sale period
    Vec2 price_cap{1.0, 1.0};
    // administratively fixed per-period prices, scaled like the caps
    std::array<std::optional<double>, 2> fixed_price{};

    int last_period() const { return horizon - 1; }
    void validate() const;
    bool operator==(const Setting&) const = default;
};

Setting canonical_setting(SettingKind kind, TypePopulation population, double delta, int horizon);

struct ConsumptionPath {
    int start_period = 0;
    State previous = State::O;  // state occupied before start_period
    std::vector<State> choices;
    bool operator==(const ConsumptionPath&) const = default;
};

// Posted prices in one period. An absorbing variety's component is the one-shot entry price.
struct PriceProfile {
    Vec2 p{0.0, 0.0};
    std::array<bool, 2> offered{false, false};

    double price(State s) const { return is_variety(s) ? p[index_of(s)] : 0.0; }
    bool is_offered(State s) const { return is_variety(s) && offered[index_of(s)]; }
    bool operator==(const PriceProfile&) const = default;
};

class EnumerationBudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double horizon_weight(double delta, int t, int T);

std::vector<ConsumptionPath> enumerate_paths(const Setting& setting, State from_state, int t,
                                             std::size_t budget = 1u << 20);

Vec2 total_consumption(const ConsumptionPath& path, double delta, int T);
// prices[k] is the profile posted in period start_period + k
double total_payment(const ConsumptionPath& path, const std::vector<PriceProfile>& prices,
                     double delta, const TransitionGraph& graph);
double total_value(const TypeAtom& atom, const ConsumptionPath& path, double delta, int T);

std::string path_string(const ConsumptionPath& path);

// Varieties without an exit to o are sold once; their per-period price is scaled by the
// horizon weight of the sale period.
bool sold_once(const Setting& setting, State variety);
// multiplier turning a per-period price into the price posted at t to consumers in `from`;
// 0 when the seller cannot charge for that choice
double price_scale(const Setting& setting, int t, State from, State variety);
PriceProfile posted_profile(const Setting& setting, int t, State from, Vec2 per_period);

}  // namespace tradeup
