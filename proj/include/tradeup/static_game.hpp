#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tradeup/market_model.hpp"

namespace tradeup {

// Candidate per-period prices for each variety. `points`, when nonempty, replaces lo/hi/step.
struct PriceGridSpec {
    double lo = 0.0;
    double hi = 1.0;
    double step = 0.05;
    std::vector<double> points;
    int refinement_rounds = 0;
    double refinement_factor = 10.0;

    // grid values clipped to [floor, cap], ascending, deduplicated
    std::vector<double> candidates(double floor, double cap) const;
    double coarse_step() const;
    double finest_step() const;
};

struct Allocation {
    std::vector<State> assignment;  // per atom
    std::array<double, 3> segment_measure{0.0, 0.0, 0.0};

    double measure(State s) const { return segment_measure[index_of(s)]; }
};

struct TradingUpInstance {
    std::size_t atom = 0;  // index within the list of its current state
    State current = State::O;
    State target = State::O;
    double gain = 0.0;
};

struct TradingUpReport {
    bool exists = false;
    std::vector<TradingUpInstance> instances;
};

struct StaticOptimum {
    PriceProfile prices;
    double profit = 0.0;
    Allocation allocation;
    double tolerance = 0.0;  // final grid step of the search
};

// States the static game lets consumers in `current` choose, and what each costs.
double choice_cost(const PriceProfile& prices, State current, State choice);

State static_choice(const TypeAtom& atom, const PriceProfile& prices, const Setting& setting,
                    State current_state);
Allocation demand_segments(const TypePopulation& population, const PriceProfile& prices,
                           const Setting& setting, State current_state);
double static_profit(const TypePopulation& population, const PriceProfile& prices,
                     const Setting& setting, State current_state);

// offered flags of the static game played from the initial state
PriceProfile static_profile(const Setting& setting, Vec2 p);

StaticOptimum monopoly_price(const Setting& setting, const PriceGridSpec& spec);
TradingUpReport detect_trading_up(const std::map<State, std::vector<TypeAtom>>& population_by_state,
                                  const TransitionGraph& graph);
// trading-up check over an allocation of the setting's population
bool has_trading_up(const Allocation& allocation, const TypePopulation& population,
                    const TransitionGraph& graph);
bool in_omega(const PriceProfile& prices, const Setting& setting);

class EmptyOmega : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

StaticOptimum pbar(const Setting& setting, const PriceGridSpec& spec);

enum class SettingClass {
    AbsorbingInitial,
    PositiveSelection,
    BoardLike,
    TradingDown,
    NoTUOAtMonopoly,
    TUOAtMonopoly
};

std::string_view class_name(SettingClass c);

struct Classification {
    SettingClass kind = SettingClass::TUOAtMonopoly;
    std::string reason;
    StaticOptimum monopoly;
    std::optional<StaticOptimum> no_trading_up;  // absent when Omega is empty
    std::optional<State> certificate_variety;     // BoardLike: the fixed-price variety
    double certificate_price = 0.0;

    bool monopoly_strategies_apply() const { return kind != SettingClass::TUOAtMonopoly; }
};

Classification classify_setting(const Setting& setting, const PriceGridSpec& spec);

// states reachable from the initial state in any number of steps
std::vector<State> reachable_states(const Setting& setting);

}  // namespace tradeup
