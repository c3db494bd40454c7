#pragma once

#include <map>

#include "tradeup/dynamic_solver.hpp"

namespace tradeup {

struct OracleInstance {
    Setting setting;
    PriceGridSpec grid;
    std::size_t enumeration_budget = 20'000'000;  // (partition, price) pairs examined
};

class NoSurvivingProfile : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Exhaustive pure-strategy search: every consumer partition at every grid price, consumers
// checked against every continuation path. Throws BudgetExceeded or NoSurvivingProfile.
EquilibriumOutcome brute_force_pbe(const OracleInstance& instance);

enum class AnalyticFamily { SingleDurableUniform, TwoRentalsUniform, MixedUniform };

StaticOptimum analytic_static_oracle(AnalyticFamily family);

struct DensitySpec {
    enum class Kind { UniformSquare, LinearBand };
    Kind kind = Kind::UniformSquare;
    // band: |v_b - (intercept + slope * v_a)| <= width / 2
    double intercept = 0.0;
    double slope = 1.0;
    double width = 0.1;
};

// segment measures of the static game from the initial state, by adaptive quadrature
std::map<State, double> integrate_segments(const DensitySpec& density, const PriceProfile& prices,
                                           const Setting& setting, int max_depth = 12);

}  // namespace tradeup
