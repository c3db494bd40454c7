#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tradeup/dynamic_solver.hpp"

namespace tradeup {

// Static game where the indirect variety is replaced by a mixed option:
// one period of the direct variety, then the indirect one forever.
struct ExtendedStaticGame {
    Setting base;
    Setting extended;  // mixed-varieties static game over (v_direct, v_mixed)
    double alpha = 1.0;
    double beta = 0.0;
    State direct = State::A;
    State indirect = State::B;

    double mixed_value(const TypeAtom& a) const;
};

ExtendedStaticGame extend(const Setting& setting);

struct ExtendedOptima {
    StaticOptimum monopoly;
    StaticOptimum pbar;
    // repeated monopoly profit equals the no-trading-up optimum
    bool coincide(double tol) const { return monopoly.profit - pbar.profit <= tol; }
};

ExtendedOptima solve_extended(const ExtendedStaticGame& game, const PriceGridSpec& spec);

struct ReconstructedPrices {
    double p0_direct = 0.0;
    double p1_direct = 0.0;
    double p1_indirect = 0.0;  // per-period equivalent
    bool allocation_matches = false;
};

// p0 defaults to the smallest direct-variety value
ReconstructedPrices reconstruct_prices(const StaticOptimum& pbar_e, const Setting& setting,
                                       std::optional<double> p0 = std::nullopt);

// per-period price plan: p0 for the direct variety at t=0, the reconstructed pair afterwards
PricePlan transitional_plan(const ExtendedStaticGame& game, const ReconstructedPrices& prices);

struct TransitionalCertificate {
    bool passed = false;
    bool precondition_met = false;
    bool consumers_ok = false;
    bool profit_ok = false;
    bool one_time_change = false;  // the direct price moves once, after period 0, and stays
    bool price_increase = false;
    ExtendedOptima optima;
    ReconstructedPrices prices;
    double plan_profit = 0.0;
    double target_profit = 0.0;
    double tolerance = 0.0;
    std::string first_violation;
};

// Throws PreconditionFailed when the extended optima differ, unless require_precondition is off;
// then the plan is still simulated but the certificate cannot pass.
TransitionalCertificate verify_transitional_equilibrium(const Setting& setting, const PriceGridSpec& spec,
                                                        bool require_precondition = true);

}  // namespace tradeup
