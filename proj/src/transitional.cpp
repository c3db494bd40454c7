#include "tradeup/transitional.hpp"

#include <algorithm>
#include <cmath>

namespace tradeup {

double ExtendedStaticGame::mixed_value(const TypeAtom& a) const {
    return alpha * a.value_of(direct) + beta * a.value_of(indirect);
}

ExtendedStaticGame extend(const Setting& setting) {
    setting.validate();
    const auto& g = setting.graph;
    const State start = setting.initial_state;
    const auto reach = reachable_states(setting);
    std::vector<State> indirect;
    for (State i : kVarieties)
        if (std::find(reach.begin(), reach.end(), i) != reach.end() && !g.admits(start, i)) indirect.push_back(i);
    if (indirect.empty()) throw std::invalid_argument("no indirectly accessible variety: not a transitional game");
    if (indirect.size() == 2) throw std::invalid_argument("both varieties are only indirectly accessible");

    ExtendedStaticGame game;
    game.base = setting;
    game.indirect = indirect[0];
    game.direct = game.indirect == State::A ? State::B : State::A;
    const State d = game.direct, x = game.indirect;
    // only the rental-then-durable topology: o <-> direct, direct -> indirect, indirect absorbing
    if (start != State::O || !g.admits(State::O, d) || !g.admits(d, State::O) || !g.admits(d, x) ||
        !g.is_absorbing(x))
        throw std::invalid_argument(
            "unsupported transitional topology: need o <-> direct, direct -> indirect, indirect absorbing");

    const int T = setting.last_period();
    const double W = horizon_weight(setting.delta, 0, T);
    game.alpha = 1.0 / W;
    game.beta = 1.0 - game.alpha;  // (W-1)/W, written so the weights sum to exactly 1

    std::vector<TypeAtom> atoms;
    for (const auto& a : setting.population.atoms()) {
        TypeAtom e = a;
        // convex combination, kept inside [0,1] against rounding
        const double mix = std::clamp(game.mixed_value(a), 0.0, 1.0);
        (x == State::B ? e.vb : e.va) = mix;
        atoms.push_back(e);
    }
    game.extended = setting;
    game.extended.population = TypePopulation(std::move(atoms));
    game.extended.graph = TransitionGraph({{State::O, State::O}, {State::A, State::A}, {State::B, State::B},
                                           {State::O, d}, {d, State::O}, {d, x}, {State::O, x}});
    return game;
}

ExtendedOptima solve_extended(const ExtendedStaticGame& game, const PriceGridSpec& spec) {
    return {monopoly_price(game.extended, spec), pbar(game.extended, spec)};
}

ReconstructedPrices reconstruct_prices(const StaticOptimum& pbar_e, const Setting& setting,
                                       std::optional<double> p0) {
    const auto game = extend(setting);
    const double floor_value = setting.population.min_value(game.direct);
    const double start = p0.value_or(floor_value);
    if (start > floor_value)
        throw std::invalid_argument("period-0 price exceeds the smallest direct-variety value");
    if (setting.horizon < 2) throw std::invalid_argument("reconstruction needs at least two periods");
    const double W = horizon_weight(setting.delta, 0, setting.last_period());
    ReconstructedPrices r;
    r.p0_direct = start;
    r.p1_direct = (pbar_e.prices.price(game.direct) * W - start) / (W - 1.0);
    r.p1_indirect = (pbar_e.prices.price(game.indirect) * W - start) / (W - 1.0);

    // from period 1 on, direct vs indirect reduces to the extended comparison
    r.allocation_matches = true;
    const auto& atoms = setting.population.atoms();
    const auto alloc = demand_segments(game.extended.population, pbar_e.prices, game.extended, State::O);
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        const State want = alloc.assignment[k];
        if (want == State::O) continue;
        const double stay = atoms[k].value_of(game.direct) - r.p1_direct;
        const double move = atoms[k].value_of(game.indirect) - r.p1_indirect;
        const bool picks_mixed = want == game.indirect;
        if ((picks_mixed && move < stay - 1e-9) || (!picks_mixed && stay < move - 1e-9))
            r.allocation_matches = false;
    }
    return r;
}

PricePlan transitional_plan(const ExtendedStaticGame& game, const ReconstructedPrices& prices) {
    const int d = index_of(game.direct), x = index_of(game.indirect);
    return [d, x, prices](int t, State) {
        Vec2 p{0.0, 0.0};
        p[d] = t == 0 ? prices.p0_direct : prices.p1_direct;
        p[x] = prices.p1_indirect;
        return p;
    };
}

TransitionalCertificate verify_transitional_equilibrium(const Setting& setting, const PriceGridSpec& spec,
                                                        bool require_precondition) {
    const auto game = extend(setting);
    TransitionalCertificate cert;
    cert.optima = solve_extended(game, spec);
    cert.tolerance = spec.finest_step();
    cert.precondition_met = cert.optima.coincide(1e-9);
    if (!cert.precondition_met && require_precondition)
        throw PreconditionFailed("extended monopoly profit " + std::to_string(cert.optima.monopoly.profit) +
                                 " exceeds the no-trading-up optimum " +
                                 std::to_string(cert.optima.pbar.profit));

    cert.prices = reconstruct_prices(cert.optima.pbar, setting);
    const auto plan = transitional_plan(game, cert.prices);
    const int T = setting.last_period();
    const double W = horizon_weight(setting.delta, 0, T);
    cert.target_profit = W * cert.optima.pbar.profit;

    // the path each atom takes in the extended allocation
    auto intended = [&](State ext) {
        ConsumptionPath p{0, setting.initial_state, {}};
        for (int t = 0; t <= T; ++t)
            p.choices.push_back(ext == State::O ? State::O : (ext == game.indirect && t > 0 ? game.indirect : game.direct));
        return p;
    };
    auto payment = [&](const ConsumptionPath& p) {
        double rho = 0.0, disc = 1.0;
        State prev = p.previous;
        for (int t = 0; t <= T; ++t) {
            const auto pp = posted_profile(setting, t, prev, plan(t, prev));
            const State y = p.choices[t];
            rho += disc * (pp.is_offered(y) ? pp.price(y) : 0.0);
            disc *= setting.delta;
            prev = y;
        }
        return rho;
    };

    const auto classes = merge_classes(setting);
    const auto best = simulate_plan(setting, classes, plan);
    cert.consumers_ok = true;
    const auto& atoms = setting.population.atoms();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const std::size_t k = classes[c].atoms.front();
        const auto path = intended(cert.optima.pbar.allocation.assignment.at(k));
        const double rho = payment(path);
        cert.plan_profit += classes[c].mass * rho;
        const double u = dot(classes[c].v, total_consumption(path, setting.delta, T)) - rho;
        if (u < best.utility[c] - 1e-9 && cert.consumers_ok) {
            cert.consumers_ok = false;
            cert.first_violation = "atom (" + std::to_string(atoms[k].va) + "," + std::to_string(atoms[k].vb) +
                                   ") prefers " + path_string(best.paths[c]) + " to " + path_string(path);
        }
    }
    cert.profit_ok = std::abs(cert.plan_profit - cert.target_profit) <= cert.tolerance;
    cert.one_time_change = true;
    const double p1 = plan(1, game.direct)[index_of(game.direct)];
    for (int t = 2; t <= T; ++t)
        if (plan(t, game.direct) != plan(1, game.direct)) cert.one_time_change = false;
    cert.price_increase = p1 > cert.prices.p0_direct + 1e-9;
    cert.passed = cert.precondition_met && cert.consumers_ok && cert.profit_ok && cert.prices.allocation_matches;
    if (cert.first_violation.empty()) {
        if (!cert.precondition_met) cert.first_violation = "extended monopoly and no-trading-up optima differ";
        else if (!cert.prices.allocation_matches) cert.first_violation = "period-1 choices differ from the extended allocation";
        else if (!cert.profit_ok) cert.first_violation = "plan profit differs from the target";
    }
    return cert;
}

}  // namespace tradeup
