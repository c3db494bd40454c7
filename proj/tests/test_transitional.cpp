#include <cmath>

#include "doctest.h"
#include "tradeup/transitional.hpp"

using namespace tradeup;

namespace {
Setting transitional(std::vector<TypeAtom> atoms, double delta, int horizon) {
    return canonical_setting(SettingKind::Transitional, TypePopulation(std::move(atoms)), delta, horizon);
}

StaticOptimum optimum(double direct, double mixed) {
    StaticOptimum o;
    o.prices = PriceProfile{{direct, mixed}, {true, true}};
    return o;
}
}  // namespace

TEST_CASE("mixed state weights") {
    const auto g = extend(transitional({{0.6, 0.9, 0.5}, {0.9, 0.3, 0.5}}, 0.5, 2));
    CHECK(g.alpha == doctest::Approx(2.0 / 3));
    CHECK(g.beta == doctest::Approx(1.0 / 3));
    CHECK(g.mixed_value({0.6, 0.9, 1}) == doctest::Approx(0.7));
    CHECK(g.mixed_value({0.9, 0.3, 1}) == doctest::Approx(0.7));
    CHECK(g.direct == State::A);
    CHECK(g.indirect == State::B);
    for (double d : {0.1, 0.5, 0.9, 0.99})
        for (int h : {2, 3, 7, 30}) {
            const auto e = extend(transitional({{0.5, 0.5, 1}}, d, h));
            CHECK(std::abs(e.alpha + e.beta - 1.0) <= 1e-12);
            CHECK(e.mixed_value({0.35, 0.35, 1}) == doctest::Approx(0.35));
        }
    // the mixed value lies between the two component values
    const auto e = extend(transitional({{0.5, 0.5, 1}}, 0.8, 4));
    for (double va : {0.0, 0.3, 1.0})
        for (double vb : {0.0, 0.6, 1.0}) {
            const double m = e.mixed_value({va, vb, 1});
            CHECK(m >= std::min(va, vb) - 1e-15);
            CHECK(m <= std::max(va, vb) + 1e-15);
        }
}

TEST_CASE("extend rejects other graphs") {
    CHECK_THROWS_AS(extend(canonical_setting(SettingKind::TwoRentals, TypePopulation({{0.5, 0.5, 1}}), 0.5, 2)),
                    std::invalid_argument);
    auto s = transitional({{0.5, 0.5, 1}}, 0.5, 2);
    s.graph = TransitionGraph({{State::O, State::O}, {State::A, State::A}, {State::B, State::B},
                               {State::O, State::A}, {State::A, State::B}, {State::B, State::O}});
    CHECK_THROWS_AS(extend(s), std::invalid_argument);
}

TEST_CASE("single atom extended game") {
    const auto g = extend(transitional({{0.9, 0.3, 1.0}}, 0.5, 2));
    REQUIRE(g.extended.population.size() == 1);
    CHECK(g.extended.population[0].vb == doctest::Approx(0.7));
    PriceGridSpec spec;
    spec.step = 0.1;
    const auto o = solve_extended(g, spec);
    CHECK(o.monopoly.prices.p[0] == doctest::Approx(0.9));
    CHECK(o.monopoly.profit == doctest::Approx(0.9));
    CHECK(o.coincide(1e-9));

    PriceGridSpec zero;
    zero.points = {0.0};
    const auto z = solve_extended(extend(transitional({{0.4, 0.8, 0.5}, {0.7, 0.2, 0.5}}, 0.9, 3)), zero);
    CHECK(z.pbar.profit == 0.0);
    CHECK(z.monopoly.profit == 0.0);
}

TEST_CASE("price reconstruction") {
    const auto s = transitional({{0.0, 0.5, 0.5}, {0.8, 0.2, 0.5}}, 0.5, 3);
    auto r = reconstruct_prices(optimum(0.4, 0.1), s, 0.0);
    CHECK(r.p1_direct == doctest::Approx(0.9333).epsilon(1e-4));
    CHECK(r.p1_indirect == doctest::Approx(0.2333).epsilon(1e-3));

    const auto flat = transitional({{0.3, 0.5, 0.5}, {0.8, 0.2, 0.5}}, 0.5, 3);
    r = reconstruct_prices(optimum(0.3, 0.3), flat, 0.3);
    CHECK(r.p1_direct == doctest::Approx(0.3));
    CHECK(r.p1_indirect == doctest::Approx(0.3));
    CHECK_THROWS_AS(reconstruct_prices(optimum(0.3, 0.3), flat, 0.31), std::invalid_argument);

    // both restrictions round-trip
    for (double d : {0.3, 0.7, 0.95})
        for (int h : {2, 4, 9})
            for (auto [pd, pm] : {std::pair{0.4, 0.1}, {0.9, 0.0}, {0.25, 0.6}}) {
                const auto st = transitional({{0.2, 0.5, 0.5}, {0.8, 0.2, 0.5}}, d, h);
                const double W = horizon_weight(d, 0, h - 1);
                const auto q = reconstruct_prices(optimum(pd, pm), st, 0.1);
                CHECK(std::abs(q.p0_direct + (W - 1) * q.p1_direct - pd * W) <= 1e-9);
                CHECK(std::abs(q.p0_direct + (W - 1) * q.p1_indirect - pm * W) <= 1e-9);
            }
}

TEST_CASE("always-mixed payoff equals the transitional path payoff") {
    const auto s = transitional({{0.2, 0.5, 0.5}, {0.8, 0.2, 0.5}}, 0.7, 5);
    const auto g = extend(s);
    const auto r = reconstruct_prices(optimum(0.45, 0.15), s, 0.1);
    const auto plan = transitional_plan(g, r);
    const double W = horizon_weight(0.7, 0, 4);
    const ConsumptionPath path{0, State::O, {State::A, State::B, State::B, State::B, State::B}};
    double rho = 0.0, disc = 1.0;
    State prev = State::O;
    for (int t = 0; t < 5; ++t) {
        const auto pp = posted_profile(s, t, prev, plan(t, prev));
        rho += disc * pp.price(path.choices[t]);
        disc *= 0.7;
        prev = path.choices[t];
    }
    for (const TypeAtom v : {TypeAtom{0.2, 0.5, 1}, TypeAtom{0.8, 0.2, 1}, TypeAtom{1.0, 1.0, 1}})
        CHECK(std::abs(total_value(v, path, 0.7, 4) - rho - W * (g.mixed_value(v) - 0.15)) <= 1e-12);
}

TEST_CASE("transitional certificates") {
    PriceGridSpec spec;
    spec.step = 0.1;
    // worthless indirect variety: a single rental priced constantly
    const auto worthless = transitional({{0.6, 0.0, 1.0 / 3}, {0.8, 0.0, 1.0 / 3}, {1.0, 0.0, 1.0 / 3}}, 0.5, 2);
    auto c = verify_transitional_equilibrium(worthless, spec);
    INFO(c.first_violation);
    CHECK(c.passed);
    CHECK(c.prices.p0_direct == doctest::Approx(0.6));
    CHECK(c.prices.p1_direct == doctest::Approx(0.6));
    CHECK_FALSE(c.price_increase);

    const auto single = transitional({{0.9, 0.3, 1.0}}, 0.5, 2);
    c = verify_transitional_equilibrium(single, spec);
    CHECK(c.passed);
    CHECK(c.plan_profit == doctest::Approx(0.9 * 1.5));

    // full support: the extended optima differ, so the certificate is refused
    const auto full = canonical_setting(SettingKind::Transitional, TypePopulation::uniform_full(20), 0.9, 3);
    spec.step = 0.01;
    CHECK_THROWS_AS(verify_transitional_equilibrium(full, spec), PreconditionFailed);
    c = verify_transitional_equilibrium(full, spec, false);
    CHECK_FALSE(c.passed);
    CHECK_FALSE(c.precondition_met);
    CHECK(c.consumers_ok);
    CHECK(c.profit_ok);
    CHECK(c.one_time_change);
    CHECK(c.price_increase);
    CHECK(c.optima.pbar.profit > 0.0);
}
