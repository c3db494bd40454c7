#include <cmath>
#include <random>

#include "doctest.h"
#include "tradeup/oracle.hpp"

using namespace tradeup;

namespace {
PriceGridSpec grid(double step) {
    PriceGridSpec g;
    g.step = step;
    return g;
}

// small random populations with distinct atoms on a coarse value lattice
TypePopulation random_population(std::mt19937& rng, int n) {
    std::uniform_int_distribution<int> v(0, 5);
    std::vector<TypeAtom> atoms;
    while (static_cast<int>(atoms.size()) < n) {
        const TypeAtom a{v(rng) / 5.0, v(rng) / 5.0, 1.0 / n};
        bool dup = false;
        for (const auto& b : atoms) dup |= b.va == a.va && b.vb == a.vb;
        if (!dup) atoms.push_back(a);
    }
    return TypePopulation(std::move(atoms));
}

void same_outcome(const EquilibriumOutcome& a, const EquilibriumOutcome& b) {
    CHECK(std::abs(a.profit - b.profit) <= 1e-12);
    REQUIRE(a.price_path.size() == b.price_path.size());
    for (std::size_t i = 0; i < a.price_path.size(); ++i) {
        const auto& x = a.price_path[i];
        const auto& y = b.price_path[i];
        INFO("row " << i << " " << x.signature);
        CHECK(x.signature == y.signature);
        CHECK(x.state == y.state);
        CHECK(std::abs(x.prices.p[0] - y.prices.p[0]) <= 1e-12);
        CHECK(std::abs(x.prices.p[1] - y.prices.p[1]) <= 1e-12);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(x.mass[k] - y.mass[k]) <= 1e-12);
    }
}
}  // namespace

TEST_CASE("oracle reproduces the two-atom durable example") {
    const auto s = canonical_setting(SettingKind::SingleDurable,
                                     TypePopulation({{0.3, 0.5, 0.5}, {0.9, 0.1, 0.5}}), 0.5, 2);
    const auto o = brute_force_pbe({s, grid(0.1)});
    CHECK(o.profit == doctest::Approx(0.6));
    REQUIRE(o.price_path.size() == 2);
    CHECK(o.price_path[0].prices.p[0] == doctest::Approx(1.05));
    CHECK(o.price_path[1].prices.p[0] == doctest::Approx(0.3));
}

TEST_CASE("oracle agrees with the solver on tiny instances") {
    std::mt19937 rng(20261016);
    const SettingKind kinds[] = {SettingKind::TwoRentals, SettingKind::TwoDurables, SettingKind::Mixed,
                                 SettingKind::SingleDurable, SettingKind::PositiveSelection,
                                 SettingKind::BoardLike, SettingKind::TradingDown, SettingKind::Transitional};
    int compared = 0;
    for (int rep = 0; rep < 3; ++rep)
        for (SettingKind kind : kinds) {
            const int n = 2 + rep % 2;
            const int horizon = 2 + rep % 2;
            const double delta = rep == 2 ? 0.9 : 0.6;
            const auto s = canonical_setting(kind, random_population(rng, n), delta, horizon);
            const auto g = grid(0.2);
            const auto a = solve_pbe(s, g);
            const auto b = brute_force_pbe({s, g});
            INFO("kind " << static_cast<int>(kind) << " rep " << rep);
            same_outcome(a, b);
            ++compared;
        }
    CHECK(compared >= 20);
}

TEST_CASE("oracle trees pass the solver's own checks") {
    const auto s = canonical_setting(SettingKind::Mixed, TypePopulation({{0.2, 0.8, 0.4}, {0.6, 0.4, 0.3}, {1.0, 0.2, 0.3}}),
                                     0.8, 3);
    const auto o = brute_force_pbe({s, grid(0.2)});
    CHECK(bellman_check(o).passed);
    CHECK(consumer_rationality_check(o, 1e-9).passed);
}

TEST_CASE("oracle budget") {
    const auto s = canonical_setting(SettingKind::TwoRentals, TypePopulation::uniform_full(2), 0.9, 3);
    OracleInstance inst{s, grid(0.05)};
    inst.enumeration_budget = 100;
    CHECK_THROWS_AS(brute_force_pbe(inst), BudgetExceeded);
}

TEST_CASE("analytic static optima") {
    const auto d = analytic_static_oracle(AnalyticFamily::SingleDurableUniform);
    CHECK(d.prices.p[0] == 0.5);
    CHECK(d.profit == 0.25);
    const auto r = analytic_static_oracle(AnalyticFamily::TwoRentalsUniform);
    CHECK(r.prices.p[0] == doctest::Approx(0.57735).epsilon(1e-5));
    CHECK(r.profit == doctest::Approx(2.0 / (3.0 * std::sqrt(3.0))));
    const auto m = analytic_static_oracle(AnalyticFamily::MixedUniform);
    CHECK(m.prices.p[0] == doctest::Approx(1.0 / 3));
    CHECK(m.profit == doctest::Approx(2.0 / 27));
    // the stated prices maximize the closed-form objectives
    for (double p = 0.0; p <= 1.0; p += 0.01) {
        CHECK(p * (1 - p) <= d.profit + 1e-15);
        CHECK(p * (1 - p * p) <= r.profit + 1e-15);
        CHECK(p * (1 - p) * (1 - p) / 2 <= m.profit + 1e-15);
    }
}

TEST_CASE("quadrature of demand segments") {
    const auto rentals = canonical_setting(SettingKind::TwoRentals, TypePopulation::uniform_full(2), 0.9, 2);
    auto seg = integrate_segments({}, PriceProfile{{1.0, 1.0}, {true, true}}, rentals);
    CHECK(seg[State::O] == doctest::Approx(1.0));
    seg = integrate_segments({}, PriceProfile{{0.5, 0.5}, {true, true}}, rentals);
    CHECK(seg[State::O] == doctest::Approx(0.25).epsilon(1e-3));
    CHECK(seg[State::A] == doctest::Approx(0.375).epsilon(1e-3));
    seg = integrate_segments({}, PriceProfile{{0.3, 0.0}, {true, true}},
                             canonical_setting(SettingKind::Mixed, TypePopulation::uniform_full(2), 0.9, 2));
    CHECK(seg[State::A] == doctest::Approx(0.7 * 0.7 / 2).epsilon(1e-3));

    // discrete demand converges to the integral
    const int n = 200;
    const auto fine = canonical_setting(SettingKind::TwoRentals, TypePopulation::uniform_full(n), 0.9, 2);
    for (Vec2 p : {Vec2{0.3, 0.6}, Vec2{0.55, 0.2}, Vec2{0.8, 0.8}}) {
        const PriceProfile pp{p, {true, true}};
        const auto alloc = demand_segments(fine.population, pp, fine, State::O);
        const auto q = integrate_segments({}, pp, fine);
        for (State x : kStates) CHECK(std::abs(alloc.measure(x) - q.at(x)) <= 2.0 / n);
    }

    DensitySpec band;
    band.kind = DensitySpec::Kind::LinearBand;
    band.intercept = 0.0;
    band.slope = 1.0;
    band.width = 0.1;
    seg = integrate_segments(band, PriceProfile{{0.5, 0.5}, {true, true}}, rentals);
    double total = 0.0;
    for (State x : kStates) total += seg[x];
    CHECK(total == doctest::Approx(1.0));
    CHECK(seg[State::O] == doctest::Approx(0.5).epsilon(2e-2));
    band.width = 0.0;
    CHECK_THROWS_AS(integrate_segments(band, PriceProfile{}, rentals), std::invalid_argument);
}
