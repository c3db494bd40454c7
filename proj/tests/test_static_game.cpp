#include <cmath>

#include "doctest.h"
#include "tradeup/static_game.hpp"

using namespace tradeup;

namespace {
Setting rentals(TypePopulation pop) { return canonical_setting(SettingKind::TwoRentals, std::move(pop), 0.9, 1); }
PriceProfile both(double a, double b) { return PriceProfile{{a, b}, {true, true}}; }
}  // namespace

TEST_CASE("static choice with seller-favoring ties") {
    const auto s = rentals(TypePopulation({{0.5, 0.5, 1.0}}));
    CHECK(static_choice({0.8, 0.6, 1}, both(0.5, 0.5), s, State::O) == State::A);
    CHECK(static_choice({0.3, 0.2, 1}, both(0.5, 0.5), s, State::O) == State::O);
    CHECK(static_choice({0.6, 0.9, 1}, both(0.5, 0.5), s, State::O) == State::B);
    // exact ties
    CHECK(static_choice({0.5, 0.5, 1}, both(0.5, 0.5), s, State::O) == State::A);
    CHECK(static_choice({0.5, 0.7, 1}, both(0.3, 0.5), s, State::O) == State::B);
    CHECK(static_choice({0.5, 0.2, 1}, both(0.5, 0.5), s, State::O) == State::A);
}

TEST_CASE("demand segments on the uniform square") {
    const auto s = rentals(TypePopulation::uniform_full(200));
    const auto alloc = demand_segments(s.population, both(0.5, 0.5), s, State::O);
    CHECK(alloc.measure(State::O) == doctest::Approx(0.25).epsilon(0.04));
    CHECK(std::abs(alloc.measure(State::A) - 0.375) < 0.01);
    CHECK(std::abs(alloc.measure(State::B) - 0.375) < 0.01);
    CHECK(std::abs(alloc.measure(State::A) + alloc.measure(State::B) + alloc.measure(State::O) - 1) < 1e-9);
    CHECK(std::abs(static_profit(s.population, both(0.5, 0.5), s, State::O) - 0.375) < 0.01);
    CHECK(static_profit(s.population, both(0, 0), s, State::O) == 0.0);

    const auto neg = demand_segments(s.population, both(-1, -1), s, State::O);
    CHECK(neg.measure(State::O) == 0.0);

    // profit is prices dotted with segment measures
    for (auto p : {both(0.2, 0.7), both(0.6, 0.4), both(0.9, 0.1)}) {
        const auto a = demand_segments(s.population, p, s, State::O);
        CHECK(std::abs(static_profit(s.population, p, s, State::O) -
                       (p.p[0] * a.measure(State::A) + p.p[1] * a.measure(State::B))) < 1e-9);
    }
}

TEST_CASE("vertical differentiation puts everyone on a") {
    std::vector<TypeAtom> atoms;
    for (int i = 0; i < 10; ++i) atoms.push_back({0.5 + 0.05 * i, 0.1 + 0.03 * i, 0.1});
    const auto s = rentals(TypePopulation(atoms));
    const auto alloc = demand_segments(s.population, both(0.5, 0.5), s, State::O);
    CHECK(alloc.measure(State::A) == doctest::Approx(1.0));
}

TEST_CASE("single atom extraction") {
    const auto s = canonical_setting(SettingKind::SingleDurable, TypePopulation({{0.9, 0.3, 1.0}}), 0.9, 1);
    CHECK(static_profit(s.population, static_profile(s, {0.9, 0}), s, State::O) == doctest::Approx(0.9));
    PriceGridSpec g;
    g.step = 0.1;
    const auto m = monopoly_price(s, g);
    CHECK(m.prices.p[0] == doctest::Approx(0.9));
    CHECK(m.profit == doctest::Approx(0.9));
}

TEST_CASE("monopoly prices on uniform families") {
    PriceGridSpec g;
    g.step = 0.05;
    g.refinement_rounds = 2;
    const auto single = canonical_setting(SettingKind::SingleDurable, TypePopulation::uniform_full(100), 0.9, 1);
    auto m = monopoly_price(single, g);
    CHECK(std::abs(m.prices.p[0] - 0.5) < 0.011);
    CHECK(std::abs(m.profit - 0.25) < 0.005);
    CHECK_FALSE(m.prices.offered[1]);

    const auto two = rentals(TypePopulation::uniform_full(100));
    m = monopoly_price(two, g);
    CHECK(std::abs(m.prices.p[0] - 1 / std::sqrt(3.0)) < 0.011);
    CHECK(std::abs(m.prices.p[1] - 1 / std::sqrt(3.0)) < 0.011);
    CHECK(std::abs(m.profit - 0.3849) < 0.005);
    CHECK(std::abs(m.profit - static_profit(two.population, m.prices, two, State::O)) < 1e-9);
}

TEST_CASE("trading-up detection") {
    const auto two = rentals(TypePopulation::uniform_full(4));
    std::map<State, std::vector<TypeAtom>> occ{{State::O, {{0.3, 0.0, 0.5}}}};
    CHECK(detect_trading_up(occ, two.graph).exists);

    const auto mixed = canonical_setting(SettingKind::Mixed, TypePopulation::uniform_full(4), 0.9, 1);
    occ = {{State::A, {{0.9, 0.3, 0.5}, {0.6, 0.6, 0.5}}}};
    CHECK_FALSE(detect_trading_up(occ, mixed.graph).exists);

    const auto ps = canonical_setting(SettingKind::PositiveSelection, TypePopulation::uniform_full(4), 0.9, 1);
    occ = {{State::A, {{0.9, 0.3, 0.3}}}, {State::O, {{0.2, 0.9, 0.7}}}};
    CHECK_FALSE(detect_trading_up(occ, ps.graph).exists);

    occ = {{State::O, {{0.3, 0.0, 0.0}}}};
    CHECK_FALSE(detect_trading_up(occ, two.graph).exists);
}

TEST_CASE("omega membership") {
    const auto two = rentals(TypePopulation::lattice(21, 0.0, 1.0));
    CHECK(in_omega(both(0, 0), two));
    CHECK_FALSE(in_omega(both(0.2, 0.2), two));
    const auto mixed = canonical_setting(SettingKind::Mixed, TypePopulation::lattice(21, 0.0, 1.0), 0.9, 1);
    CHECK(in_omega(static_profile(mixed, {1.0 / 3, 0}), mixed));

    // off the non-positive diagonal everything fails on a full-support grid
    const auto full = rentals(TypePopulation::uniform_full(40));
    for (double pa_ : {-0.5, -0.1, 0.0, 0.1, 0.4})
        for (double pb_ : {-0.5, -0.1, 0.0, 0.1, 0.4})
            if (pa_ != pb_ && (pa_ > 0 || pb_ > 0)) CHECK_FALSE(in_omega(both(pa_, pb_), full));
}

TEST_CASE("midpoint grids have gaps, so the no-trading-up optimum is positive") {
    PriceGridSpec g;
    g.step = 0.005;
    const auto two = rentals(TypePopulation::uniform_full(20));
    const auto pb = pbar(two, g);
    CHECK(pb.profit > 0.0);
    CHECK(pb.prices.p[0] <= 0.025 + 1e-12);
}

TEST_CASE("pbar on canonical families") {
    PriceGridSpec g;
    g.step = 0.05;
    g.refinement_rounds = 2;
    // closed lattices include zero values, as full support requires
    const auto two = rentals(TypePopulation::lattice(61, 0.0, 1.0));
    auto pb = pbar(two, g);
    // the only room left is the lattice spacing between zero and the next value
    CHECK(pb.prices.p[0] <= 1.0 / 60 + 1e-12);
    CHECK(pb.prices.p[1] <= 1.0 / 60 + 1e-12);
    CHECK(pb.profit <= 1.0 / 60);
    CHECK(pbar(rentals(TypePopulation::lattice(61, 0.0, 1.0)), PriceGridSpec{0.0, 1.0, 0.1}).profit == 0.0);

    const auto mixed = canonical_setting(SettingKind::Mixed, TypePopulation::lattice(101, 0.0, 1.0), 0.9, 1);
    pb = pbar(mixed, g);
    CHECK(std::abs(pb.prices.p[0] - 1.0 / 3) < 0.011);
    CHECK(pb.prices.p[1] == 0.0);
    CHECK(std::abs(pb.profit - 2.0 / 27) < 0.003);
    CHECK(in_omega(pb.prices, mixed));

    const auto ps = canonical_setting(SettingKind::PositiveSelection, TypePopulation::uniform_full(50), 0.9, 1);
    const auto m = monopoly_price(ps, g);
    pb = pbar(ps, g);
    CHECK(pb.prices == m.prices);
    CHECK(pb.profit == m.profit);

    const auto tr = canonical_setting(SettingKind::Transitional, TypePopulation::uniform_full(20), 0.9, 2);
    CHECK_THROWS_AS(pbar(tr, g), EmptyOmega);
}

TEST_CASE("monopoly profit dominates the no-trading-up optimum") {
    PriceGridSpec g;
    g.step = 0.1;
    g.refinement_rounds = 1;
    for (auto k : {SettingKind::TwoRentals, SettingKind::TwoDurables, SettingKind::Mixed}) {
        const auto s = canonical_setting(k, TypePopulation::uniform_full(30), 0.9, 1);
        const auto m = monopoly_price(s, g);
        const auto b = pbar(s, g);
        CHECK(m.profit >= b.profit);
        CHECK(b.profit >= 0.0);
    }
}

TEST_CASE("finer grids never lose monopoly profit beyond the step") {
    const auto s = rentals(TypePopulation::uniform_full(60));
    double prev = -1;
    for (double step : {0.2, 0.1, 0.05, 0.025}) {
        PriceGridSpec g;
        g.step = step;
        const double pi = monopoly_price(s, g).profit;
        CHECK(pi >= prev - step);
        prev = pi;
    }
}

TEST_CASE("classification") {
    PriceGridSpec g;
    g.step = 0.05;
    auto pop = TypePopulation::uniform_full(20);
    CHECK(classify_setting(canonical_setting(SettingKind::PositiveSelection, pop, 0.9, 1), g).kind ==
          SettingClass::PositiveSelection);
    const auto board = classify_setting(canonical_setting(SettingKind::BoardLike, pop, 0.9, 1), g);
    CHECK(board.kind == SettingClass::BoardLike);
    CHECK(board.certificate_variety == State::B);
    CHECK(classify_setting(canonical_setting(SettingKind::TwoRentals, pop, 0.9, 1), g).kind ==
          SettingClass::TUOAtMonopoly);
    CHECK(classify_setting(canonical_setting(SettingKind::TwoDurables, pop, 0.9, 1), g).kind ==
          SettingClass::TUOAtMonopoly);
    auto held = canonical_setting(SettingKind::Mixed, pop, 0.9, 1);
    held.initial_state = State::B;
    CHECK(classify_setting(held, g).kind == SettingClass::AbsorbingInitial);
    CHECK(classify_setting(canonical_setting(SettingKind::Mixed, pop, 0.9, 1), g).kind ==
          SettingClass::TUOAtMonopoly);
    CHECK(classify_setting(canonical_setting(SettingKind::Transitional, pop, 0.9, 2), g).kind ==
          SettingClass::TUOAtMonopoly);

    std::vector<TypeAtom> down{{0.9, 0.5, 0.5}, {0.7, 0.2, 0.5}};
    CHECK(classify_setting(canonical_setting(SettingKind::TradingDown, TypePopulation(down), 0.9, 1), g).kind ==
          SettingClass::TradingDown);

    // a gaps population where monopoly pricing serves everyone
    std::vector<TypeAtom> high{{0.8, 0.1, 0.5}, {0.9, 0.2, 0.5}};
    CHECK(classify_setting(canonical_setting(SettingKind::Mixed, TypePopulation(high), 0.9, 1), g).kind ==
          SettingClass::NoTUOAtMonopoly);
}
