#include <cmath>
#include <set>

#include "doctest.h"
#include "tradeup/market_model.hpp"

using namespace tradeup;

namespace {
TypePopulation one_atom(double va, double vb) { return TypePopulation({{va, vb, 1.0}}); }

Setting make(SettingKind k, int horizon = 2, double delta = 0.5) {
    return canonical_setting(k, one_atom(0.9, 0.3), delta, horizon);
}

// every length-k sequence over {a,b,o}, filtered by the graph
std::set<std::string> filtered_sequences(const Setting& s, State from, int k) {
    std::set<std::string> out;
    int total = 1;
    for (int i = 0; i < k; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
        std::string seq;
        int c = code;
        State prev = from;
        bool ok = true;
        for (int i = 0; i < k; ++i) {
            const State x = kStates[c % 3];
            c /= 3;
            if (!s.graph.admits(prev, x)) ok = false;
            seq.push_back(state_char(x));
            prev = x;
        }
        if (ok) out.insert(seq);
    }
    return out;
}

PriceProfile pa(double a, double b = 0.0) { return PriceProfile{{a, b}, {true, true}}; }
}  // namespace

TEST_CASE("admissibility of canonical graphs") {
    CHECK(is_admissible(make(SettingKind::TwoRentals).graph, State::B, State::A));
    const auto mixed = make(SettingKind::Mixed).graph;
    CHECK_FALSE(is_admissible(mixed, State::B, State::O));
    CHECK_FALSE(is_admissible(mixed, State::B, State::A));
    for (auto k : {SettingKind::TwoRentals, SettingKind::TwoDurables, SettingKind::Mixed,
                   SettingKind::SingleDurable, SettingKind::PositiveSelection,
                   SettingKind::BoardLike, SettingKind::TradingDown, SettingKind::Transitional})
        CHECK(is_admissible(make(k).graph, State::O, State::O));
    CHECK(make(SettingKind::TwoRentals).graph.arcs().size() == 9);
    const auto ps = make(SettingKind::PositiveSelection);
    CHECK(ps.initial_state == State::A);
    CHECK(ps.graph.arcs().size() == 4);
    CHECK(ps.graph.admits(State::A, State::O));
    CHECK_FALSE(ps.graph.admits(State::O, State::A));
}

TEST_CASE("graph must carry self-loops") {
    CHECK_THROWS_AS(TransitionGraph({{State::O, State::A}}), std::invalid_argument);
}

TEST_CASE("horizon weight") {
    CHECK(horizon_weight(0.5, 0, 2) == doctest::Approx(1.75));
    CHECK(horizon_weight(0.5, 2, 2) == 1.0);
    CHECK(horizon_weight(0.9, 0, 0) == 1.0);
    CHECK_THROWS_AS(horizon_weight(0.5, 3, 2), std::out_of_range);
}

TEST_CASE("path enumeration matches the filtered product") {
    const auto rentals = make(SettingKind::TwoRentals, 3);
    CHECK(enumerate_paths(rentals, State::O, 2).size() == 3);
    CHECK(enumerate_paths(rentals, State::O, 0).size() == 27);

    const auto mixed = make(SettingKind::Mixed, 4);
    for (int t = 0; t < 4; ++t) {
        const auto p = enumerate_paths(mixed, State::B, t);
        REQUIRE(p.size() == 1);
        CHECK(path_string(p[0]) == std::string(4 - t, 'b'));
    }

    const auto durables = make(SettingKind::TwoDurables, 2);
    const auto paths = enumerate_paths(durables, State::O, 0);
    std::set<std::string> got;
    for (const auto& p : paths) got.insert(path_string(p));
    CHECK(got == std::set<std::string>{"oo", "oa", "ob", "aa", "bb"});

    for (auto k : {SettingKind::TwoRentals, SettingKind::TwoDurables, SettingKind::Mixed,
                   SettingKind::SingleDurable, SettingKind::PositiveSelection,
                   SettingKind::TradingDown, SettingKind::Transitional}) {
        const auto s = make(k, 4);
        for (State from : kStates)
            for (int t = 0; t < 4; ++t) {
                std::set<std::string> mine;
                for (const auto& p : enumerate_paths(s, from, t)) {
                    CHECK(mine.insert(path_string(p)).second);
                    State prev = p.previous;
                    for (State x : p.choices) {
                        CHECK(s.graph.admits(prev, x));
                        prev = x;
                    }
                }
                CHECK(mine == filtered_sequences(s, from, 4 - t));
            }
    }
    CHECK_THROWS_AS(enumerate_paths(make(SettingKind::TwoRentals, 6), State::O, 0, 100),
                    EnumerationBudgetExceeded);
}

TEST_CASE("consumption, payment and value") {
    const ConsumptionPath aa{0, State::O, {State::A, State::A}};
    const auto chi = total_consumption(aa, 0.5, 1);
    CHECK(chi[0] == 1.5);
    CHECK(chi[1] == 0.0);
    const ConsumptionPath abo{0, State::O, {State::A, State::B, State::O}};
    CHECK(total_consumption(abo, 0.5, 2) == Vec2{1.0, 0.5});
    const ConsumptionPath oo{0, State::O, {State::O, State::O, State::O}};
    CHECK(total_consumption(oo, 0.7, 2) == Vec2{0.0, 0.0});

    const auto rentals = make(SettingKind::TwoRentals);
    CHECK(total_payment(aa, {pa(0.4), pa(0.4)}, 0.5, rentals.graph) == doctest::Approx(0.6));

    const auto durables = make(SettingKind::TwoDurables);
    const ConsumptionPath ob{0, State::O, {State::O, State::B}};
    CHECK(total_payment(ob, {pa(0.2, 0.9), pa(0.1, 0.7)}, 0.5, durables.graph) ==
          doctest::Approx(0.35));
    const ConsumptionPath bb{0, State::O, {State::B, State::B}};
    CHECK(total_payment(bb, {pa(0.3, 0.7), pa(0.3, 0.0)}, 0.5, durables.graph) ==
          doctest::Approx(0.7));
    CHECK_THROWS_AS(total_payment(bb, {pa(0.3, 0.7), pa(0.3, 0.2)}, 0.5, durables.graph),
                    std::invalid_argument);

    const TypeAtom v{0.9, 0.3, 1.0};
    CHECK(total_value(v, aa, 0.5, 1) == doctest::Approx(1.35));
    CHECK(total_value(v, abo, 0.5, 2) == doctest::Approx(1.05));
    CHECK(total_value(v, oo, 0.5, 2) == 0.0);
}

TEST_CASE("always-i consumption equals horizon weight") {
    for (double d : {0.3, 0.5, 0.9})
        for (int t = 0; t <= 5; ++t)
            for (State i : kVarieties) {
                ConsumptionPath p{t, i, std::vector<State>(6 - t, i)};
                const auto chi = total_consumption(p, d, 5);
                const Vec2 want = unit(i);
                CHECK(chi[0] == doctest::Approx(want[0] * horizon_weight(d, t, 5)).epsilon(1e-14));
                CHECK(chi[1] == doctest::Approx(want[1] * horizon_weight(d, t, 5)).epsilon(1e-14));
            }
}

TEST_CASE("value minus payment is the discounted per-period surplus") {
    const auto s = make(SettingKind::TwoRentals, 4, 0.8);
    const std::vector<PriceProfile> prices{pa(0.3, 0.6), pa(0.7, 0.1), pa(0.2, 0.2), pa(0.9, 0.4)};
    const TypeAtom v{0.55, 0.45, 1.0};
    for (const auto& path : enumerate_paths(s, State::O, 0)) {
        double direct = 0.0, d = 1.0;
        for (std::size_t k = 0; k < path.choices.size(); ++k) {
            const State x = path.choices[k];
            direct += d * (dot(v.values(), unit(x)) - prices[k].price(x));
            d *= 0.8;
        }
        CHECK(std::abs(total_value(v, path, 0.8, 3) - total_payment(path, prices, 0.8, s.graph) -
                       direct) <= 1e-12);
    }
}

TEST_CASE("populations") {
    const auto u = TypePopulation::uniform_full(4);
    CHECK(u.size() == 16);
    CHECK(u[0].va == 0.125);
    const auto l = TypePopulation::lattice(3, 0.2, 1.0);
    CHECK(l.min_value(State::A) == doctest::Approx(0.2));
    CHECK(l.max_value(State::B) == 1.0);
    const auto band = TypePopulation::linear_band(10, 0.0, 0.5);
    for (const auto& a : band.atoms()) CHECK(a.vb == doctest::Approx(0.5 * a.va));
    CHECK_THROWS_AS(TypePopulation({{0.2, 0.2, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(TypePopulation({{0.2, 0.2, 0.5}, {0.2, 0.2, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(TypePopulation({{1.2, 0.2, 1.0}}), std::invalid_argument);
}

TEST_CASE("setting validation and kinds") {
    auto s = make(SettingKind::Mixed);
    s.delta = 1.0;
    CHECK_THROWS(s.validate());
    CHECK(parse_kind(kind_name(SettingKind::BoardLike)) == SettingKind::BoardLike);
    CHECK_THROWS(parse_kind("three_rentals"));
    const auto board = canonical_setting(SettingKind::BoardLike,
                                         TypePopulation::uniform_full(5), 0.9, 3);
    REQUIRE(board.fixed_price[1]);
    CHECK(*board.fixed_price[1] < board.population.min_value(State::B));
}

TEST_CASE("posted prices scale one-shot varieties") {
    const auto s = make(SettingKind::Mixed, 3, 0.5);
    const auto pp = posted_profile(s, 1, State::O, {0.4, 0.2});
    CHECK(pp.p[0] == 0.4);
    CHECK(pp.p[1] == doctest::Approx(0.2 * 1.5));
    const auto held = posted_profile(s, 1, State::B, {0.4, 0.2});
    CHECK_FALSE(held.offered[0]);
    CHECK_FALSE(held.offered[1]);
    CHECK(held.price(State::B) == 0.0);
}
