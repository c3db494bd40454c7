#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tradeup/static_game.hpp"

namespace tradeup {

struct SolverOptions {
    std::size_t node_budget = 2'000'000;
    // nodes whose full set of consumer partitions is at most this large are searched exhaustively
    std::size_t enumeration_limit = 19683;
    // beyond this many classes the effective-price family is skipped
    std::size_t family_limit = 60;
    // larger nodes skip the one-class-at-a-time improvement pass
    std::size_t local_search_limit = 0;  // opt-in; rarely finds anything the fixed points miss
    int max_iterations = 100;
    double tolerance = 1e-9;
};

class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(const std::string& what, std::size_t nodes)
        : std::runtime_error(what), nodes_reached(nodes) {}
    std::size_t nodes_reached;
};

class NoEquilibrium : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PreconditionFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Atoms that agree on every reachable variety are indistinguishable to the game.
struct ConsumerClass {
    Vec2 v{0.0, 0.0};
    double mass = 0.0;
    std::vector<std::size_t> atoms;
};

std::vector<ConsumerClass> merge_classes(const Setting& setting);

struct SolvedNode {
    int period = 0;
    State state = State::O;
    std::vector<std::uint32_t> members;  // class indices, ascending
    double mass = 0.0;
    bool leaf = false;                    // absorbing state, nothing left to decide
    PriceProfile prices;                  // posted prices
    std::vector<State> choices;           // parallel to members
    std::array<int, 3> child{-1, -1, -1};  // per choice; -1 if inadmissible or last period
    std::array<double, 3> segment_mass{0.0, 0.0, 0.0};
    double receipts = 0.0;
    double seller_value = 0.0;
    std::vector<double> utility;  // per class, every class; empty at leaves

    bool chosen(State y) const;  // some member picks y, so the child is on path
};

struct SolvedTree {
    Setting setting;
    std::vector<ConsumerClass> classes;
    std::vector<SolvedNode> nodes;
    int root = -1;
    std::vector<double> weight;  // horizon weight per period

    // continuation utility of class c at node n, closed form at leaves
    double utility(int n, std::size_t c) const;
    // consumer surplus from choosing y at node n, following the tree afterwards
    double choice_utility(int n, std::size_t c, State y) const;
    double cost(int n, State y) const { return nodes[n].prices.is_offered(y) ? nodes[n].prices.price(y) : 0.0; }
};

struct PriceRow {
    int period = 0;
    std::string signature;  // choices of the segment so far, "h" at the root
    State state = State::O;
    PriceProfile prices;
    std::array<double, 3> mass{0.0, 0.0, 0.0};
    double traded_up_mass = 0.0;
    int node = -1;
};

struct EquilibriumOutcome {
    std::shared_ptr<SolvedTree> tree;
    double profit = 0.0;
    std::vector<PriceRow> price_path;  // on-path decision nodes, depth-first
    std::optional<int> exhaustion_period;
    std::vector<double> residual_trading_up;  // per period, on-path mass left with an opportunity
    std::size_t nodes = 0;
    double grid_step = 0.0;
};

// on-path nodes (decision nodes and leaves) in depth-first order, with signatures
struct OnPathNode {
    int node;
    std::string signature;
};
std::vector<OnPathNode> on_path_nodes(const SolvedTree& tree);

EquilibriumOutcome solve_pbe(const Setting& setting, const PriceGridSpec& spec,
                             const SolverOptions& options = {});
// re-solve on a finer grid spanning the coarse on-path prices
EquilibriumOutcome refine_solution(const EquilibriumOutcome& coarse, const PriceGridSpec& spec,
                                   const SolverOptions& options = {});

// Summaries derived from the tree; exposed so corrupted trees can be re-summarized.
EquilibriumOutcome summarize(std::shared_ptr<SolvedTree> tree, double grid_step);

bool ordering_paths_check(const TypeAtom& v_tilde, const TypeAtom& v, const ConsumptionPath& path_k,
                          const ConsumptionPath& path_l, double delta);

// continuation consumption vectors available after each choice, per period
struct ContinuationSets {
    // sets[t][x]: distinct chi of admissible paths starting at t with previous state x
    std::vector<std::array<std::vector<Vec2>, 3>> sets;
    static ContinuationSets build(const Setting& setting);
    const std::vector<Vec2>& after(int t, State x) const;
};

bool ordering_choice_check(const TypeAtom& v_tilde, const TypeAtom& v, State x, State x_prime,
                           const ContinuationSets& paths, double delta, int t, int T);

struct Check {
    std::string name;
    bool passed = true;
    std::string detail;
    double tolerance = 0.0;
};

struct DecompositionResult {
    double direct = 0.0;
    double decomposed = 0.0;
    int paths = 0;
    int interpolated = 0;   // adjacent path pairs with no exactly indifferent atom
    bool consistent = true;  // every atom sits on the right side of its indifference line
};

// realized paths of the members of node n, priced by the tree
struct RealizedPath {
    ConsumptionPath path;
    double payment = 0.0;  // discounted to the node's period
    Vec2 chi{0.0, 0.0};
    std::vector<std::uint32_t> members;
    double mass = 0.0;
};
std::vector<RealizedPath> realized_paths(const SolvedTree& tree, int n);

DecompositionResult revenue_decomposition_check(const EquilibriumOutcome& solved, int node);
bool price_floor_check(const EquilibriumOutcome& solved, const StaticOptimum& pbar_result,
                       double grid_step, std::string* detail = nullptr);
double epsilon_exhaustion_bound(double v_low_i, double v_low_j, double lambda, double phi,
                                double delta, int t, int T);
double epsilon_exhaustion_bound_at(double v_low_i, double v_low_j, double lambda, double phi,
                                   double weight);
std::optional<int> exhaustion_time(const EquilibriumOutcome& solved);

// property checks over a solved tree
Check bellman_check(const EquilibriumOutcome& solved, double tol = 1e-9);
Check consumer_rationality_check(const EquilibriumOutcome& solved, double eps);
Check skimming_check(const EquilibriumOutcome& solved, double tol = 1e-9);
Check decomposition_suite(const EquilibriumOutcome& solved, double tol = 1e-9);

// A price plan fixed in advance: per-period prices by period and current state.
using PricePlan = std::function<Vec2(int t, State from)>;

struct PlanOutcome {
    std::vector<ConsumptionPath> paths;  // per class, seller-favoring best response
    std::vector<double> utility;         // per class
    double profit = 0.0;
    std::vector<double> residual_trading_up;  // per period
    bool best_response_unique = true;
};

PlanOutcome simulate_plan(const Setting& setting, const std::vector<ConsumerClass>& classes,
                          const PricePlan& plan);

struct MonopolyCertificate {
    bool passed = false;
    bool consumers_ok = false;
    bool seller_ok = false;
    std::string first_violation;
    StaticOptimum monopoly;
    double plan_profit = 0.0;
    double target_profit = 0.0;  // pi(p^m) times the horizon weight
};

MonopolyCertificate verify_monopoly_pbe(const Setting& setting, const PriceGridSpec& spec);

}  // namespace tradeup
