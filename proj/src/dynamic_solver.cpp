#include "tradeup/dynamic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

namespace tradeup {

std::vector<ConsumerClass> merge_classes(const Setting& setting) {
    const auto reach = reachable_states(setting);
    const bool has_a = std::find(reach.begin(), reach.end(), State::A) != reach.end();
    const bool has_b = std::find(reach.begin(), reach.end(), State::B) != reach.end();
    std::map<std::pair<double, double>, ConsumerClass> by_value;
    const auto& atoms = setting.population.atoms();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const Vec2 v{has_a ? atoms[i].va : 0.0, has_b ? atoms[i].vb : 0.0};
        auto& c = by_value[{v[0], v[1]}];
        c.v = v;
        c.mass += atoms[i].mass;
        c.atoms.push_back(i);
    }
    std::vector<ConsumerClass> out;
    for (auto& [k, c] : by_value)
        if (c.mass > 0.0) out.push_back(std::move(c));
    return out;
}

bool SolvedNode::chosen(State y) const {
    return std::find(choices.begin(), choices.end(), y) != choices.end();
}

double SolvedTree::utility(int n, std::size_t c) const {
    const auto& node = nodes[n];
    if (node.leaf) return dot(classes[c].v, unit(node.state)) * weight[node.period];
    return node.utility[c];
}

double SolvedTree::choice_utility(int n, std::size_t c, State y) const {
    const auto& node = nodes[n];
    if (node.leaf) return y == node.state ? utility(n, c) : -std::numeric_limits<double>::infinity();
    if (!setting.graph.admits(node.state, y)) return -std::numeric_limits<double>::infinity();
    double u = dot(classes[c].v, unit(y)) - cost(n, y);
    if (node.child[index_of(y)] >= 0) u += setting.delta * utility(node.child[index_of(y)], c);
    return u;
}

namespace {

using Partition = std::vector<std::uint8_t>;  // choice per member, as State index

struct NodeKey {
    int t;
    State x;
    std::vector<std::uint64_t> bits;
    bool operator==(const NodeKey&) const = default;
};

struct KeyHash {
    std::size_t operator()(const NodeKey& k) const {
        std::size_t h = static_cast<std::size_t>(k.t) * 1000003u + index_of(k.x);
        for (auto w : k.bits) h = (h ^ w) * 0x9E3779B97F4A7C15ull + (h >> 29);
        return h;
    }
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// feasible posted prices for a fixed partition: box on each price and on their difference
struct Region {
    double la = -kInf, ua = kInf, lb = -kInf, ub = kInf, ld = -kInf, ud = kInf;
    bool feasible = true;
    double ma = 0.0, mb = 0.0, cont = 0.0;
    std::array<int, 3> child{-1, -1, -1};
    std::array<double, 3> mass{0.0, 0.0, 0.0};
};

class Solver {
public:
    Solver(const Setting& setting, const PriceGridSpec& spec, const SolverOptions& options)
        : opt_(options), tree_(std::make_shared<SolvedTree>()) {
        tree_->setting = setting;
        tree_->classes = merge_classes(setting);
        const int T = setting.last_period();
        for (int t = 0; t <= T; ++t) tree_->weight.push_back(horizon_weight(setting.delta, t, T));
        for (State i : kVarieties) {
            const auto& f = setting.fixed_price[index_of(i)];
            grid_[index_of(i)] = f ? std::vector<double>{*f}
                                   : spec.candidates(setting.price_floor, setting.price_cap[index_of(i)]);
            if (grid_[index_of(i)].empty())
                throw std::invalid_argument("price grid has no candidates inside [floor, cap]");
        }
        for (State x : kStates) succ_[index_of(x)] = setting.graph.successors(x);
        values_.reserve(tree_->classes.size());
        for (const auto& c : tree_->classes) values_.push_back(c.v);
    }

    std::shared_ptr<SolvedTree> run() {
        std::vector<std::uint32_t> all(tree_->classes.size());
        for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
        tree_->root = solve(0, tree_->setting.initial_state, all);
        return tree_;
    }

private:
    const Setting& setting() const { return tree_->setting; }

    NodeKey key_of(int t, State x, const std::vector<std::uint32_t>& members) const {
        NodeKey k{t, x, std::vector<std::uint64_t>((tree_->classes.size() + 63) / 64, 0)};
        for (auto m : members) k.bits[m / 64] |= (std::uint64_t{1} << (m % 64));
        return k;
    }

    // per-node working data
    struct Ctx {
        int t;
        State x;
        const std::vector<std::uint32_t>* members;
        const std::vector<State>* options;
        std::array<bool, 3> priced{false, false, false};
        std::array<std::vector<double>, 2> axis;  // posted candidates
        bool last;
    };

    double child_utility(int child, std::size_t c) const { return tree_->utility(child, c); }

    std::array<int, 3> children_of(const Ctx& ctx, const Partition& p) {
        std::array<int, 3> ch{-1, -1, -1};
        if (ctx.last) return ch;
        std::array<std::vector<std::uint32_t>, 3> split;
        for (std::size_t k = 0; k < p.size(); ++k) split[p[k]].push_back((*ctx.members)[k]);
        for (State y : *ctx.options) {
            const auto& s = split[index_of(y)];
            ch[index_of(y)] = solve(ctx.t + 1, y, s.empty() ? *ctx.members : s);
        }
        return ch;
    }

    // value of choice y for member class c, before paying its price
    double gross(const Ctx& ctx, const std::array<int, 3>& ch, std::size_t c, State y) const {
        double g = dot(values_[c], unit(y));
        if (!ctx.last) g += setting().delta * child_utility(ch[index_of(y)], c);
        return g;
    }

    double posted(const Ctx& ctx, State y, const Vec2& c) const {
        return ctx.priced[index_of(y)] ? c[index_of(y)] : 0.0;
    }

    Region region_of(const Ctx& ctx, const Partition& p) {
        Region r;
        r.child = children_of(ctx, p);
        const double tol = opt_.tolerance;
        const auto& mem = *ctx.members;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const State yk = static_cast<State>(p[k]);
            const std::size_t c = mem[k];
            r.mass[index_of(yk)] += tree_->classes[c].mass;
            const double gk = gross(ctx, r.child, c, yk);
            for (State y : *ctx.options) {
                if (y == yk) continue;
                const double D = gk - gross(ctx, r.child, c, y) + tol;
                const bool pk = ctx.priced[index_of(yk)], py = ctx.priced[index_of(y)];
                if (pk && py) {
                    if (yk == State::A) r.ud = std::min(r.ud, D);
                    else r.ld = std::max(r.ld, -D);
                } else if (pk) {
                    (yk == State::A ? r.ua : r.ub) = std::min(yk == State::A ? r.ua : r.ub, D);
                } else if (py) {
                    (y == State::A ? r.la : r.lb) = std::max(y == State::A ? r.la : r.lb, -D);
                } else if (D < 0.0) {
                    r.feasible = false;
                }
            }
        }
        r.ma = ctx.priced[0] ? r.mass[0] : 0.0;
        r.mb = ctx.priced[1] ? r.mass[1] : 0.0;
        if (!ctx.last)
            for (State y : *ctx.options)
                if (has_choice(p, y))
                    r.cont += tree_->nodes[r.child[index_of(y)]].seller_value;
        r.cont *= setting().delta;
        return r;
    }

    static bool has_choice(const Partition& p, State y) {
        return std::find(p.begin(), p.end(), static_cast<std::uint8_t>(index_of(y))) != p.end();
    }

    // range of b prices compatible with a given a price
    std::pair<double, double> b_range(const Region& r, double ca) const {
        return {std::max(r.lb, ca - r.ud), std::min(r.ub, ca - r.ld)};
    }

    // best value attainable by this partition over the grid
    std::optional<double> best_value(const Ctx& ctx, const Region& r) const {
        if (!r.feasible) return std::nullopt;
        std::optional<double> best;
        const auto& A = ctx.axis[0];
        const auto& B = ctx.axis[1];
        for (double ca : A) {
            if (ca < r.la || ca > r.ua) continue;
            auto [lo, hi] = b_range(r, ca);
            auto it = std::lower_bound(B.begin(), B.end(), lo);
            if (it == B.end() || *it > hi) continue;
            double cb = *it;
            if (r.mb > 0.0) cb = *(std::upper_bound(B.begin(), B.end(), hi) - 1);
            const double v = ca * r.ma + cb * r.mb + r.cont;
            if (!best || v > *best) best = v;
        }
        return best;
    }

    // lexicographically largest grid price reaching `target`
    std::optional<Vec2> last_price(const Ctx& ctx, const Region& r, double target) const {
        const auto& A = ctx.axis[0];
        const auto& B = ctx.axis[1];
        for (auto ia = A.rbegin(); ia != A.rend(); ++ia) {
            const double ca = *ia;
            if (ca < r.la || ca > r.ua) continue;
            auto [lo, hi] = b_range(r, ca);
            auto it = std::upper_bound(B.begin(), B.end(), hi);
            if (it == B.begin() || *(it - 1) < lo) continue;
            // the value is nondecreasing in the b price, so the top of the range decides
            const double cb = *(it - 1);
            if (ca * r.ma + cb * r.mb + r.cont >= target) return Vec2{ca, cb};
        }
        return std::nullopt;
    }

    Partition best_response(const Ctx& ctx, const Partition& p, const Vec2& c) {
        const auto ch = children_of(ctx, p);
        Partition out(p.size());
        const auto& mem = *ctx.members;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const std::size_t cls = mem[k];
            const State cur = static_cast<State>(p[k]);
            double best = -kInf;
            for (State y : *ctx.options) best = std::max(best, gross(ctx, ch, cls, y) - posted(ctx, y, c));
            if (gross(ctx, ch, cls, cur) - posted(ctx, cur, c) >= best - opt_.tolerance) {
                out[k] = p[k];
                continue;
            }
            State pick = State::O;
            double pick_cost = 0.0;
            bool have = false;
            for (State y : *ctx.options) {
                const double cy = posted(ctx, y, c);
                if (gross(ctx, ch, cls, y) - cy < best - opt_.tolerance) continue;
                const bool better = !have || (is_variety(y) && !is_variety(pick)) ||
                                    (is_variety(y) == is_variety(pick) && cy > pick_cost);
                if (better) {
                    pick = y;
                    pick_cost = cy;
                    have = true;
                }
            }
            out[k] = static_cast<std::uint8_t>(index_of(pick));
        }
        return out;
    }

    Partition myopic_seed(const Ctx& ctx, const Vec2& c) const {
        const double w = tree_->weight[ctx.t];
        Partition out;
        for (auto cls : *ctx.members) {
            State pick = ctx.options->front();
            double best = -kInf;
            for (State y : *ctx.options) {
                // lifetime surplus if prices stayed put
                const double val = dot(values_[cls], unit(y)) * w;
                const double pay = ctx.priced[index_of(y)]
                                       ? (sold_once(setting(), y) && y != ctx.x ? c[index_of(y)]
                                                                                 : c[index_of(y)] * w)
                                       : 0.0;
                if (val - pay > best + 1e-12) {
                    best = val - pay;
                    pick = y;
                }
            }
            out.push_back(static_cast<std::uint8_t>(index_of(pick)));
        }
        return out;
    }

    void add_family(const Ctx& ctx, std::set<Partition>& pool) const {
        const auto& opts = *ctx.options;
        const auto& mem = *ctx.members;
        const State ref = opts.back();
        const std::size_t n = opts.size();
        std::vector<std::vector<double>> f(n - 1, std::vector<double>(mem.size()));
        for (std::size_t j = 0; j + 1 < n; ++j)
            for (std::size_t k = 0; k < mem.size(); ++k)
                f[j][k] = dot(values_[mem[k]], unit(opts[j])) - dot(values_[mem[k]], unit(ref));
        auto cuts = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            std::vector<double> m{v.front() - 1.0};
            for (std::size_t i = 1; i < v.size(); ++i) m.push_back(0.5 * (v[i - 1] + v[i]));
            m.push_back(v.back() + 1.0);
            return m;
        };
        auto assign = [&](const std::vector<double>& e) {
            Partition p(mem.size());
            for (std::size_t k = 0; k < mem.size(); ++k) {
                std::size_t pick = n - 1;
                double best = 0.0;
                for (std::size_t j = 0; j + 1 < n; ++j)
                    if (f[j][k] - e[j] > best) {
                        best = f[j][k] - e[j];
                        pick = j;
                    }
                p[k] = static_cast<std::uint8_t>(index_of(opts[pick]));
            }
            pool.insert(std::move(p));
        };
        if (n == 2) {
            for (double e : cuts(f[0])) assign({e});
            return;
        }
        std::vector<double> diff(mem.size());
        for (std::size_t k = 0; k < mem.size(); ++k) diff[k] = f[0][k] - f[1][k];
        const auto m0 = cuts(f[0]), m1 = cuts(f[1]), md = cuts(diff);
        for (double e0 : m0) {
            for (double e1 : m1) assign({e0, e1});
            for (double d : md) assign({e0, e0 - d});
        }
        for (double e1 : m1)
            for (double d : md) assign({e1 + d, e1});
    }

    int solve(int t, State x, const std::vector<std::uint32_t>& members) {
        NodeKey key = key_of(t, x, members);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        if (tree_->nodes.size() + 1 > opt_.node_budget)
            throw BudgetExceeded("node budget of " + std::to_string(opt_.node_budget) + " exhausted",
                                 tree_->nodes.size());

        SolvedNode node;
        node.period = t;
        node.state = x;
        node.members = members;
        for (auto m : members) node.mass += tree_->classes[m].mass;

        if (setting().graph.is_absorbing(x)) {
            node.leaf = true;
            node.choices.assign(members.size(), x);
            node.segment_mass[index_of(x)] = node.mass;
            return store(std::move(key), std::move(node));
        }

        Ctx ctx;
        ctx.t = t;
        ctx.x = x;
        ctx.members = &members;
        ctx.options = &succ_[index_of(x)];
        ctx.last = t == setting().last_period();
        for (State i : kVarieties) {
            const double scale = price_scale(setting(), t, x, i);
            auto& axis = ctx.axis[index_of(i)];
            if (scale == 0.0) {
                axis = {0.0};
                continue;
            }
            ctx.priced[index_of(i)] = true;
            for (double q : grid_[index_of(i)]) axis.push_back(q * scale);
        }

        std::set<Partition> pool;
        const std::size_t k = members.size();
        const std::size_t nopt = ctx.options->size();
        double total = 1.0;
        for (std::size_t i = 0; i < k && total <= 1e18; ++i) total *= static_cast<double>(nopt);
        if (total <= static_cast<double>(opt_.enumeration_limit)) {
            Partition p(k, 0);
            std::vector<std::size_t> digit(k, 0);
            for (;;) {
                for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<std::uint8_t>(index_of((*ctx.options)[digit[i]]));
                pool.insert(p);
                std::size_t i = 0;
                while (i < k && ++digit[i] == nopt) digit[i++] = 0;
                if (i == k) break;
            }
        } else {
            if (nopt == 2 || k <= opt_.family_limit) add_family(ctx, pool);
            search_fixed_points(ctx, pool);
            if (k <= opt_.local_search_limit) local_search(ctx, pool);
        }

        // choose the seller-best (price, partition); ties go to the largest price, then the smallest
        // partition. High prices at indifferent nodes keep deviations upstream unattractive.
        std::vector<std::pair<const Partition*, Region>> regions;
        regions.reserve(pool.size());
        std::optional<double> top;
        for (const auto& p : pool) {
            Region r = region_of(ctx, p);
            if (auto v = best_value(ctx, r)) {
                if (!top || *v > *top) top = v;
                regions.emplace_back(&p, std::move(r));
            }
        }
        if (!top)
            throw NoEquilibrium("no pure consumer response at any grid price: period " +
                                std::to_string(t) + ", state " + state_char(x) + ", " +
                                std::to_string(k) + " classes");
        const double target = *top - opt_.tolerance;
        const Partition* chosen = nullptr;
        const Region* chosen_region = nullptr;
        Vec2 chosen_price{-kInf, -kInf};
        for (const auto& [p, r] : regions) {
            auto c = last_price(ctx, r, target);
            if (!c) continue;
            if (!chosen || *c > chosen_price) {
                chosen = p;
                chosen_region = &r;
                chosen_price = *c;
            }
        }

        node.prices.p = {ctx.priced[0] ? chosen_price[0] : 0.0, ctx.priced[1] ? chosen_price[1] : 0.0};
        node.prices.offered = {ctx.priced[0], ctx.priced[1]};
        node.choices.reserve(k);
        for (auto c : *chosen) node.choices.push_back(static_cast<State>(c));
        node.segment_mass = chosen_region->mass;
        node.receipts = chosen_price[0] * chosen_region->ma + chosen_price[1] * chosen_region->mb;
        node.seller_value = node.receipts + chosen_region->cont;
        if (!ctx.last) node.child = chosen_region->child;

        const Vec2 c = node.prices.p;
        node.utility.resize(tree_->classes.size());
        for (std::size_t cls = 0; cls < tree_->classes.size(); ++cls) {
            double best = -kInf;
            for (State y : *ctx.options)
                best = std::max(best, gross(ctx, node.child, cls, y) - posted(ctx, y, c));
            node.utility[cls] = best;
        }
        return store(std::move(key), std::move(node));
    }

    // hill-climb on seller value by moving one class at a time, from the best pool members
    void local_search(const Ctx& ctx, std::set<Partition>& pool) {
        std::vector<std::pair<double, Partition>> ranked;
        for (const auto& p : pool)
            if (auto v = best_value(ctx, region_of(ctx, p))) ranked.emplace_back(*v, p);
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        if (ranked.size() > 3) ranked.resize(3);
        for (auto [val, p] : ranked) {
            for (bool moved = true; moved;) {
                moved = false;
                for (std::size_t m = 0; m < p.size(); ++m)
                    for (State y : *ctx.options) {
                        const auto yi = static_cast<std::uint8_t>(index_of(y));
                        if (p[m] == yi) continue;
                        Partition q = p;
                        q[m] = yi;
                        const auto v = best_value(ctx, region_of(ctx, q));
                        if (v && *v > val + opt_.tolerance) {
                            val = *v;
                            p = std::move(q);
                            moved = true;
                        }
                    }
            }
            pool.insert(std::move(p));
        }
    }

    void search_fixed_points(const Ctx& ctx, std::set<Partition>& pool) {
        const auto& A = ctx.axis[0];
        const auto& B = ctx.axis[1];
        std::optional<Partition> warm;
        for (double ca : A)
            for (double cb : B) {
                const Vec2 c{ca, cb};
                std::vector<Partition> seeds{myopic_seed(ctx, c)};
                if (warm) seeds.push_back(*warm);
                seeds.emplace_back(ctx.members->size(), static_cast<std::uint8_t>(index_of(ctx.x)));
                for (auto& p : seeds) {
                    for (int it = 0; it < opt_.max_iterations; ++it) {
                        Partition q = best_response(ctx, p, c);
                        if (q == p) {
                            warm = p;
                            pool.insert(std::move(p));
                            break;
                        }
                        p = std::move(q);
                    }
                }
            }
    }

    int store(NodeKey key, SolvedNode node) {
        const int id = static_cast<int>(tree_->nodes.size());
        tree_->nodes.push_back(std::move(node));
        memo_.emplace(std::move(key), id);
        return id;
    }

    const SolverOptions& opt_;
    std::shared_ptr<SolvedTree> tree_;
    std::array<std::vector<double>, 2> grid_;
    std::array<std::vector<State>, 3> succ_;
    std::vector<Vec2> values_;
    std::unordered_map<NodeKey, int, KeyHash> memo_;
};

}  // namespace

std::vector<OnPathNode> on_path_nodes(const SolvedTree& tree) {
    std::vector<OnPathNode> out;
    const auto walk = [&](auto&& self, int n, std::string sig) -> void {
        out.push_back({n, sig});
        const auto& node = tree.nodes[n];
        if (node.leaf) return;
        for (State y : kStates)
            if (node.child[index_of(y)] >= 0 && node.chosen(y))
                self(self, node.child[index_of(y)], sig + state_char(y));
    };
    walk(walk, tree.root, "h");
    return out;
}

EquilibriumOutcome summarize(std::shared_ptr<SolvedTree> tree, double grid_step) {
    EquilibriumOutcome out;
    const auto& s = tree->setting;
    out.profit = tree->nodes[tree->root].seller_value;
    out.nodes = tree->nodes.size();
    out.grid_step = grid_step;
    out.residual_trading_up.assign(s.horizon, 0.0);

    const auto walk = [&](auto&& self, int n, const std::string& sig) -> void {
        const auto& node = tree->nodes[n];
        // mass whose state after this node's choice still has a strictly better admissible move
        double residual = 0.0;
        for (std::size_t k = 0; k < node.members.size(); ++k) {
            const auto& cls = tree->classes[node.members[k]];
            const State y = node.choices[k];
            for (State z : s.graph.successors(y))
                if (dot(cls.v, unit(z)) > dot(cls.v, unit(y))) {
                    residual += cls.mass;
                    break;
                }
        }
        if (node.leaf) {
            for (int t = node.period; t < s.horizon; ++t) out.residual_trading_up[t] += residual;
            return;
        }
        out.residual_trading_up[node.period] += residual;
        PriceRow row;
        row.period = node.period;
        row.signature = sig;
        row.state = node.state;
        row.prices = node.prices;
        row.mass = node.segment_mass;
        row.traded_up_mass = residual;
        row.node = n;
        out.price_path.push_back(row);
        for (State y : kStates)
            if (node.child[index_of(y)] >= 0 && node.chosen(y))
                self(self, node.child[index_of(y)], sig + state_char(y));
    };
    walk(walk, tree->root, "h");
    out.tree = std::move(tree);
    out.exhaustion_period = exhaustion_time(out);
    return out;
}

EquilibriumOutcome solve_pbe(const Setting& setting, const PriceGridSpec& spec,
                             const SolverOptions& options) {
    setting.validate();
    Solver solver(setting, spec, options);
    return summarize(solver.run(), spec.coarse_step());
}

EquilibriumOutcome refine_solution(const EquilibriumOutcome& coarse, const PriceGridSpec& spec,
                                   const SolverOptions& options) {
    const auto& s = coarse.tree->setting;
    double lo = kInf, hi = -kInf;
    for (const auto& row : coarse.price_path)
        for (State i : kVarieties) {
            if (!row.prices.is_offered(i)) continue;
            const double k = price_scale(s, row.period, row.state, i);
            const double q = row.prices.price(i) / k;
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
    PriceGridSpec fine = spec;
    fine.points.clear();
    const double step = spec.coarse_step();
    fine.step = step / spec.refinement_factor;
    fine.lo = std::isfinite(lo) ? lo - step : spec.lo;
    fine.hi = std::isfinite(hi) ? hi + step : spec.hi;
    fine.refinement_rounds = 0;
    Solver solver(s, fine, options);
    return summarize(solver.run(), fine.step);
}

}  // namespace tradeup
