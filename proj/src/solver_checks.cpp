#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "tradeup/dynamic_solver.hpp"

namespace tradeup {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t member_slot(const SolvedNode& node, std::uint32_t cls) {
    auto it = std::lower_bound(node.members.begin(), node.members.end(), cls);
    if (it == node.members.end() || *it != cls) throw std::logic_error("class is not a member of node");
    return static_cast<std::size_t>(it - node.members.begin());
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

// every admissible continuation from node n with its consumption and payment, walking the tree
struct PathOutcome {
    std::vector<State> choices;
    Vec2 chi{0.0, 0.0};
    double payment = 0.0;
};

std::vector<PathOutcome> tree_paths(const SolvedTree& tree, int n) {
    std::vector<PathOutcome> out;
    const auto& s = tree.setting;
    const int T = s.last_period();
    PathOutcome cur;
    const auto walk = [&](auto&& self, int node_id, int t, State prev, double disc) -> void {
        if (t > T) {
            out.push_back(cur);
            return;
        }
        const SolvedNode* node = node_id >= 0 ? &tree.nodes[node_id] : nullptr;
        for (State y : s.graph.successors(prev)) {
            const double c = node && !node->leaf ? tree.cost(node_id, y) : 0.0;
            const Vec2 u = unit(y);
            cur.choices.push_back(y);
            cur.chi[0] += disc * u[0];
            cur.chi[1] += disc * u[1];
            cur.payment += disc * c;
            int next = -1;
            if (node && node->leaf) next = node_id;
            else if (node) next = node->child[index_of(y)];
            self(self, next, t + 1, y, disc * s.delta);
            cur.payment -= disc * c;
            cur.chi[0] -= disc * u[0];
            cur.chi[1] -= disc * u[1];
            cur.choices.pop_back();
        }
    };
    const auto& root = tree.nodes[n];
    walk(walk, n, root.period, root.state, 1.0);
    return out;
}
}  // namespace

std::vector<RealizedPath> realized_paths(const SolvedTree& tree, int n) {
    const auto& s = tree.setting;
    const int T = s.last_period();
    const auto& start = tree.nodes[n];
    std::map<std::vector<State>, RealizedPath> groups;
    for (auto cls : start.members) {
        RealizedPath rp;
        rp.path.start_period = start.period;
        rp.path.previous = start.state;
        double disc = 1.0;
        int id = n;
        for (int t = start.period; t <= T; ++t) {
            const auto& node = tree.nodes[id];
            State y;
            if (node.leaf) {
                y = node.state;
            } else {
                y = node.choices[member_slot(node, cls)];
                rp.payment += disc * tree.cost(id, y);
                if (t < T) id = node.child[index_of(y)];
            }
            rp.path.choices.push_back(y);
            disc *= s.delta;
        }
        auto& g = groups[rp.path.choices];
        if (g.members.empty()) {
            g = rp;
            g.chi = total_consumption(rp.path, s.delta, T);
        }
        g.members.push_back(cls);
        g.mass += tree.classes[cls].mass;
    }
    std::vector<RealizedPath> out;
    for (auto& [k, g] : groups) out.push_back(std::move(g));
    return out;
}

DecompositionResult revenue_decomposition_check(const EquilibriumOutcome& solved, int node) {
    const auto& tree = *solved.tree;
    auto paths = realized_paths(tree, node);
    std::stable_sort(paths.begin(), paths.end(),
                     [](const RealizedPath& a, const RealizedPath& b) { return a.payment < b.payment; });
    DecompositionResult r;
    r.paths = static_cast<int>(paths.size());
    for (const auto& p : paths) r.direct += p.mass * p.payment;
    if (paths.empty()) return r;

    double above = 0.0;
    for (const auto& p : paths) above += p.mass;
    r.decomposed = paths[0].payment * above;
    const double tol = 1e-9;
    for (std::size_t k = 1; k < paths.size(); ++k) {
        above -= paths[k - 1].mass;
        const auto& hi = paths[k];
        const auto& lo = paths[k - 1];
        const Vec2 dchi{hi.chi[0] - lo.chi[0], hi.chi[1] - lo.chi[1]};
        const double drho = hi.payment - lo.payment;
        auto g = [&](const Vec2& v) { return dot(v, dchi) - drho; };
        // the member of each path closest to indifference between the two
        Vec2 vh{}, vl{};
        double gh = kInf, gl = -kInf;
        for (auto c : hi.members)
            if (g(tree.classes[c].v) < gh) {
                gh = g(tree.classes[c].v);
                vh = tree.classes[c].v;
            }
        for (auto c : lo.members)
            if (g(tree.classes[c].v) > gl) {
                gl = g(tree.classes[c].v);
                vl = tree.classes[c].v;
            }
        if (gh < -tol || gl > tol) r.consistent = false;
        Vec2 vstar = vh;
        if (std::abs(gh) > 1e-12) {
            ++r.interpolated;
            if (gh == gl) {
                r.consistent = false;
            } else {
                const double s = gh / (gh - gl);
                vstar = {vh[0] + s * (vl[0] - vh[0]), vh[1] + s * (vl[1] - vh[1])};
            }
        }
        const double dnu = dot(vstar, dchi);
        r.decomposed += dnu * above;
    }
    return r;
}

bool price_floor_check(const EquilibriumOutcome& solved, const StaticOptimum& pbar_result,
                       double grid_step, std::string* detail) {
    const auto& s = solved.tree->setting;
    for (const auto& row : solved.price_path)
        for (State i : kVarieties) {
            if (!row.prices.is_offered(i) || !pbar_result.prices.is_offered(i)) continue;
            const double k = price_scale(s, row.period, row.state, i);
            const double q = row.prices.price(i) / k;
            if (q < pbar_result.prices.price(i) - grid_step - 1e-12) {
                if (detail)
                    *detail = "period " + std::to_string(row.period) + " history " + row.signature +
                              ": " + state_char(i) + " at " + fmt(q) + " below floor " +
                              fmt(pbar_result.prices.price(i));
                return false;
            }
        }
    return true;
}

double epsilon_exhaustion_bound_at(double v_low_i, double v_low_j, double lambda, double phi,
                                   double weight) {
    const double den = weight - 1.0 + lambda;
    if (!(den > 0.0)) throw std::invalid_argument("horizon weight minus one plus lambda must be positive");
    return ((1.0 - lambda) * v_low_i + phi * weight * (v_low_j - v_low_i)) / den;
}

double epsilon_exhaustion_bound(double v_low_i, double v_low_j, double lambda, double phi,
                                double delta, int t, int T) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0,1)");
    if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("phi must lie in [0,1]");
    return epsilon_exhaustion_bound_at(v_low_i, v_low_j, lambda, phi, horizon_weight(delta, t, T));
}

std::optional<int> exhaustion_time(const EquilibriumOutcome& solved) {
    const auto& r = solved.residual_trading_up;
    int first = static_cast<int>(r.size());
    for (int t = static_cast<int>(r.size()) - 1; t >= 0; --t) {
        if (r[t] > 0.0) break;
        first = t;
    }
    if (first == static_cast<int>(r.size())) return std::nullopt;
    return first;
}

bool ordering_paths_check(const TypeAtom& v_tilde, const TypeAtom& v, const ConsumptionPath& path_k,
                          const ConsumptionPath& path_l, double delta) {
    if (path_k.start_period != path_l.start_period || path_k.choices.size() != path_l.choices.size())
        throw std::invalid_argument("paths must cover the same periods");
    const int T = path_k.start_period + static_cast<int>(path_k.choices.size()) - 1;
    const Vec2 ck = total_consumption(path_k, delta, T);
    const Vec2 cl = total_consumption(path_l, delta, T);
    if (ck == cl) throw std::invalid_argument("paths have equal total consumption");
    const Vec2 d{v_tilde.va - v.va, v_tilde.vb - v.vb};
    // orthogonal differences sit exactly on the boundary; allow for rounding in v_tilde - v
    return d[0] * (ck[0] - cl[0]) + d[1] * (ck[1] - cl[1]) >= -1e-12;
}

ContinuationSets ContinuationSets::build(const Setting& setting) {
    ContinuationSets cs;
    const int T = setting.last_period();
    cs.sets.resize(T + 2);
    for (int t = 0; t <= T; ++t)
        for (State x : kStates) {
            std::vector<Vec2> v;
            for (const auto& p : enumerate_paths(setting, x, t)) v.push_back(total_consumption(p, setting.delta, T));
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            cs.sets[t][index_of(x)] = std::move(v);
        }
    return cs;
}

const std::vector<Vec2>& ContinuationSets::after(int t, State x) const { return sets.at(t)[index_of(x)]; }

namespace {
// (v~ - v).(x - x') + delta*min over continuations after x - delta*max after x'
double skimming_margin(const Vec2& d, State x, State xp, const std::vector<Vec2>& after_x,
                       const std::vector<Vec2>& after_xp, double delta) {
    double m = dot(d, unit(x)) - dot(d, unit(xp));
    if (after_x.empty() != after_xp.empty()) throw std::invalid_argument("continuation sets disagree");
    if (!after_x.empty()) {
        double lo = kInf, hi = -kInf;
        for (const auto& c : after_x) lo = std::min(lo, dot(d, c));
        for (const auto& c : after_xp) hi = std::max(hi, dot(d, c));
        m += delta * (lo - hi);
    }
    return m;
}
}  // namespace

bool ordering_choice_check(const TypeAtom& v_tilde, const TypeAtom& v, State x, State x_prime,
                           const ContinuationSets& paths, double delta, int t, int T) {
    const Vec2 d{v_tilde.va - v.va, v_tilde.vb - v.vb};
    static const std::vector<Vec2> none;
    const auto& ax = t < T ? paths.after(t + 1, x) : none;
    const auto& axp = t < T ? paths.after(t + 1, x_prime) : none;
    if (t < T && (ax.empty() || axp.empty())) throw std::invalid_argument("empty continuation set");
    return skimming_margin(d, x, x_prime, ax, axp, delta) >= 0.0;
}

Check bellman_check(const EquilibriumOutcome& solved, double tol) {
    Check c{"bellman", true, "", tol};
    const auto& tree = *solved.tree;
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
        const auto& node = tree.nodes[n];
        if (node.leaf) {
            if (node.seller_value != 0.0) {
                c.passed = false;
                c.detail = "leaf with nonzero value";
                return c;
            }
            continue;
        }
        std::array<double, 3> mass{0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < node.members.size(); ++k)
            mass[index_of(node.choices[k])] += tree.classes[node.members[k]].mass;
        double v = 0.0;
        for (State y : kStates) {
            v += mass[index_of(y)] * tree.cost(static_cast<int>(n), y);
            if (node.child[index_of(y)] >= 0 && node.chosen(y))
                v += tree.setting.delta * tree.nodes[node.child[index_of(y)]].seller_value;
        }
        if (std::abs(v - node.seller_value) > tol) {
            c.passed = false;
            c.detail = "node " + std::to_string(n) + ": stored " + fmt(node.seller_value) +
                       ", rederived " + fmt(v);
            return c;
        }
    }
    if (std::abs(solved.profit - tree.nodes[tree.root].seller_value) > tol) {
        c.passed = false;
        c.detail = "profit differs from the root value";
    }
    return c;
}

namespace {
Check consumer_rationality_impl(const EquilibriumOutcome& solved, double eps) {
    Check c{"consumer_rationality", true, "", eps};
    const auto& tree = *solved.tree;
    const auto root_paths = tree_paths(tree, tree.root);
    for (std::size_t cls = 0; cls < tree.classes.size(); ++cls)
        if (tree.utility(tree.root, cls) < -eps) {
            c.passed = false;
            c.detail = "class " + std::to_string(cls) + " has negative total utility";
            return c;
        }
    for (const auto& on : on_path_nodes(tree)) {
        const auto& node = tree.nodes[on.node];
        if (node.leaf) continue;
        const auto alts = on.node == tree.root ? root_paths : tree_paths(tree, on.node);
        const auto real = realized_paths(tree, on.node);
        for (const auto& rp : real)
            for (auto cls : rp.members) {
                const Vec2& v = tree.classes[cls].v;
                const double mine = dot(v, rp.chi) - rp.payment;
                for (const auto& alt : alts) {
                    const double u = dot(v, alt.chi) - alt.payment;
                    if (u > mine + eps) {
                        std::string path;
                        for (State y : alt.choices) path.push_back(state_char(y));
                        c.passed = false;
                        c.detail = "history " + on.signature + ", class " + std::to_string(cls) +
                                   " gains " + fmt(u - mine) + " by following " + path;
                        return c;
                    }
                }
            }
    }
    return c;
}

}  // namespace

Check skimming_check(const EquilibriumOutcome& solved, double tol) {
    Check c{"skimming", true, "", tol};
    const auto& tree = *solved.tree;
    const auto& s = tree.setting;
    const int T = s.last_period();
    const auto sets = ContinuationSets::build(s);
    static const std::vector<Vec2> none;
    std::size_t pairs = 0;
    for (const auto& on : on_path_nodes(tree)) {
        const auto& node = tree.nodes[on.node];
        if (node.leaf) continue;
        const int t = node.period;
        const auto opts = s.graph.successors(node.state);
        for (State x1 : opts)
            for (State x2 : opts) {
                if (x1 == x2) continue;
                const auto& a1 = t < T ? sets.after(t + 1, x1) : none;
                const auto& a2 = t < T ? sets.after(t + 1, x2) : none;
                std::vector<std::uint32_t> weak, strict_other;
                for (auto cls : node.members) {
                    const double d = tree.choice_utility(on.node, cls, x1) - tree.choice_utility(on.node, cls, x2);
                    if (d >= -tol) weak.push_back(cls);
                    else strict_other.push_back(cls);
                }
                // only pairs where v weakly prefers x1 and v~ strictly prefers x2 can fail
                for (auto v : weak)
                    for (auto vt : strict_other) {
                        ++pairs;
                        const Vec2 d{tree.classes[vt].v[0] - tree.classes[v].v[0],
                                     tree.classes[vt].v[1] - tree.classes[v].v[1]};
                        if (skimming_margin(d, x1, x2, a1, a2, s.delta) >= 0.0) {
                            c.passed = false;
                            c.detail = "history " + on.signature + ": class " + std::to_string(vt) +
                                       " should weakly prefer " + state_char(x1) + " over " +
                                       state_char(x2) + " like class " + std::to_string(v);
                            return c;
                        }
                    }
            }
    }
    c.detail = std::to_string(pairs) + " candidate pairs examined";
    return c;
}

namespace {
Check decomposition_impl(const EquilibriumOutcome& solved, double tol) {
    Check c{"revenue_decomposition", true, "", tol};
    const auto& tree = *solved.tree;
    int interpolated = 0, nodes = 0;
    for (const auto& on : on_path_nodes(tree)) {
        const auto r = revenue_decomposition_check(solved, on.node);
        const double stored = tree.nodes[on.node].seller_value;
        ++nodes;
        interpolated += r.interpolated;
        if (!r.consistent || std::abs(r.direct - r.decomposed) > tol || std::abs(r.direct - stored) > tol) {
            c.passed = false;
            c.detail = "history " + on.signature + ": payments " + fmt(r.direct) + ", decomposed " +
                       fmt(r.decomposed) + ", stored " + fmt(stored) +
                       (r.consistent ? "" : ", a member sits on the wrong side of its indifference line");
            return c;
        }
    }
    c.detail = std::to_string(nodes) + " nodes, " + std::to_string(interpolated) + " interpolated steps";
    return c;
}

}  // namespace

Check consumer_rationality_check(const EquilibriumOutcome& solved, double eps) {
    try {
        return consumer_rationality_impl(solved, eps);
    } catch (const std::logic_error& e) {
        return Check{"consumer_rationality", false, e.what(), eps};
    }
}

Check decomposition_suite(const EquilibriumOutcome& solved, double tol) {
    try {
        return decomposition_impl(solved, tol);
    } catch (const std::logic_error& e) {
        return Check{"revenue_decomposition", false, e.what(), tol};
    }
}

PlanOutcome simulate_plan(const Setting& setting, const std::vector<ConsumerClass>& classes,
                          const PricePlan& plan) {
    const int T = setting.last_period();
    const auto paths = enumerate_paths(setting, setting.initial_state, 0);
    std::vector<Vec2> chi;
    std::vector<double> pay;
    for (const auto& p : paths) {
        chi.push_back(total_consumption(p, setting.delta, T));
        double rho = 0.0, disc = 1.0;
        State prev = setting.initial_state;
        for (int t = 0; t <= T; ++t) {
            const State y = p.choices[t];
            const auto pp = posted_profile(setting, t, prev, plan(t, prev));
            rho += disc * (pp.is_offered(y) ? pp.price(y) : 0.0);
            disc *= setting.delta;
            prev = y;
        }
        pay.push_back(rho);
    }
    PlanOutcome out;
    out.residual_trading_up.assign(setting.horizon, 0.0);
    for (const auto& cls : classes) {
        std::size_t best = 0;
        double bu = -kInf;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const double u = dot(cls.v, chi[i]) - pay[i];
            if (u > bu + 1e-9) {
                best = i;
                bu = u;
            } else if (u >= bu - 1e-9) {
                if (std::abs(pay[i] - pay[best]) > 1e-12) out.best_response_unique = false;
                if (pay[i] > pay[best] + 1e-12) {
                    best = i;
                    bu = std::max(bu, u);
                }
            }
        }
        out.paths.push_back(paths[best]);
        out.utility.push_back(dot(cls.v, chi[best]) - pay[best]);
        out.profit += cls.mass * pay[best];
        for (int t = 0; t <= T; ++t) {
            const State y = paths[best].choices[t];
            for (State z : setting.graph.successors(y))
                if (dot(cls.v, unit(z)) > dot(cls.v, unit(y))) {
                    out.residual_trading_up[t] += cls.mass;
                    break;
                }
        }
    }
    return out;
}

MonopolyCertificate verify_monopoly_pbe(const Setting& setting, const PriceGridSpec& spec) {
    const auto cls = classify_setting(setting, spec);
    if (!cls.monopoly_strategies_apply())
        throw PreconditionFailed("monopoly allocation leaves trading-up opportunities (" +
                                 std::string(class_name(cls.kind)) + ")");
    MonopolyCertificate cert;
    cert.monopoly = cls.monopoly;
    const Vec2 q = cls.monopoly.prices.p;
    const int T = setting.last_period();
    const auto classes = merge_classes(setting);
    const double W0 = horizon_weight(setting.delta, 0, T);
    cert.target_profit = cls.monopoly.profit * W0;

    // myopic play: the static choice each period at the per-period prices
    auto per_period = [&](State from, const Vec2& p) {
        PriceProfile pp;
        for (State i : kVarieties)
            if (price_scale(setting, 0, from, i) != 0.0) {
                pp.offered[index_of(i)] = true;
                pp.p[index_of(i)] = p[index_of(i)];
            }
        return pp;
    };
    auto myopic_path = [&](const TypeAtom& a, int t0, State from, const Vec2& first) {
        std::vector<State> path;
        State prev = from;
        for (int t = t0; t <= T; ++t) {
            const State y = static_choice(a, per_period(prev, t == t0 ? first : q), setting, prev);
            path.push_back(y);
            prev = y;
        }
        return path;
    };
    auto payment = [&](const std::vector<State>& path, int t0, State from, const Vec2& first) {
        double rho = 0.0, disc = 1.0;
        State prev = from;
        for (std::size_t k = 0; k < path.size(); ++k) {
            const int t = t0 + static_cast<int>(k);
            const auto pp = posted_profile(setting, t, prev, k == 0 ? first : q);
            rho += disc * (pp.is_offered(path[k]) ? pp.price(path[k]) : 0.0);
            disc *= setting.delta;
            prev = path[k];
        }
        return rho;
    };

    const auto best = simulate_plan(setting, classes, [&](int, State) { return q; });
    cert.consumers_ok = true;
    std::vector<std::vector<State>> myopic;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const TypeAtom a{classes[c].v[0], classes[c].v[1], classes[c].mass};
        myopic.push_back(myopic_path(a, 0, setting.initial_state, q));
        const ConsumptionPath mp{0, setting.initial_state, myopic.back()};
        const double u = dot(a.values(), total_consumption(mp, setting.delta, T)) -
                         payment(myopic.back(), 0, setting.initial_state, q);
        cert.plan_profit += a.mass * payment(myopic.back(), 0, setting.initial_state, q);
        if (u < best.utility[c] - 1e-9 && cert.consumers_ok) {
            cert.consumers_ok = false;
            cert.first_violation = "class (" + fmt(a.va) + "," + fmt(a.vb) + ") gains " +
                                   fmt(best.utility[c] - u) + " by deviating from myopic play";
        }
    }

    // one-shot seller deviations at every on-path history, consumers myopic afterwards
    cert.seller_ok = true;
    std::array<std::vector<double>, 2> axis;
    for (State i : kVarieties) {
        const auto& f = setting.fixed_price[index_of(i)];
        axis[index_of(i)] = f ? std::vector<double>{*f}
                              : spec.candidates(setting.price_floor, setting.price_cap[index_of(i)]);
        axis[index_of(i)].push_back(q[index_of(i)]);
    }
    for (int t = 0; t <= T && cert.seller_ok; ++t) {
        std::map<std::vector<State>, std::vector<std::size_t>> groups;
        for (std::size_t c = 0; c < classes.size(); ++c)
            groups[std::vector<State>(myopic[c].begin(), myopic[c].begin() + t)].push_back(c);
        for (const auto& [hist, members] : groups) {
            const State from = t == 0 ? setting.initial_state : hist.back();
            double plan = 0.0;
            for (auto c : members)
                plan += classes[c].mass *
                        payment(std::vector<State>(myopic[c].begin() + t, myopic[c].end()), t, from, q);
            for (double pa : axis[0])
                for (double pb : axis[1]) {
                    const Vec2 dev{pa, pb};
                    double profit = 0.0;
                    for (auto c : members) {
                        const TypeAtom a{classes[c].v[0], classes[c].v[1], classes[c].mass};
                        profit += a.mass * payment(myopic_path(a, t, from, dev), t, from, dev);
                    }
                    if (profit > plan + 1e-9) {
                        cert.seller_ok = false;
                        cert.first_violation = "period " + std::to_string(t) + ": deviating to (" +
                                               fmt(pa) + "," + fmt(pb) + ") raises profit from " +
                                               fmt(plan) + " to " + fmt(profit);
                        break;
                    }
                }
            if (!cert.seller_ok) break;
        }
    }
    cert.passed = cert.consumers_ok && cert.seller_ok &&
                  std::abs(cert.plan_profit - cert.target_profit) <= 1e-9;
    if (cert.consumers_ok && cert.seller_ok && !cert.passed)
        cert.first_violation = "plan profit " + fmt(cert.plan_profit) + " differs from " + fmt(cert.target_profit);
    return cert;
}

}  // namespace tradeup
