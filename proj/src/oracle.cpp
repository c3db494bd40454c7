#include "tradeup/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tradeup {

namespace {

constexpr double kTol = 1e-9;

class BruteForce {
public:
    explicit BruteForce(const OracleInstance& inst) : inst_(inst), tree_(std::make_shared<SolvedTree>()) {
        const auto& s = inst.setting;
        s.validate();
        tree_->setting = s;
        // group atoms by the values the game can reach
        bool reach_a = false, reach_b = false;
        for (State x : reachable_states(s)) {
            reach_a |= x == State::A;
            reach_b |= x == State::B;
        }
        std::map<std::pair<double, double>, ConsumerClass> groups;
        for (std::size_t i = 0; i < s.population.size(); ++i) {
            const auto& a = s.population[i];
            const std::pair<double, double> key{reach_a ? a.va : 0.0, reach_b ? a.vb : 0.0};
            auto& g = groups[key];
            g.v = {key.first, key.second};
            g.mass += a.mass;
            g.atoms.push_back(i);
        }
        for (auto& [k, g] : groups)
            if (g.mass > 0.0) tree_->classes.push_back(g);
        if (tree_->classes.size() > 16) throw std::invalid_argument("oracle instances hold at most 16 classes");
        for (int t = 0; t < s.horizon; ++t) tree_->weight.push_back(horizon_weight(s.delta, t, s.last_period()));
        memo_.assign(s.horizon, {});
    }

    std::shared_ptr<SolvedTree> run() {
        const unsigned all = (1u << tree_->classes.size()) - 1u;
        tree_->root = node(0, tree_->setting.initial_state, all);
        return tree_;
    }

private:
    std::vector<std::uint32_t> members_of(unsigned mask) const {
        std::vector<std::uint32_t> m;
        for (std::uint32_t i = 0; i < tree_->classes.size(); ++i)
            if (mask & (1u << i)) m.push_back(i);
        return m;
    }

    // best total utility of class c entering node n, over every admissible path through the tree
    double best_path(int n, std::size_t c) {
        auto key = std::make_pair(n, c);
        if (auto it = path_memo_.find(key); it != path_memo_.end()) return it->second;
        const auto& s = tree_->setting;
        const auto& nd = tree_->nodes[n];
        const Vec2& v = tree_->classes[c].v;
        double best;
        if (nd.leaf) {
            best = dot(v, unit(nd.state)) * horizon_weight(s.delta, nd.period, s.last_period());
        } else {
            best = -std::numeric_limits<double>::infinity();
            for (State y : s.graph.successors(nd.state)) {
                double u = dot(v, unit(y)) - (nd.prices.is_offered(y) ? nd.prices.price(y) : 0.0);
                if (nd.child[index_of(y)] >= 0) u += s.delta * best_path(nd.child[index_of(y)], c);
                best = std::max(best, u);
            }
        }
        path_memo_[key] = best;
        return best;
    }

    int node(int t, State x, unsigned mask) {
        if (auto it = memo_[t].find({x, mask}); it != memo_[t].end()) return it->second;
        const auto& s = tree_->setting;
        const int T = s.last_period();
        const auto members = members_of(mask);
        SolvedNode nd;
        nd.period = t;
        nd.state = x;
        nd.members = members;
        for (auto m : members) nd.mass += tree_->classes[m].mass;
        if (s.graph.is_absorbing(x)) {
            nd.leaf = true;
            nd.choices.assign(members.size(), x);
            nd.segment_mass[index_of(x)] = nd.mass;
            return store(t, x, mask, std::move(nd));
        }

        const auto opts = s.graph.successors(x);
        std::array<std::vector<double>, 2> posted;
        std::array<bool, 2> priced{false, false};
        for (State i : kVarieties) {
            const int k = index_of(i);
            const double scale = price_scale(s, t, x, i);
            if (scale == 0.0) {
                posted[k] = {0.0};
                continue;
            }
            priced[k] = true;
            const auto& f = s.fixed_price[k];
            for (double q : f ? std::vector<double>{*f} : inst_.grid.candidates(s.price_floor, s.price_cap[k]))
                posted[k].push_back(q * scale);
        }

        // all partitions, in the order of their choice vectors
        const std::size_t k = members.size();
        std::vector<std::vector<std::uint8_t>> parts;
        std::vector<std::size_t> digit(k, 0);
        for (;;) {
            std::vector<std::uint8_t> p(k);
            for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<std::uint8_t>(index_of(opts[digit[i]]));
            parts.push_back(p);
            std::size_t i = 0;
            while (i < k && ++digit[i] == opts.size()) digit[i++] = 0;
            if (i == k) break;
        }
        std::sort(parts.begin(), parts.end());

        struct Candidate {
            Vec2 price;
            std::size_t part;
            double value;
            std::array<int, 3> child;
        };
        std::vector<Candidate> ok;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            const auto& p = parts[pi];
            std::array<int, 3> child{-1, -1, -1};
            std::array<unsigned, 3> split{0, 0, 0};
            for (std::size_t i = 0; i < k; ++i) split[p[i]] |= 1u << members[i];
            if (t < T)
                for (State y : opts) child[index_of(y)] = node(t + 1, y, split[index_of(y)] ? split[index_of(y)] : mask);
            double cont = 0.0;
            if (t < T)
                for (State y : opts)
                    if (split[index_of(y)]) cont += tree_->nodes[child[index_of(y)]].seller_value;
            cont *= s.delta;
            std::array<double, 3> mass{0.0, 0.0, 0.0};
            for (std::size_t i = 0; i < k; ++i) mass[p[i]] += tree_->classes[members[i]].mass;

            // continuation utilities do not depend on the current price
            std::vector<std::array<double, 3>> after(k);
            for (std::size_t i = 0; i < k; ++i)
                for (State y : opts)
                    after[i][index_of(y)] = dot(tree_->classes[members[i]].v, unit(y)) +
                                            (t < T ? s.delta * best_path(child[index_of(y)], members[i]) : 0.0);

            for (double ca : posted[0])
                for (double cb : posted[1]) {
                    if (++examined_ > inst_.enumeration_budget)
                        throw BudgetExceeded("oracle enumeration budget exhausted", tree_->nodes.size());
                    const Vec2 c{ca, cb};
                    auto cost = [&](State y) { return is_variety(y) && priced[index_of(y)] ? c[index_of(y)] : 0.0; };
                    bool best_response = true;
                    for (std::size_t i = 0; i < k && best_response; ++i) {
                        const State mine = static_cast<State>(p[i]);
                        const double u = after[i][index_of(mine)] - cost(mine);
                        for (State y : opts)
                            if (after[i][index_of(y)] - cost(y) > u + kTol) best_response = false;
                    }
                    if (!best_response) continue;
                    const double receipts = (priced[0] ? ca : 0.0) * (priced[0] ? mass[0] : 0.0) +
                                            (priced[1] ? cb : 0.0) * (priced[1] ? mass[1] : 0.0);
                    ok.push_back({c, pi, receipts + cont, child});
                }
        }
        if (ok.empty())
            throw NoSurvivingProfile("no consumer profile survives at period " + std::to_string(t) + ", state " +
                                     state_char(x));
        double top = -std::numeric_limits<double>::infinity();
        for (const auto& c : ok) top = std::max(top, c.value);
        const Candidate* pick = nullptr;
        for (const auto& c : ok)
            if (c.value >= top - kTol &&
                (!pick || c.price > pick->price || (c.price == pick->price && c.part < pick->part)))
                pick = &c;

        const auto& p = parts[pick->part];
        nd.prices.p = {priced[0] ? pick->price[0] : 0.0, priced[1] ? pick->price[1] : 0.0};
        nd.prices.offered = priced;
        for (auto q : p) nd.choices.push_back(static_cast<State>(q));
        for (std::size_t i = 0; i < k; ++i) nd.segment_mass[p[i]] += tree_->classes[members[i]].mass;
        nd.receipts = (priced[0] ? nd.prices.p[0] * nd.segment_mass[0] : 0.0) +
                      (priced[1] ? nd.prices.p[1] * nd.segment_mass[1] : 0.0);
        nd.seller_value = pick->value;
        if (t < T) nd.child = pick->child;
        const int id = store(t, x, mask, std::move(nd));
        auto& stored = tree_->nodes[id];
        stored.utility.resize(tree_->classes.size());
        for (std::size_t c = 0; c < tree_->classes.size(); ++c) stored.utility[c] = best_path(id, c);
        return id;
    }

    int store(int t, State x, unsigned mask, SolvedNode nd) {
        const int id = static_cast<int>(tree_->nodes.size());
        tree_->nodes.push_back(std::move(nd));
        memo_[t][{x, mask}] = id;
        return id;
    }

    const OracleInstance& inst_;
    std::shared_ptr<SolvedTree> tree_;
    std::vector<std::map<std::pair<State, unsigned>, int>> memo_;
    std::map<std::pair<int, std::size_t>, double> path_memo_;
    std::size_t examined_ = 0;
};

}  // namespace

EquilibriumOutcome brute_force_pbe(const OracleInstance& instance) {
    BruteForce bf(instance);
    auto tree = bf.run();
    EquilibriumOutcome out;
    out.profit = tree->nodes[tree->root].seller_value;
    out.nodes = tree->nodes.size();
    out.grid_step = instance.grid.coarse_step();
    const auto walk = [&](auto&& self, int n, const std::string& sig) -> void {
        const auto& nd = tree->nodes[n];
        if (nd.leaf) return;
        PriceRow row;
        row.period = nd.period;
        row.signature = sig;
        row.state = nd.state;
        row.prices = nd.prices;
        row.mass = nd.segment_mass;
        row.node = n;
        out.price_path.push_back(row);
        for (State y : kStates)
            if (nd.child[index_of(y)] >= 0 &&
                std::find(nd.choices.begin(), nd.choices.end(), y) != nd.choices.end())
                self(self, nd.child[index_of(y)], sig + state_char(y));
    };
    walk(walk, tree->root, "h");
    out.tree = std::move(tree);
    return out;
}

StaticOptimum analytic_static_oracle(AnalyticFamily family) {
    StaticOptimum o;
    switch (family) {
        case AnalyticFamily::SingleDurableUniform: {
            // max p(1-p)
            const double p = 0.5;
            o.prices = PriceProfile{{p, 0.0}, {true, false}};
            o.profit = p * (1 - p);
            break;
        }
        case AnalyticFamily::TwoRentalsUniform: {
            // max p(1-p^2): 1 - 3p^2 = 0
            const double p = 1.0 / std::sqrt(3.0);
            o.prices = PriceProfile{{p, p}, {true, true}};
            o.profit = p * (1 - p * p);
            break;
        }
        case AnalyticFamily::MixedUniform: {
            // max p(1-p)^2/2 with the durable free: (1-p)(1-3p) = 0
            const double p = 1.0 / 3.0;
            o.prices = PriceProfile{{p, 0.0}, {true, true}};
            o.profit = p * (1 - p) * (1 - p) / 2;
            break;
        }
        default:
            throw std::invalid_argument("unknown analytic family");
    }
    return o;
}

namespace {
struct Quadrature {
    const DensitySpec& d;
    const PriceProfile& prices;
    std::vector<State> options;
    int max_depth;
    std::array<double, 3> area{0.0, 0.0, 0.0};
    double band_area = 0.0;

    // -1 below the band, 0 inside, 1 above; always 0 for the square
    int side(double va, double vb) const {
        if (d.kind == DensitySpec::Kind::UniformSquare) return 0;
        const double off = vb - (d.intercept + d.slope * va);
        if (off < -d.width / 2) return -1;
        if (off > d.width / 2) return 1;
        return 0;
    }
    State choice(double va, double vb) const {
        State best = State::O;
        double u = 0.0;
        for (State y : options) {
            if (y == State::O) continue;
            const double c = prices.is_offered(y) ? prices.price(y) : 0.0;
            const double w = (y == State::A ? va : vb) - c;
            if (w > u) {
                u = w;
                best = y;
            }
        }
        return best;
    }
    int key(double va, double vb) const { return (side(va, vb) + 1) * 3 + index_of(choice(va, vb)); }

    void cell(double x0, double y0, double h, int depth) {
        const int k = key(x0, y0);
        const bool uniform = k == key(x0 + h, y0) && k == key(x0, y0 + h) && k == key(x0 + h, y0 + h);
        if (!uniform && depth < max_depth) {
            const double m = h / 2;
            cell(x0, y0, m, depth + 1);
            cell(x0 + m, y0, m, depth + 1);
            cell(x0, y0 + m, m, depth + 1);
            cell(x0 + m, y0 + m, m, depth + 1);
            return;
        }
        const double cx = x0 + h / 2, cy = y0 + h / 2;
        const int ck = uniform ? k : key(cx, cy);
        if (ck / 3 != 1) return;
        band_area += h * h;
        area[ck % 3] += h * h;
    }
};
}  // namespace

std::map<State, double> integrate_segments(const DensitySpec& density, const PriceProfile& prices,
                                           const Setting& setting, int max_depth) {
    if (density.kind == DensitySpec::Kind::LinearBand && !(density.width > 0.0))
        throw std::invalid_argument("band density needs a positive width");
    if (density.kind != DensitySpec::Kind::UniformSquare && density.kind != DensitySpec::Kind::LinearBand)
        throw std::invalid_argument("unsupported density");
    Quadrature q{density, prices, setting.graph.successors(setting.initial_state), max_depth};
    q.cell(0.0, 0.0, 1.0, 0);
    if (!(q.band_area > 0.0)) throw std::invalid_argument("density has no mass inside the unit square");
    std::map<State, double> out;
    for (State s : kStates) out[s] = q.area[index_of(s)] / q.band_area;
    return out;
}

}  // namespace tradeup
