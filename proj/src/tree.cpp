#include "urbanlens/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ul::learn {

std::size_t Tree::leaf_index(const double* x) const
{
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
    }
    return i;
}

std::size_t Tree::depth() const
{
    if (nodes.empty()) {
        return 0;
    }
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    // children are always stored after their parent
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

std::size_t Tree::leaves() const
{
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

TreeData::TreeData(const double* X, std::size_t rows, std::size_t features)
    : X_(X), rows_(rows), features_(features), order_(features)
{
    for (std::size_t f = 0; f < features; ++f) {
        auto& o = order_[f];
        o.resize(rows);
        std::iota(o.begin(), o.end(), 0u);
        std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return at(a, f) < at(b, f); });
    }
}

namespace {

double class_impurity(Criterion c, double w0, double w1)
{
    const double w = w0 + w1;
    if (w <= 0.0) {
        return 0.0;
    }
    const double p0 = w0 / w, p1 = w1 / w;
    if (c == Criterion::gini) {
        return 1.0 - p0 * p0 - p1 * p1;
    }
    double h = 0.0;
    if (p0 > 0.0) {
        h -= p0 * std::log2(p0);
    }
    if (p1 > 0.0) {
        h -= p1 * std::log2(p1);
    }
    return h;
}

struct Stats {
    double w = 0.0;  // total weight
    double w1 = 0.0; // weight of class 1 (classification)
    double s = 0.0;  // weighted target sum (regression)

    void add(double weight, double t)
    {
        w += weight;
        w1 += weight * t;
        s += weight * t;
    }
};

class Builder {
public:
    Builder(const TreeData& data, const std::vector<double>& target, const std::vector<double>& weight,
            const TreeSettings& settings, Rng& rng)
        : d_(data), target_(target), weight_(weight), s_(settings), rng_(rng), idx_(data.features()),
          left_(data.rows(), 0)
    {
        for (std::size_t f = 0; f < d_.features(); ++f) {
            const auto& o = d_.order(f);
            idx_[f].reserve(o.size());
            for (auto r : o) {
                if (weight_[r] > 0.0) {
                    idx_[f].push_back(r);
                }
            }
        }
        buf_.resize(idx_.empty() ? 0 : idx_[0].size());
        features_.resize(d_.features());
    }

    Tree run()
    {
        if (!idx_.empty() && !idx_[0].empty()) {
            build(0, idx_[0].size(), 0);
        } else {
            tree_.nodes.push_back({});
        }
        return std::move(tree_);
    }

private:
    bool classification() const { return s_.criterion != Criterion::mse; }

    double proxy(const Stats& l, const Stats& r) const
    {
        if (classification()) {
            return -(l.w * class_impurity(s_.criterion, l.w - l.w1, l.w1) +
                     r.w * class_impurity(s_.criterion, r.w - r.w1, r.w1));
        }
        return l.s * l.s / l.w + r.s * r.s / r.w;
    }

    std::int32_t build(std::size_t b, std::size_t e, int depth)
    {
        const auto id = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.push_back({});
        Stats node;
        double tmin = target_[idx_[0][b]], tmax = tmin;
        for (std::size_t i = b; i < e; ++i) {
            const auto r = idx_[0][i];
            node.add(weight_[r], target_[r]);
            tmin = std::min(tmin, target_[r]);
            tmax = std::max(tmax, target_[r]);
        }
        tree_.nodes[static_cast<std::size_t>(id)].value = classification() ? node.w1 / node.w : node.s / node.w;

        const std::size_t n = e - b;
        const bool pure = tmin == tmax;
        if (pure || (s_.max_depth >= 0 && depth >= s_.max_depth) || n < s_.min_samples_split ||
            n < 2 * s_.min_samples_leaf) {
            return id;
        }

        std::size_t best_f = 0, best_pos = 0;
        double best_proxy = -std::numeric_limits<double>::infinity();
        double best_thr = 0.0;
        bool found = false;

        auto scan = [&](std::size_t f) {
            const auto& ord = idx_[f];
            Stats l;
            Stats r = node;
            for (std::size_t i = b; i + 1 < e; ++i) {
                const auto row = ord[i];
                const double wt = weight_[row], t = target_[row];
                l.add(wt, t);
                r.w -= wt;
                r.w1 -= wt * t;
                r.s -= wt * t;
                const std::size_t nl = i - b + 1;
                if (nl < s_.min_samples_leaf) {
                    continue;
                }
                if (n - nl < s_.min_samples_leaf) {
                    break;
                }
                const double x = d_.at(row, f), xn = d_.at(ord[i + 1], f);
                if (!(xn > x)) {
                    continue;
                }
                const double p = proxy(l, r);
                if (p > best_proxy) {
                    best_proxy = p;
                    best_f = f;
                    best_pos = i;
                    double mid = x / 2.0 + xn / 2.0;
                    if (!(mid < xn) || !std::isfinite(mid)) {
                        mid = x;
                    }
                    best_thr = mid;
                    found = true;
                }
            }
        };

        const std::size_t F = d_.features();
        if (s_.max_features == 0 || s_.max_features >= F) {
            for (std::size_t f = 0; f < F; ++f) {
                scan(f);
            }
        } else {
            std::iota(features_.begin(), features_.end(), std::size_t{0});
            std::size_t visited = 0;
            for (std::size_t j = 0; j < F && visited < s_.max_features; ++j) {
                std::swap(features_[j], features_[j + uniform_index(rng_, F - j)]);
                const auto f = features_[j];
                const auto& ord = idx_[f];
                if (d_.at(ord[b], f) == d_.at(ord[e - 1], f)) {
                    continue; // constant in this node; does not count
                }
                ++visited;
                scan(f);
            }
        }
        if (!found) {
            return id;
        }

        const std::size_t nl = best_pos - b + 1;
        for (std::size_t i = b; i < e; ++i) {
            left_[idx_[best_f][i]] = i <= best_pos;
        }
        for (std::size_t f = 0; f < F; ++f) {
            auto& ord = idx_[f];
            std::size_t li = 0, ri = nl;
            for (std::size_t i = b; i < e; ++i) {
                const auto row = ord[i];
                buf_[left_[row] ? li++ : ri++] = row;
            }
            std::copy(buf_.begin(), buf_.begin() + static_cast<long>(n), ord.begin() + static_cast<long>(b));
        }
        const auto lc = build(b, b + nl, depth + 1);
        const auto rc = build(b + nl, e, depth + 1);
        auto& self = tree_.nodes[static_cast<std::size_t>(id)];
        self.feature = static_cast<std::int32_t>(best_f);
        self.threshold = best_thr;
        self.left = lc;
        self.right = rc;
        return id;
    }

    const TreeData& d_;
    const std::vector<double>& target_;
    const std::vector<double>& weight_;
    const TreeSettings& s_;
    Rng& rng_;
    std::vector<std::vector<std::uint32_t>> idx_;
    std::vector<std::uint8_t> left_;
    std::vector<std::uint32_t> buf_;
    std::vector<std::size_t> features_;
    Tree tree_;
};

} // namespace

Tree grow_tree(const TreeData& data, const std::vector<double>& target, const std::vector<double>& weight,
               const TreeSettings& settings, Rng& rng)
{
    return Builder(data, target, weight, settings, rng).run();
}

} // namespace ul::learn
