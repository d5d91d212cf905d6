#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "chm/detail/models.hpp"

namespace chm::learn {

namespace {

struct SplitChoice {
    double score = -1.0; // sum of (sum wy)^2 / (sum w) over both sides
    int feature = -1;
    double threshold = 0.0;
    std::size_t left_count = 0;
};

// The grower keeps one index array per feature, each sorted by
// (value, row id) within every node segment. Splitting stable-partitions all
// arrays, which preserves that order, so no sorting happens after the initial
// one. Candidates are scanned in ascending feature/threshold order and ties
// keep the first best, i.e. the lowest feature index then lowest threshold.
struct Grower {
    const Matrix& X;
    const std::vector<double>& y;
    const std::vector<double>& w;
    const TreeGrowConfig& cfg;
    Rng& rng;
    Tree tree;
    std::vector<std::vector<std::uint32_t>> order; // per feature, segment-sorted
    std::vector<std::uint32_t> scratch_left, scratch_right;
    std::vector<int> feature_pool;

    SplitChoice scan_feature(int feature, std::size_t lo, std::size_t hi, double wsum,
                             double wysum) const {
        const std::uint32_t* seg = order[feature].data();
        SplitChoice best;
        best.feature = feature;
        const std::size_t m = hi - lo;
        double wl = 0.0, wyl = 0.0;
        for (std::size_t k = 0; k + 1 < m; ++k) {
            const std::uint32_t i = seg[lo + k];
            wl += w[i];
            wyl += w[i] * y[i];
            const double xv = X(i, feature);
            const double xn = X(seg[lo + k + 1], feature);
            if (xv == xn) continue;
            const std::size_t cl = k + 1, cr = m - cl;
            if (cl < static_cast<std::size_t>(cfg.min_samples_leaf) ||
                cr < static_cast<std::size_t>(cfg.min_samples_leaf))
                continue;
            const double wr = wsum - wl;
            if (wl <= 0.0 || wr <= 0.0) continue;
            const double wyr = wysum - wyl;
            const double score = wyl * wyl / wl + wyr * wyr / wr;
            if (score > best.score) {
                best.score = score;
                best.threshold = (xv + xn) / 2.0;
                best.left_count = cl;
            }
        }
        return best;
    }

    int build(std::size_t lo, std::size_t hi, int depth) {
        const std::size_t m = hi - lo;
        const std::uint32_t* rows = order[0].data() + lo;
        double wsum = 0.0, wysum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            wsum += w[rows[k]];
            wysum += w[rows[k]] * y[rows[k]];
        }
        double leaf_value;
        if (wsum > 0.0) {
            leaf_value = wysum / wsum;
        } else {
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k) s += y[rows[k]];
            leaf_value = s / static_cast<double>(m);
        }

        const bool depth_ok = cfg.max_depth <= 0 || depth < cfg.max_depth;
        if (!depth_ok || m < 2 * static_cast<std::size_t>(cfg.min_samples_leaf) || m < 2 ||
            wsum <= 0.0)
            return make_leaf(leaf_value);

        const int p = static_cast<int>(X.cols());
        int n_feats = p;
        feature_pool.resize(p);
        std::iota(feature_pool.begin(), feature_pool.end(), 0);
        if (cfg.feature_subsample < 1.0) {
            n_feats = std::max(1, static_cast<int>(std::llround(cfg.feature_subsample * p)));
            for (int k = 0; k < n_feats; ++k) {
                const int j = k + static_cast<int>(rng.uniform_int(p - k));
                std::swap(feature_pool[k], feature_pool[j]);
            }
            std::sort(feature_pool.begin(), feature_pool.begin() + n_feats);
        }

        SplitChoice best;
        for (int fi = 0; fi < n_feats; ++fi) {
            const SplitChoice c = scan_feature(feature_pool[fi], lo, hi, wsum, wysum);
            if (c.score > best.score) best = c; // strict: ties keep the lower feature/threshold
        }

        const double base = wysum * wysum / wsum;
        if (best.feature < 0 || best.score - base <= 1e-10 * std::max(1.0, std::abs(base)))
            return make_leaf(leaf_value);

        // stable partition every feature's segment on the chosen predicate
        const int bf = best.feature;
        const double thr = best.threshold;
        std::size_t mid = lo;
        for (int f = 0; f < p; ++f) {
            auto& seg = order[f];
            scratch_left.clear();
            scratch_right.clear();
            for (std::size_t k = lo; k < hi; ++k) {
                if (X(seg[k], bf) <= thr)
                    scratch_left.push_back(seg[k]);
                else
                    scratch_right.push_back(seg[k]);
            }
            std::copy(scratch_left.begin(), scratch_left.end(), seg.begin() + lo);
            std::copy(scratch_right.begin(), scratch_right.end(),
                      seg.begin() + lo + scratch_left.size());
            mid = lo + scratch_left.size();
        }
        if (mid == lo || mid == hi) return make_leaf(leaf_value); // numerical guard

        const int node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node].feature = bf;
        tree.nodes[node].threshold = thr;
        const int left = build(lo, mid, depth + 1);
        tree.nodes[node].left = left;
        const int right = build(mid, hi, depth + 1);
        tree.nodes[node].right = right;
        return node;
    }

    int make_leaf(double value) {
        const int node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node].value = value;
        return node;
    }
};

} // namespace

Tree grow_tree(const Matrix& X, const std::vector<double>& y, const std::vector<double>& w,
               const std::vector<std::uint32_t>& rows, const TreeGrowConfig& cfg, Rng& rng) {
    Grower g{X, y, w, cfg, rng, {}, {}, {}, {}};
    g.tree.nodes.reserve(64);
    if (rows.empty()) {
        g.make_leaf(0.0);
        return g.tree;
    }
    const std::size_t p = X.cols();
    g.order.resize(p);
    for (std::size_t f = 0; f < p; ++f) {
        g.order[f] = rows;
        std::sort(g.order[f].begin(), g.order[f].end(), [&](std::uint32_t a, std::uint32_t b) {
            const double xa = X(a, f), xb = X(b, f);
            if (xa != xb) return xa < xb;
            return a < b;
        });
    }
    g.scratch_left.reserve(rows.size());
    g.scratch_right.reserve(rows.size());
    g.build(0, rows.size(), 0);
    return g.tree;
}

} // namespace chm::learn
