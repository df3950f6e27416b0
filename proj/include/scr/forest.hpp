#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "scr/error.hpp"
#include "scr/jsonio.hpp"
#include "scr/parallel.hpp"
#include "scr/rng.hpp"
#include "scr/tfidf.hpp"

namespace scr {

struct ForestHyper {
    int trees = 100;
    int max_depth = -1;          // < 0 means unlimited
    int min_leaf = 1;
    int features_per_split = 0;  // 0 means floor(sqrt(n_features)), at least 1
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double positive_fraction = 0.0;
    double impurity_decrease = 0.0;  // Gini drop of this split, unweighted
    std::uint32_t n_samples = 0;

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    /// Leaf positive fraction for a sparse sample; absent coordinates are 0.
    double leaf_fraction(const SparseVector& x) const {
        std::int32_t at = 0;
        while (!nodes[at].is_leaf()) {
            const auto f = static_cast<std::uint32_t>(nodes[at].feature);
            double v = 0.0;
            const auto it = std::lower_bound(
                x.entries.begin(), x.entries.end(), f,
                [](const auto& e, std::uint32_t key) { return e.first < key; });
            if (it != x.entries.end() && it->first == f) v = it->second;
            at = v <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
        }
        return nodes[at].positive_fraction;
    }

    bool votes_positive(const SparseVector& x) const {
        return leaf_fraction(x) >= 0.5;
    }
};

struct Forest {
    std::vector<DecisionTree> trees;
    std::size_t n_features = 0;
    ForestHyper hyper;

    /// Fraction of trees voting positive.
    double score(const SparseVector& x) const {
        std::size_t votes = 0;
        for (const auto& t : trees) votes += t.votes_positive(x) ? 1 : 0;
        return static_cast<double>(votes) / static_cast<double>(trees.size());
    }

    Json to_json() const {
        Json j;
        j["n_features"] = n_features;
        j["hyper"] = {{"trees", hyper.trees},
                      {"max_depth", hyper.max_depth},
                      {"min_leaf", hyper.min_leaf},
                      {"features_per_split", hyper.features_per_split},
                      {"bootstrap", hyper.bootstrap},
                      {"seed", hyper.seed}};
        Json trees_json = Json::array();
        for (const auto& t : trees) {
            Json nodes = Json::array();
            for (const auto& n : t.nodes)
                nodes.push_back({n.feature, n.threshold, n.left, n.right,
                                 n.positive_fraction, n.impurity_decrease,
                                 n.n_samples});
            trees_json.push_back(std::move(nodes));
        }
        j["trees"] = std::move(trees_json);
        return j;
    }

    static Forest from_json(const Json& j) {
        Forest f;
        f.n_features = require_field(j, "n_features", "forest").get<std::size_t>();
        if (j.contains("hyper")) {
            const Json& h = j.at("hyper");
            f.hyper.trees = field_or(h, "trees", f.hyper.trees);
            f.hyper.max_depth = field_or(h, "max_depth", f.hyper.max_depth);
            f.hyper.min_leaf = field_or(h, "min_leaf", f.hyper.min_leaf);
            f.hyper.features_per_split =
                field_or(h, "features_per_split", f.hyper.features_per_split);
            f.hyper.bootstrap = field_or(h, "bootstrap", f.hyper.bootstrap);
            f.hyper.seed = field_or<std::uint64_t>(h, "seed", f.hyper.seed);
        }
        for (const auto& tj : require_field(j, "trees", "forest")) {
            DecisionTree t;
            for (const auto& nj : tj) {
                if (!nj.is_array() || nj.size() != 7)
                    fail("forest: malformed tree node");
                TreeNode n;
                n.feature = nj[0].get<std::int32_t>();
                n.threshold = nj[1].get<double>();
                n.left = nj[2].get<std::int32_t>();
                n.right = nj[3].get<std::int32_t>();
                n.positive_fraction = nj[4].get<double>();
                n.impurity_decrease = nj[5].get<double>();
                n.n_samples = nj[6].get<std::uint32_t>();
                t.nodes.push_back(n);
            }
            if (t.nodes.empty()) fail("forest: empty tree");
            f.trees.push_back(std::move(t));
        }
        if (f.trees.empty()) fail("forest: no trees");
        return f;
    }
};

namespace detail {

/// Read-only view of the training matrix. Densifies when affordable because
/// node evaluation reads single cells; falls back to per-row binary search on
/// large problems.
class FeatureMatrix {
public:
    FeatureMatrix(const std::vector<SparseVector>& rows, std::size_t n_features)
        : rows_(rows), n_features_(n_features) {
        if (rows.size() * n_features <= kDenseLimit) {
            dense_.assign(rows.size() * n_features, 0.0);
            for (std::size_t r = 0; r < rows.size(); ++r)
                for (const auto& [i, v] : rows[r].entries)
                    dense_[r * n_features + i] = v;
        }
    }

    double value(std::size_t row, std::size_t feature) const {
        if (!dense_.empty()) return dense_[row * n_features_ + feature];
        const auto& e = rows_[row].entries;
        const auto it = std::lower_bound(
            e.begin(), e.end(), feature,
            [](const auto& p, std::size_t key) { return p.first < key; });
        return (it != e.end() && it->first == feature) ? it->second : 0.0;
    }

    std::size_t n_features() const { return n_features_; }

private:
    static constexpr std::size_t kDenseLimit = 50'000'000;
    const std::vector<SparseVector>& rows_;
    std::size_t n_features_;
    std::vector<double> dense_;
};

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double gini(std::size_t pos, std::size_t total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(total);
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

/// Best Gini split of `samples` over one feature; values gathered and sorted
/// here. Returns gain <= 0 when no valid split exists.
inline SplitChoice best_split_on_feature(
    const FeatureMatrix& m, const std::vector<std::uint32_t>& samples,
    const std::vector<int>& labels, std::size_t feature, int min_leaf,
    std::vector<std::pair<double, int>>& scratch) {
    scratch.clear();
    for (const auto s : samples)
        scratch.emplace_back(m.value(s, feature), labels[s]);
    std::sort(scratch.begin(), scratch.end());

    SplitChoice best;
    if (scratch.front().first == scratch.back().first) return best;

    const std::size_t n = scratch.size();
    std::size_t total_pos = 0;
    for (const auto& [v, y] : scratch) total_pos += static_cast<std::size_t>(y);
    const double parent = gini(total_pos, n);

    std::size_t left_n = 0, left_pos = 0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        ++left_n;
        left_pos += static_cast<std::size_t>(scratch[k].second);
        if (scratch[k].first == scratch[k + 1].first) continue;
        const std::size_t right_n = n - left_n;
        if (left_n < static_cast<std::size_t>(min_leaf) ||
            right_n < static_cast<std::size_t>(min_leaf))
            continue;
        const double wl = static_cast<double>(left_n) / static_cast<double>(n);
        const double gain = parent - wl * gini(left_pos, left_n) -
                            (1.0 - wl) * gini(total_pos - left_pos, right_n);
        if (!best.found || gain > best.gain) {
            best.found = true;
            best.feature = feature;
            best.threshold = 0.5 * (scratch[k].first + scratch[k + 1].first);
            best.gain = gain;
        }
    }
    return best;
}

struct TreeBuilder {
    const FeatureMatrix& matrix;
    const std::vector<int>& labels;
    const ForestHyper& hyper;
    Rng& rng;
    DecisionTree tree;
    std::vector<std::pair<double, int>> scratch;
    std::vector<char> drawn;  // feature-subset scratch

    std::size_t mtry() const {
        const std::size_t nf = matrix.n_features();
        if (hyper.features_per_split > 0)
            return std::min<std::size_t>(hyper.features_per_split, nf);
        const auto r = static_cast<std::size_t>(
            std::floor(std::sqrt(static_cast<double>(nf))));
        return std::max<std::size_t>(1, r);
    }

    std::int32_t grow(std::vector<std::uint32_t> samples, int depth) {
        const auto id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        const std::size_t n = samples.size();
        std::size_t pos = 0;
        for (const auto s : samples) pos += static_cast<std::size_t>(labels[s]);
        tree.nodes[id].n_samples = static_cast<std::uint32_t>(n);
        tree.nodes[id].positive_fraction =
            static_cast<double>(pos) / static_cast<double>(n);

        const bool pure = pos == 0 || pos == n;
        const bool depth_capped = hyper.max_depth >= 0 && depth >= hyper.max_depth;
        if (pure || depth_capped ||
            n < 2 * static_cast<std::size_t>(hyper.min_leaf))
            return id;

        const std::size_t nf = matrix.n_features();
        const std::size_t want = mtry();
        drawn.assign(nf, 0);
        std::vector<std::size_t> candidates;
        candidates.reserve(want);
        while (candidates.size() < want) {
            const std::size_t f = rng.index(nf);
            if (!drawn[f]) {
                drawn[f] = 1;
                candidates.push_back(f);
            }
        }
        std::sort(candidates.begin(), candidates.end());

        SplitChoice best;
        // Zero-gain splits are allowed (as in standard CART): a balanced
        // XOR-like node has no positive-gain single-feature split, yet must
        // still be split for consistent data to be fit exactly.
        const auto consider = [&](std::size_t f) {
            const SplitChoice c = best_split_on_feature(
                matrix, samples, labels, f, hyper.min_leaf, scratch);
            if (c.found && (!best.found || c.gain > best.gain)) best = c;
        };
        for (const auto f : candidates) consider(f);
        if (!best.found) {
            // A mixed node must not become a leaf while some feature still
            // separates it, or single-tree fits lose consistent datasets.
            for (std::size_t f = 0; f < nf; ++f)
                if (!drawn[f]) consider(f);
        }
        if (!best.found) return id;

        std::vector<std::uint32_t> left, right;
        left.reserve(n);
        right.reserve(n);
        for (const auto s : samples)
            (matrix.value(s, best.feature) <= best.threshold ? left : right)
                .push_back(s);
        samples.clear();
        samples.shrink_to_fit();

        tree.nodes[id].feature = static_cast<std::int32_t>(best.feature);
        tree.nodes[id].threshold = best.threshold;
        tree.nodes[id].impurity_decrease = best.gain;
        const std::int32_t l = grow(std::move(left), depth + 1);
        tree.nodes[id].left = l;
        const std::int32_t r = grow(std::move(right), depth + 1);
        tree.nodes[id].right = r;
        return id;
    }
};

}  // namespace detail

/// Bagged Gini trees. Tree t is grown from substream derive(seed, "tree:t"),
/// so the forest is identical for any worker count or training order.
inline Forest train_random_forest(const std::vector<SparseVector>& xs,
                                  const std::vector<int>& ys, std::size_t dim,
                                  const ForestHyper& hyper = {},
                                  int workers = 1) {
    if (xs.size() != ys.size())
        fail("forest: ", xs.size(), " vectors vs ", ys.size(), " labels");
    if (xs.empty()) fail("forest: empty training set");
    if (hyper.trees < 1) fail("forest: tree count must be >= 1");
    if (hyper.min_leaf < 1) fail("forest: min_leaf must be >= 1");
    std::size_t pos = 0;
    for (const auto y : ys) pos += static_cast<std::size_t>(y);
    if (pos == 0 || pos == ys.size())
        fail("forest: training labels are single-class (", pos, " of ",
             ys.size(), " positive)");

    const detail::FeatureMatrix matrix(xs, dim);
    Forest forest;
    forest.n_features = dim;
    forest.hyper = hyper;
    forest.trees.resize(static_cast<std::size_t>(hyper.trees));

    parallel_for(forest.trees.size(), workers, [&](std::size_t t) {
        Rng rng = Rng::derive(hyper.seed, concat("tree:", t));
        const std::size_t n = xs.size();
        std::vector<std::uint32_t> samples(n);
        if (hyper.bootstrap) {
            for (auto& s : samples)
                s = static_cast<std::uint32_t>(rng.index(n));
            std::sort(samples.begin(), samples.end());
        } else {
            for (std::size_t i = 0; i < n; ++i)
                samples[i] = static_cast<std::uint32_t>(i);
        }
        detail::TreeBuilder builder{matrix, ys, hyper, rng, {}, {}, {}};
        builder.grow(std::move(samples), 0);
        forest.trees[t] = std::move(builder.tree);
    });
    return forest;
}

}  // namespace scr
