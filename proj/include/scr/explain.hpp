#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scr/error.hpp"
#include "scr/forest.hpp"
#include "scr/linear.hpp"
#include "scr/parallel.hpp"
#include "scr/rng.hpp"
#include "scr/scorer.hpp"
#include "scr/tfidf.hpp"

namespace scr {

struct ImportanceEntry {
    std::string term;
    double importance = 0.0;
};

/// Descending by importance; when normalized, the largest value is exactly 1.
struct ImportanceRanking {
    std::string model;
    std::vector<ImportanceEntry> entries;
    bool normalized = false;
};

namespace detail {

inline ImportanceRanking top_k_normalized(std::vector<ImportanceEntry> all,
                                          int k, const std::string& model) {
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.importance != b.importance) return a.importance > b.importance;
        return a.term < b.term;
    });
    if (all.empty() || all.front().importance <= 0.0)
        fail("importances for '", model,
             "' are degenerate: no term has positive importance");
    const double max = all.front().importance;
    if (all.size() > static_cast<std::size_t>(k)) all.resize(k);
    for (auto& e : all) e.importance /= max;
    ImportanceRanking r;
    r.model = model;
    r.entries = std::move(all);
    r.normalized = true;
    return r;
}

}  // namespace detail

/// |weight| per term, top-k, scaled so the largest is 1.
inline ImportanceRanking linear_importances(const LinearModel& model,
                                            const Vocabulary& vocab, int k) {
    if (k < 1) fail("importances: k must be >= 1, got ", k);
    if (model.weights.size() != vocab.size())
        fail("importances: weight count ", model.weights.size(),
             " != vocabulary size ", vocab.size());
    std::vector<ImportanceEntry> all;
    all.reserve(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i)
        all.push_back({vocab.terms[i], std::abs(model.weights[i])});
    return detail::top_k_normalized(
        std::move(all), k,
        model.kind == LinearKind::hinge ? "svm" : "logistic");
}

enum class ImportanceMode { mean, stddev };

/// Per tree, each feature accumulates (n_node / n_root) * Gini decrease over
/// the nodes that split on it; the per-tree totals are then aggregated across
/// trees by mean or by population standard deviation.
inline ImportanceRanking forest_importances(const Forest& forest,
                                            const Vocabulary& vocab, int k,
                                            ImportanceMode mode) {
    if (k < 1) fail("importances: k must be >= 1, got ", k);
    if (forest.n_features != vocab.size())
        fail("importances: forest features ", forest.n_features,
             " != vocabulary size ", vocab.size());
    const std::size_t nf = vocab.size();
    const std::size_t nt = forest.trees.size();
    std::vector<double> sum(nf, 0.0), sum_sq(nf, 0.0);
    std::vector<double> per_tree(nf, 0.0);
    for (const auto& tree : forest.trees) {
        std::fill(per_tree.begin(), per_tree.end(), 0.0);
        const double root_n = static_cast<double>(tree.nodes[0].n_samples);
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) continue;
            per_tree[static_cast<std::size_t>(node.feature)] +=
                (static_cast<double>(node.n_samples) / root_n) *
                node.impurity_decrease;
        }
        for (std::size_t f = 0; f < nf; ++f) {
            sum[f] += per_tree[f];
            sum_sq[f] += per_tree[f] * per_tree[f];
        }
    }
    std::vector<ImportanceEntry> all;
    all.reserve(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        const double mean = sum[f] / static_cast<double>(nt);
        double value = mean;
        if (mode == ImportanceMode::stddev) {
            const double var =
                std::max(0.0, sum_sq[f] / static_cast<double>(nt) - mean * mean);
            value = std::sqrt(var);
        }
        all.push_back({vocab.terms[f], value});
    }
    return detail::top_k_normalized(std::move(all), k, "forest");
}

/// Terms present in every ranking's top-k, ordered by their mean normalized
/// importance across the rankings. May be empty.
inline std::vector<ImportanceEntry> consensus_features(
    const std::vector<ImportanceRanking>& rankings, int k) {
    if (rankings.size() < 2)
        fail("consensus: need at least 2 rankings, got ", rankings.size());
    if (k < 1) fail("consensus: k must be >= 1, got ", k);

    std::map<std::string, std::pair<std::size_t, double>> tally;  // count, sum
    for (const auto& r : rankings) {
        const std::size_t take =
            std::min<std::size_t>(static_cast<std::size_t>(k), r.entries.size());
        for (std::size_t i = 0; i < take; ++i) {
            auto& [count, total] = tally[r.entries[i].term];
            ++count;
            total += r.entries[i].importance;
        }
    }
    std::vector<ImportanceEntry> out;
    for (const auto& [term, ct] : tally)
        if (ct.first == rankings.size())
            out.push_back({term, ct.second / static_cast<double>(rankings.size())});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.importance != b.importance) return a.importance > b.importance;
        return a.term < b.term;
    });
    return out;
}

struct LimeOptions {
    int samples = 1000;
    int top_n = 5;
    double keep_prob = 0.5;
    double ridge = 1e-6;
    std::uint64_t seed = 0;
};

struct LimeExplanation {
    std::string doc_id;
    std::vector<std::pair<std::string, double>> words;  // top-N, weight desc
    int samples = 0;
    std::uint64_t seed = 0;
};

namespace detail {

/// Solves (A + ridge*I) beta = b in place via Cholesky; A must be symmetric
/// positive semidefinite.
inline std::vector<double> ridge_solve(std::vector<std::vector<double>>& a,
                                       std::vector<double> b, double ridge) {
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n; ++i) a[i][i] += ridge;
    // Cholesky: a = L L^T, stored in the lower triangle
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t t = 0; t < j; ++t) s -= a[i][t] * a[j][t];
            if (i == j) {
                if (s <= 0.0)
                    fail("ridge regression: matrix not positive definite");
                a[i][i] = std::sqrt(s);
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {  // forward L y = b
        double s = b[i];
        for (std::size_t t = 0; t < i; ++t) s -= a[i][t] * b[t];
        b[i] = s / a[i][i];
    }
    for (std::size_t ii = n; ii-- > 0;) {  // backward L^T x = y
        double s = b[ii];
        for (std::size_t t = ii + 1; t < n; ++t) s -= a[t][ii] * b[t];
        b[ii] = s / a[ii][ii];
    }
    return b;
}

}  // namespace detail

/// Perturbation explanation: each distinct word type is kept with probability
/// keep_prob per sample, the scorer is re-run on the surviving tokens, and a
/// ridge regression from keep-indicators to scores yields per-word weights.
/// Sample s draws from substream derive(seed, s), so results are identical
/// for any worker count.
template <class ScoreFn>
LimeExplanation lime_explain_fn(ScoreFn&& score_tokens,
                                const std::vector<std::string>& doc_tokens,
                                const LimeOptions& options,
                                const std::string& doc_id, int workers = 1) {
    if (options.samples < 100)
        fail("lime: need at least 100 samples, got ", options.samples);
    if (!(options.keep_prob > 0.0 && options.keep_prob < 1.0))
        fail("lime: keep probability must be in (0, 1)");
    if (options.top_n < 1) fail("lime: top_n must be >= 1");

    std::vector<std::string> types = doc_tokens;
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());
    if (types.empty())
        fail("lime: document '", doc_id, "' has no words to perturb");
    const std::size_t d = types.size();
    std::unordered_map<std::string, std::size_t> type_index;
    type_index.reserve(d);
    for (std::size_t i = 0; i < d; ++i) type_index.emplace(types[i], i);
    std::vector<std::size_t> token_type(doc_tokens.size());
    for (std::size_t i = 0; i < doc_tokens.size(); ++i)
        token_type[i] = type_index.at(doc_tokens[i]);

    const auto n_samples = static_cast<std::size_t>(options.samples);
    std::vector<std::vector<char>> keep(n_samples, std::vector<char>(d));
    std::vector<double> ys(n_samples);
    parallel_for(n_samples, workers, [&](std::size_t s) {
        Rng rng = Rng::derive(options.seed, static_cast<std::uint64_t>(s));
        auto& row = keep[s];
        for (std::size_t w = 0; w < d; ++w)
            row[w] = rng.chance(options.keep_prob) ? 1 : 0;
        std::vector<std::string> perturbed;
        perturbed.reserve(doc_tokens.size());
        for (std::size_t i = 0; i < doc_tokens.size(); ++i)
            if (row[token_type[i]]) perturbed.push_back(doc_tokens[i]);
        ys[s] = score_tokens(perturbed);
    });

    // Normal equations over keep-indicators plus an intercept column.
    const std::size_t cols = d + 1;
    std::vector<std::vector<double>> a(cols, std::vector<double>(cols, 0.0));
    std::vector<double> b(cols, 0.0);
    std::vector<std::size_t> on;
    for (std::size_t s = 0; s < n_samples; ++s) {
        on.clear();
        for (std::size_t w = 0; w < d; ++w)
            if (keep[s][w]) on.push_back(w);
        on.push_back(d);  // intercept
        for (const auto i : on) {
            for (const auto j : on)
                if (j <= i) a[i][j] += 1.0;
            b[i] += ys[s];
        }
    }
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = i + 1; j < cols; ++j) a[i][j] = a[j][i];

    const std::vector<double> beta = detail::ridge_solve(a, std::move(b),
                                                         options.ridge);

    std::vector<std::pair<std::string, double>> weighted;
    weighted.reserve(d);
    for (std::size_t w = 0; w < d; ++w) weighted.emplace_back(types[w], beta[w]);
    std::sort(weighted.begin(), weighted.end(),
              [](const auto& x, const auto& y) {
                  if (x.second != y.second) return x.second > y.second;
                  return x.first < y.first;
              });
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(options.top_n), d);
    weighted.resize(take);

    LimeExplanation exp;
    exp.doc_id = doc_id;
    exp.words = std::move(weighted);
    exp.samples = options.samples;
    exp.seed = options.seed;
    return exp;
}

/// LIME over a Scorer; the word universe is the masked, normalized token
/// stream with stopwords still present (the scorer filters its own).
inline LimeExplanation lime_explain(const Scorer& scorer,
                                    const TextPipeline& tp, const Document& doc,
                                    const LimeOptions& options,
                                    int workers = 1) {
    if (!scorer.supports_perturbation())
        fail("lime: scorer '", scorer.label(),
             "' uses a static score file and cannot be perturbed");
    const std::vector<std::string> tokens = tp.unfiltered_tokens(doc.text);
    return lime_explain_fn(
        [&](const std::vector<std::string>& kept) {
            return scorer.score_tokens(kept, tp);
        },
        tokens, options, doc.id, workers);
}

struct LimeAggregateEntry {
    std::string word;
    double percentage = 0.0;  // of documents with the word in their top-N
};

inline std::vector<LimeAggregateEntry> lime_aggregate(
    const std::vector<LimeExplanation>& explanations, int k) {
    if (explanations.empty()) fail("lime aggregate: no explanations");
    if (k < 1) fail("lime aggregate: k must be >= 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& e : explanations)
        for (const auto& [word, weight] : e.words) ++counts[word];
    std::vector<LimeAggregateEntry> out;
    out.reserve(counts.size());
    for (const auto& [word, c] : counts)
        out.push_back({word, 100.0 * static_cast<double>(c) /
                                 static_cast<double>(explanations.size())});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.percentage != b.percentage) return a.percentage > b.percentage;
        return a.word < b.word;
    });
    if (out.size() > static_cast<std::size_t>(k)) out.resize(k);
    return out;
}

}  // namespace scr
