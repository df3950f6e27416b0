#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scr/date.hpp"
#include "scr/error.hpp"

namespace scr {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }
};

struct EvaluationReport {
    std::string bp_id;
    std::string model;
    double threshold = 0.0;
    ConfusionCounts counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auprc = 0.0;
};

struct PRPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

namespace detail {
inline void check_scored(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        fail("metrics: ", scores.size(), " scores vs ", labels.size(),
             " labels");
    if (scores.empty()) fail("metrics: empty input");
    if (std::find(labels.begin(), labels.end(), 1) == labels.end())
        fail("metrics: no positive labels (recall undefined)");
}
}  // namespace detail

/// Predict positive iff score >= threshold. This weak-inequality convention
/// is used everywhere thresholds appear.
inline ConfusionCounts confusion_counts(const std::vector<double>& scores,
                                        const std::vector<int>& labels,
                                        double threshold) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        const bool pos = labels[i] != 0;
        if (pred && pos) ++c.tp;
        else if (pred && !pos) ++c.fp;
        else if (!pred && pos) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// 1.0 when nothing is predicted positive, so the empty-prediction end of a
/// PR sweep is well defined.
inline double precision_of(const ConfusionCounts& c) {
    return c.tp + c.fp == 0
               ? 1.0
               : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline double recall_of(const ConfusionCounts& c) {
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline double accuracy_of(const ConfusionCounts& c) {
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

inline double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

/// PR points at every distinct score, descending; tied scores form one
/// threshold. Recall is nondecreasing along the returned list.
inline std::vector<PRPoint> pr_curve(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
    detail::check_scored(scores, labels);
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    std::int64_t total_pos = 0;
    for (const auto y : labels) total_pos += y;

    std::vector<PRPoint> curve;
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == t; ++i)
            (labels[order[i]] ? tp : fp) += 1;
        PRPoint p;
        p.threshold = t;
        p.recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        curve.push_back(p);
    }
    return curve;
}

/// Step-wise average precision: sum over distinct descending thresholds of
/// (delta recall) * precision. Exactly 1.0 under perfect separation.
inline double auprc(const std::vector<double>& scores,
                    const std::vector<int>& labels) {
    detail::check_scored(scores, labels);
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    std::int64_t total_pos = 0;
    for (const auto y : labels) total_pos += y;

    double sum = 0.0;  // sum of delta_tp * precision, scaled by 1/P at the end
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = scores[order[i]];
        const std::int64_t tp_before = tp;
        for (; i < order.size() && scores[order[i]] == t; ++i)
            (labels[order[i]] ? tp : fp) += 1;
        if (tp > tp_before) {
            const double precision =
                static_cast<double>(tp) / static_cast<double>(tp + fp);
            sum += static_cast<double>(tp - tp_before) * precision;
        }
    }
    return sum / static_cast<double>(total_pos);
}

inline EvaluationReport compute_metrics(const std::vector<double>& scores,
                                        const std::vector<int>& labels,
                                        double threshold) {
    detail::check_scored(scores, labels);
    EvaluationReport r;
    r.threshold = threshold;
    r.counts = confusion_counts(scores, labels, threshold);
    r.accuracy = accuracy_of(r.counts);
    r.precision = precision_of(r.counts);
    r.recall = recall_of(r.counts);
    r.f1 = f1_score(r.precision, r.recall);
    r.auprc = auprc(scores, labels);
    return r;
}

/// Largest threshold whose recall over positives dated on/after
/// publication_date is >= p. Equivalent closed form: the k-th largest
/// post-publication positive score with k = ceil(p * P); implemented as a
/// descending scan so tied scores and floating-point rounding of p*P cannot
/// disagree with a direct recall evaluation.
inline double retune_threshold(const std::vector<double>& scores,
                               const std::vector<int>& labels,
                               const std::vector<Date>& dates,
                               const Date& publication_date, double p) {
    if (scores.size() != labels.size() || scores.size() != dates.size())
        fail("retune: scores, labels, and dates must have equal lengths");
    if (!(p > 0.0 && p <= 1.0))
        fail("retune: recall floor must be in (0, 1], got ", p);
    std::vector<double> post;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i] && !(dates[i] < publication_date))
            post.push_back(scores[i]);
    if (post.empty())
        fail("retune: no positive documents dated on/after ",
             format_date(publication_date));

    std::sort(post.begin(), post.end(), std::greater<>());
    const auto P = static_cast<double>(post.size());
    std::size_t i = 0;
    while (i < post.size()) {
        const double t = post[i];
        for (; i < post.size() && post[i] == t; ++i) {}
        const double recall = static_cast<double>(i) / P;
        if (recall >= p) return t;
    }
    return post.back();  // unreachable: recall reaches 1.0 >= p
}

}  // namespace scr
