#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scr/corpus.hpp"
#include "scr/date.hpp"
#include "scr/error.hpp"
#include "scr/textprep.hpp"

namespace scr {

/// Counts per calendar-aligned bin of fixed width in months. Bin k covers the
/// months [k*width, (k+1)*width) on the serial month axis, so bins for any
/// two series with the same width line up regardless of data.
struct TimeSeries {
    int bin_width_months = 6;
    std::int64_t first_bin = 0;  // serial month index / width
    std::vector<std::int64_t> counts;

    std::size_t size() const { return counts.size(); }

    Date bin_start(std::size_t i) const {
        return first_day_of_month_index((first_bin + static_cast<std::int64_t>(i)) *
                                        bin_width_months);
    }

    /// First day of the bin after i (exclusive end).
    Date bin_end(std::size_t i) const {
        return first_day_of_month_index(
            (first_bin + static_cast<std::int64_t>(i) + 1) * bin_width_months);
    }

    /// Bin midpoint on the day axis; knot positions for the display spline.
    double bin_mid_days(std::size_t i) const {
        return 0.5 * (static_cast<double>(days_since_epoch(bin_start(i))) +
                      static_cast<double>(days_since_epoch(bin_end(i))));
    }

    std::int64_t total() const {
        std::int64_t s = 0;
        for (const auto c : counts) s += c;
        return s;
    }
};

namespace detail {
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}
}  // namespace detail

/// Histogram of dates over [range_min, range_max] with calendar-aligned bins.
/// Every date must fall inside the range; ids, when given, name the offending
/// document in the error.
inline TimeSeries bin_time_series(const std::vector<Date>& dates,
                                  int bin_width_months, const Date& range_min,
                                  const Date& range_max,
                                  const std::vector<std::string>& ids = {}) {
    if (bin_width_months < 1)
        fail("time series: bin width must be >= 1 month, got ",
             bin_width_months);
    if (range_max < range_min)
        fail("time series: range [", format_date(range_min), ", ",
             format_date(range_max), "] is inverted");
    if (!ids.empty() && ids.size() != dates.size())
        fail("time series: ids and dates must have equal lengths");

    TimeSeries ts;
    ts.bin_width_months = bin_width_months;
    ts.first_bin = detail::floor_div(month_index(range_min), bin_width_months);
    const std::int64_t last_bin =
        detail::floor_div(month_index(range_max), bin_width_months);
    ts.counts.assign(static_cast<std::size_t>(last_bin - ts.first_bin + 1), 0);

    for (std::size_t i = 0; i < dates.size(); ++i) {
        if (dates[i] < range_min || range_max < dates[i]) {
            if (ids.empty())
                fail("time series: date ", format_date(dates[i]),
                     " at position ", i, " outside the configured range");
            fail("time series: document '", ids[i], "' dated ",
                 format_date(dates[i]), " outside the configured range");
        }
        const std::int64_t bin =
            detail::floor_div(month_index(dates[i]), bin_width_months) -
            ts.first_bin;
        ++ts.counts[static_cast<std::size_t>(bin)];
    }
    return ts;
}

/// Quadratic interpolating spline: one parabola piece per knot interval,
/// passing through every knot, with matching one-sided first derivatives at
/// interior knots. The single free boundary condition is slope 0 at the left
/// end. Evaluation outside the knot span extrapolates the end pieces.
class SplineCurve {
public:
    static SplineCurve fit(std::vector<double> x, std::vector<double> y) {
        if (x.size() != y.size())
            fail("spline: x and y must have equal lengths");
        if (x.size() < 2) fail("spline: need at least 2 knots");
        for (std::size_t i = 0; i + 1 < x.size(); ++i)
            if (!(x[i] < x[i + 1])) fail("spline: knots must be increasing");
        SplineCurve s;
        s.x_ = std::move(x);
        s.y_ = std::move(y);
        s.m_.assign(s.x_.size(), 0.0);
        for (std::size_t i = 0; i + 1 < s.x_.size(); ++i) {
            const double h = s.x_[i + 1] - s.x_[i];
            s.m_[i + 1] = 2.0 * (s.y_[i + 1] - s.y_[i]) / h - s.m_[i];
        }
        return s;
    }

    static SplineCurve fit_series(const TimeSeries& ts) {
        if (ts.size() < 2) fail("spline: need at least 2 bins");
        std::vector<double> x(ts.size()), y(ts.size());
        const double x0 = ts.bin_mid_days(0);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            x[i] = ts.bin_mid_days(i) - x0;
            y[i] = static_cast<double>(ts.counts[i]);
        }
        return fit(std::move(x), std::move(y));
    }

    double evaluate(double t) const {
        const std::size_t i = piece_index(t);
        const double dt = t - x_[i];
        return y_[i] + m_[i] * dt + accel(i) * dt * dt;
    }

    /// Analytic derivative using the piece on the right of t (left end piece
    /// below the first knot).
    double derivative(double t) const {
        const std::size_t i = piece_index(t);
        return m_[i] + 2.0 * accel(i) * (t - x_[i]);
    }

    /// One-sided derivatives at knot k; interior C1 means these agree.
    double derivative_into_knot(std::size_t k) const {
        if (k == 0) return m_[0];
        const std::size_t i = k - 1;
        return m_[i] + 2.0 * accel(i) * (x_[k] - x_[i]);
    }
    double derivative_out_of_knot(std::size_t k) const { return m_[k]; }

    const std::vector<double>& knots_x() const { return x_; }
    const std::vector<double>& knots_y() const { return y_; }

private:
    std::size_t piece_index(double t) const {
        if (t <= x_.front()) return 0;
        if (t >= x_[x_.size() - 2]) return x_.size() - 2;
        const auto it = std::upper_bound(x_.begin(), x_.end(), t);
        return static_cast<std::size_t>(it - x_.begin()) - 1;
    }

    double accel(std::size_t piece) const {
        const double h = x_[piece + 1] - x_[piece];
        return (m_[piece + 1] - m_[piece]) / (2.0 * h);
    }

    std::vector<double> x_, y_, m_;
};

/// Presence matrix: entry (doc, word) is 1 iff the normalized document text
/// contains the normalized word/phrase as a substring.
inline std::vector<std::vector<int>> word_presence(
    const std::vector<const Document*>& docs,
    const std::vector<std::string>& words) {
    if (words.empty()) fail("word presence: empty word list");
    std::vector<std::string> needles;
    needles.reserve(words.size());
    for (const auto& w : words) {
        std::string n = normalize_text(w);
        if (n.empty()) fail("word presence: word '", w, "' normalizes to nothing");
        needles.push_back(std::move(n));
    }
    std::vector<std::vector<int>> presence(docs.size(),
                                           std::vector<int>(words.size(), 0));
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const std::string hay = normalize_text(docs[d]->text);
        for (std::size_t w = 0; w < needles.size(); ++w)
            presence[d][w] = hay.find(needles[w]) != std::string::npos ? 1 : 0;
    }
    return presence;
}

struct CorrelationMatrix {
    std::vector<std::string> words;
    std::vector<std::vector<double>> values;   // symmetric, unit diagonal
    std::vector<char> degenerate;              // constant presence column
};

/// Pearson correlation of binary indicator columns (the phi coefficient).
/// Columns that are constant across documents are flagged and get 0 in every
/// off-diagonal cell.
inline CorrelationMatrix phi_correlations(
    const std::vector<std::vector<int>>& presence,
    const std::vector<std::string>& words) {
    const std::size_t n = presence.size();
    if (n < 2) fail("phi correlations: need at least 2 documents");
    const std::size_t k = words.size();
    for (const auto& row : presence)
        if (row.size() != k)
            fail("phi correlations: presence row width != word count");

    std::vector<std::int64_t> ones(k, 0);
    for (const auto& row : presence)
        for (std::size_t w = 0; w < k; ++w) ones[w] += row[w] ? 1 : 0;

    CorrelationMatrix cm;
    cm.words = words;
    cm.degenerate.resize(k);
    for (std::size_t w = 0; w < k; ++w)
        cm.degenerate[w] =
            (ones[w] == 0 || ones[w] == static_cast<std::int64_t>(n)) ? 1 : 0;
    cm.values.assign(k, std::vector<double>(k, 0.0));

    const auto nn = static_cast<std::int64_t>(n);
    for (std::size_t a = 0; a < k; ++a) {
        cm.values[a][a] = 1.0;
        for (std::size_t b = a + 1; b < k; ++b) {
            double phi = 0.0;
            if (!cm.degenerate[a] && !cm.degenerate[b]) {
                std::int64_t both = 0;
                for (const auto& row : presence)
                    both += (row[a] && row[b]) ? 1 : 0;
                const double num =
                    static_cast<double>(nn * both - ones[a] * ones[b]);
                const double da =
                    std::sqrt(static_cast<double>(ones[a] * (nn - ones[a])));
                const double db =
                    std::sqrt(static_cast<double>(ones[b] * (nn - ones[b])));
                phi = num / (da * db);
            }
            cm.values[a][b] = phi;
            cm.values[b][a] = phi;
        }
    }
    return cm;
}

struct WordFrequency {
    std::string word;
    std::int64_t doc_count = 0;
    double fraction = 0.0;
};

/// Per word: number and fraction of documents containing it.
inline std::vector<WordFrequency> word_frequencies(
    const std::vector<const Document*>& docs,
    const std::vector<std::string>& words) {
    const auto presence = word_presence(docs, words);
    std::vector<WordFrequency> out;
    out.reserve(words.size());
    for (std::size_t w = 0; w < words.size(); ++w) {
        WordFrequency f;
        f.word = words[w];
        for (const auto& row : presence) f.doc_count += row[w];
        f.fraction = docs.empty()
                         ? 0.0
                         : static_cast<double>(f.doc_count) /
                               static_cast<double>(docs.size());
        out.push_back(std::move(f));
    }
    return out;
}

struct MetadataBreakdown {
    std::string field;
    std::vector<std::string> groups;   // ranked by total count; may end "other"
    std::vector<TimeSeries> series;    // parallel to groups
    TimeSeries total;
};

/// Grouping key for one document: a metadata field, or "word:<phrase>" which
/// partitions into present/absent.
inline std::string breakdown_key(const Document& doc, const std::string& field) {
    if (field == "process_type") return doc.process_type;
    if (field == "state") return doc.state;
    if (field == "decision") return doc.decision;
    if (field.rfind("word:", 0) == 0) {
        const std::string needle = normalize_text(field.substr(5));
        if (needle.empty()) fail("breakdown: empty word in '", field, "'");
        return normalize_text(doc.text).find(needle) != std::string::npos
                   ? "present"
                   : "absent";
    }
    fail("breakdown: unknown field '", field,
         "' (expected process_type, state, decision, or word:<phrase>)");
}

/// Per-group time series for the top_k groups by total count; when more
/// groups exist than top_k, the rest are aggregated as "other". Group series
/// sum bin-wise to the total series.
inline MetadataBreakdown metadata_breakdown(
    const std::vector<const Document*>& docs, const std::string& field,
    int top_k, int bin_width_months, const Date& range_min,
    const Date& range_max) {
    if (top_k < 1) fail("breakdown: top_k must be >= 1, got ", top_k);

    std::vector<std::string> keys;
    keys.reserve(docs.size());
    std::map<std::string, std::int64_t> totals;
    for (const auto* doc : docs) {
        keys.push_back(breakdown_key(*doc, field));
        ++totals[keys.back()];
    }

    std::vector<std::pair<std::string, std::int64_t>> ranked(totals.begin(),
                                                             totals.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    MetadataBreakdown bd;
    bd.field = field;
    const bool has_other = ranked.size() > static_cast<std::size_t>(top_k);
    const std::size_t kept =
        std::min<std::size_t>(static_cast<std::size_t>(top_k), ranked.size());
    std::map<std::string, std::size_t> group_of;
    for (std::size_t g = 0; g < kept; ++g) {
        bd.groups.push_back(ranked[g].first);
        group_of[ranked[g].first] = g;
    }
    if (has_other) bd.groups.push_back("other");

    std::vector<std::vector<Date>> dates(bd.groups.size());
    std::vector<Date> all_dates;
    all_dates.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto it = group_of.find(keys[i]);
        const std::size_t g = it != group_of.end() ? it->second : kept;
        dates[g].push_back(docs[i]->date);
        all_dates.push_back(docs[i]->date);
    }
    for (const auto& ds : dates)
        bd.series.push_back(
            bin_time_series(ds, bin_width_months, range_min, range_max));
    bd.total = bin_time_series(all_dates, bin_width_months, range_min, range_max);
    return bd;
}

/// Pearson correlation of two equal-length real series.
inline double pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        fail("pearson: need two series of equal length >= 2");
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        fail("pearson: a series is constant; correlation undefined");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace scr
