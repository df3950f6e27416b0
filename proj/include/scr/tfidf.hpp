#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "scr/error.hpp"
#include "scr/jsonio.hpp"
#include "scr/textprep.hpp"

namespace scr {

struct Vocabulary {
    std::vector<std::string> terms;  // sorted; index = position
    std::unordered_map<std::string, std::uint32_t> term_to_index;

    std::size_t size() const { return terms.size(); }

    /// -1 when the term is out of vocabulary.
    std::int64_t index_of(const std::string& term) const {
        const auto it = term_to_index.find(term);
        return it == term_to_index.end() ? -1 : static_cast<std::int64_t>(it->second);
    }

    static Vocabulary from_terms(std::vector<std::string> sorted_terms) {
        Vocabulary v;
        v.terms = std::move(sorted_terms);
        v.term_to_index.reserve(v.terms.size());
        for (std::uint32_t i = 0; i < v.terms.size(); ++i)
            v.term_to_index.emplace(v.terms[i], i);
        return v;
    }
};

/// Coordinates sorted by term index; zero weights never stored.
struct SparseVector {
    std::vector<std::pair<std::uint32_t, double>> entries;

    double l2_norm() const {
        double s = 0.0;
        for (const auto& [i, w] : entries) s += w * w;
        return std::sqrt(s);
    }
};

struct TfidfOptions {
    bool relative_tf = false;  // term count divided by document length
    bool l2_normalize = false;
};

struct TfidfModel {
    Vocabulary vocabulary;
    std::uint64_t doc_count = 0;
    std::vector<std::uint64_t> doc_freq;  // parallel to vocabulary.terms
    TfidfOptions options;

    double idf(std::uint32_t term_index) const {
        return std::log(static_cast<double>(doc_count) /
                        static_cast<double>(doc_freq[term_index]));
    }

    SparseVector transform(const TokenStream& tokens) const {
        std::map<std::uint32_t, std::uint64_t> counts;
        for (const auto& t : tokens) {
            const auto idx = vocabulary.index_of(t);
            if (idx >= 0) ++counts[static_cast<std::uint32_t>(idx)];
        }
        SparseVector v;
        v.entries.reserve(counts.size());
        const double denom =
            options.relative_tf ? static_cast<double>(tokens.size()) : 1.0;
        for (const auto& [i, c] : counts) {
            const double tf = static_cast<double>(c) / denom;
            const double w = tf * idf(i);
            if (w != 0.0) v.entries.emplace_back(i, w);
        }
        if (options.l2_normalize) {
            const double norm = v.l2_norm();
            if (norm > 0.0)
                for (auto& [i, w] : v.entries) w /= norm;
        }
        return v;
    }

    Json to_json() const {
        Json j;
        j["doc_count"] = doc_count;
        j["relative_tf"] = options.relative_tf;
        j["l2_normalize"] = options.l2_normalize;
        j["terms"] = vocabulary.terms;
        j["doc_freq"] = doc_freq;
        return j;
    }

    static TfidfModel from_json(const Json& j) {
        TfidfModel m;
        m.doc_count = require_field(j, "doc_count", "tfidf model").get<std::uint64_t>();
        m.options.relative_tf = field_or(j, "relative_tf", false);
        m.options.l2_normalize = field_or(j, "l2_normalize", false);
        auto terms = require_field(j, "terms", "tfidf model").get<std::vector<std::string>>();
        m.vocabulary = Vocabulary::from_terms(std::move(terms));
        m.doc_freq = require_field(j, "doc_freq", "tfidf model").get<std::vector<std::uint64_t>>();
        if (m.doc_freq.size() != m.vocabulary.size())
            fail("tfidf model: doc_freq and terms lengths differ");
        for (const auto f : m.doc_freq)
            if (f == 0 || f > m.doc_count)
                fail("tfidf model: doc_freq outside [1, doc_count]");
        return m;
    }
};

/// Vocabulary = all distinct tokens across the collection, sorted;
/// doc_freq counts documents containing the term, not occurrences.
inline TfidfModel fit_tfidf(const std::vector<TokenStream>& streams,
                            const TfidfOptions& options = {}) {
    std::unordered_map<std::string, std::uint64_t> df;
    std::unordered_set<std::string> in_doc;
    for (const auto& tokens : streams) {
        in_doc.clear();
        for (const auto& t : tokens)
            if (in_doc.insert(t).second) ++df[t];
    }
    if (df.empty()) fail("tfidf fit: no terms in any document");

    std::vector<std::string> terms;
    terms.reserve(df.size());
    for (const auto& [t, c] : df) terms.push_back(t);
    std::sort(terms.begin(), terms.end());

    TfidfModel model;
    model.options = options;
    model.doc_count = streams.size();
    model.vocabulary = Vocabulary::from_terms(std::move(terms));
    model.doc_freq.resize(model.vocabulary.size());
    for (std::uint32_t i = 0; i < model.vocabulary.size(); ++i)
        model.doc_freq[i] = df.at(model.vocabulary.terms[i]);
    return model;
}

}  // namespace scr
