#pragma once

#include <cmath>
#include <fstream>
#include <memory>
#include <regex>
#include <string>
#include <unordered_map>
#include <vector>

#include "scr/corpus.hpp"
#include "scr/error.hpp"
#include "scr/forest.hpp"
#include "scr/linear.hpp"
#include "scr/textprep.hpp"
#include "scr/tfidf.hpp"

namespace scr {

/// The text handling every trained model sees: one stopword list plus one
/// masking rule set. Two scorers are comparable only if they share this.
struct TextPipeline {
    Stopwords stopwords;
    MaskingRules rules;

    TextPipeline(Stopwords sw, MaskingRules mr)
        : stopwords(std::move(sw)), rules(std::move(mr)) {}

    static TextPipeline with_defaults(
        const std::vector<std::string>& extra_citation_patterns = {}) {
        return TextPipeline(Stopwords::default_portuguese(),
                            MaskingRules::defaults(extra_citation_patterns));
    }

    TokenStream preprocess_text(std::string_view text) const {
        return preprocess(text, stopwords, rules);
    }

    /// Word universe for perturbation explanations: masked and normalized
    /// but with stopwords kept.
    std::vector<std::string> unfiltered_tokens(std::string_view text) const {
        return tokens_unfiltered(text, rules);
    }
};

/// Conjunction of alternation groups: a document matches when every group
/// has at least one matching term. Terms are regular expressions evaluated
/// case- and accent-insensitively against normalized text.
class RegexQuery {
public:
    static RegexQuery compile(
        const std::vector<std::vector<std::string>>& groups) {
        if (groups.empty()) fail("regex query needs at least one group");
        RegexQuery q;
        q.sources_ = groups;
        for (const auto& group : groups) {
            if (group.empty()) fail("regex query has an empty group");
            std::vector<std::regex> compiled;
            for (const auto& term : group) {
                const std::string norm = normalize_pattern(term);
                try {
                    compiled.emplace_back(norm, std::regex::ECMAScript |
                                                    std::regex::icase |
                                                    std::regex::optimize);
                } catch (const std::regex_error& e) {
                    fail("regex term '", term, "' does not compile: ", e.what());
                }
            }
            q.groups_.push_back(std::move(compiled));
        }
        return q;
    }

    bool matches_normalized(const std::string& normalized) const {
        for (const auto& group : groups_) {
            bool any = false;
            for (const auto& re : group)
                if (std::regex_search(normalized, re)) {
                    any = true;
                    break;
                }
            if (!any) return false;
        }
        return true;
    }

    double score_text(std::string_view raw) const {
        return matches_normalized(normalize_text(raw)) ? 1.0 : 0.0;
    }

    const std::vector<std::vector<std::string>>& sources() const {
        return sources_;
    }

private:
    std::vector<std::vector<std::regex>> groups_;
    std::vector<std::vector<std::string>> sources_;
};

/// Precomputed per-document scores (deep models trained elsewhere).
struct ExternalScores {
    std::string source = "external";
    std::unordered_map<std::string, double> scores;

    double score_id(const std::string& id) const {
        const auto it = scores.find(id);
        if (it == scores.end())
            fail("external scores '", source, "' have no entry for id '", id,
                 "'");
        return it->second;
    }

    /// Delimited file, two columns id,score; an `id,score` header line is
    /// allowed and skipped.
    static ExternalScores load_file(const std::string& path,
                                    const std::string& label = "") {
        std::ifstream in(path);
        if (!in) fail("cannot open external score file '", path, "'");
        ExternalScores ext;
        if (!label.empty()) ext.source = label;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                fail("'", path, "' line ", line_no, ": expected id,score");
            const std::string id = line.substr(0, comma);
            const std::string rest = line.substr(comma + 1);
            if (line_no == 1 && id == "id" && rest.rfind("score", 0) == 0)
                continue;
            if (id.empty())
                fail("'", path, "' line ", line_no, ": empty id");
            double value = 0.0;
            try {
                std::size_t used = 0;
                value = std::stod(rest, &used);
                while (used < rest.size() &&
                       (rest[used] == ' ' || rest[used] == '\t'))
                    ++used;
                if (used != rest.size()) throw std::invalid_argument(rest);
            } catch (const std::exception&) {
                fail("'", path, "' line ", line_no, ": non-numeric score '",
                     rest, "'");
            }
            if (!std::isfinite(value))
                fail("'", path, "' line ", line_no, ": non-finite score");
            if (!ext.scores.emplace(id, value).second)
                fail("'", path, "' line ", line_no, ": duplicate id '", id,
                     "'");
        }
        if (ext.scores.empty()) fail("'", path, "' contains no scores");
        return ext;
    }
};

/// One scoring function over documents with a decision threshold.
/// Predict positive iff score >= threshold.
class Scorer {
public:
    enum class Kind { logistic, svm, forest, regex, external };

    static Scorer make_linear(std::shared_ptr<const LinearModel> model,
                              std::shared_ptr<const TfidfModel> tfidf,
                              std::string label = "") {
        Scorer s;
        s.kind_ = model->kind == LinearKind::logistic ? Kind::logistic : Kind::svm;
        s.threshold_ = model->kind == LinearKind::logistic ? 0.5 : 0.0;
        s.label_ = label.empty()
                       ? (model->kind == LinearKind::logistic ? "logistic" : "svm")
                       : std::move(label);
        s.linear_ = std::move(model);
        s.tfidf_ = std::move(tfidf);
        return s;
    }

    static Scorer make_forest(std::shared_ptr<const Forest> forest,
                              std::shared_ptr<const TfidfModel> tfidf,
                              std::string label = "forest") {
        Scorer s;
        s.kind_ = Kind::forest;
        s.threshold_ = 0.5;
        s.label_ = std::move(label);
        s.forest_ = std::move(forest);
        s.tfidf_ = std::move(tfidf);
        return s;
    }

    static Scorer make_regex(std::shared_ptr<const RegexQuery> query,
                             std::string label = "regex") {
        Scorer s;
        s.kind_ = Kind::regex;
        s.threshold_ = 0.5;
        s.label_ = std::move(label);
        s.regex_ = std::move(query);
        return s;
    }

    static Scorer make_external(std::shared_ptr<const ExternalScores> ext) {
        Scorer s;
        s.kind_ = Kind::external;
        s.threshold_ = 0.5;
        s.label_ = ext->source;
        s.external_ = std::move(ext);
        return s;
    }

    Kind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    double threshold() const { return threshold_; }
    void set_threshold(double t) { threshold_ = t; }

    bool needs_text_pipeline() const {
        return kind_ == Kind::logistic || kind_ == Kind::svm ||
               kind_ == Kind::forest;
    }
    /// External score files cannot be re-evaluated on perturbed text.
    bool supports_perturbation() const { return kind_ != Kind::external; }

    const TfidfModel* tfidf() const { return tfidf_.get(); }
    const LinearModel* linear() const { return linear_.get(); }
    const Forest* forest() const { return forest_.get(); }
    const RegexQuery* regex() const { return regex_.get(); }
    const ExternalScores* external() const { return external_.get(); }

    double score_document(const Document& doc, const TextPipeline& tp) const {
        switch (kind_) {
            case Kind::logistic:
            case Kind::svm:
                return linear_->score(tfidf_->transform(tp.preprocess_text(doc.text)));
            case Kind::forest:
                return forest_->score(tfidf_->transform(tp.preprocess_text(doc.text)));
            case Kind::regex:
                return regex_->score_text(doc.text);
            case Kind::external:
                return external_->score_id(doc.id);
        }
        fail("unreachable scorer kind");
    }

    /// Scores a perturbed token list (normalized, stopwords still present).
    /// TF-IDF paths apply their own stopword filtering; the regex path
    /// rejoins the tokens into text.
    double score_tokens(const std::vector<std::string>& tokens,
                        const TextPipeline& tp) const {
        switch (kind_) {
            case Kind::logistic:
            case Kind::svm: {
                TokenStream kept = drop_stopwords(tokens, tp.stopwords);
                return linear_->score(tfidf_->transform(kept));
            }
            case Kind::forest: {
                TokenStream kept = drop_stopwords(tokens, tp.stopwords);
                return forest_->score(tfidf_->transform(kept));
            }
            case Kind::regex:
                return regex_->matches_normalized(join_tokens(tokens)) ? 1.0 : 0.0;
            case Kind::external:
                fail("external scores '", label_,
                     "' cannot be re-scored on perturbed text");
        }
        fail("unreachable scorer kind");
    }

    bool predict(double score) const { return score >= threshold_; }

private:
    Kind kind_ = Kind::logistic;
    std::string label_;
    double threshold_ = 0.5;
    std::shared_ptr<const TfidfModel> tfidf_;
    std::shared_ptr<const LinearModel> linear_;
    std::shared_ptr<const Forest> forest_;
    std::shared_ptr<const RegexQuery> regex_;
    std::shared_ptr<const ExternalScores> external_;
};

}  // namespace scr
