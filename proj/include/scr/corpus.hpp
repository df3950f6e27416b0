#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "scr/date.hpp"
#include "scr/error.hpp"
#include "scr/jsonio.hpp"
#include "scr/rng.hpp"
#include "scr/textprep.hpp"

namespace scr {

inline constexpr const char* kUnknown = "UNKNOWN";

struct Document {
    std::string id;
    std::string text;
    Date date;
    std::string process_type = kUnknown;
    std::string state = kUnknown;
    std::string decision = kUnknown;
    std::vector<std::string> cited_bps;  // sorted, unique

    bool cites(const std::string& bp_id) const {
        return std::binary_search(cited_bps.begin(), cited_bps.end(), bp_id);
    }

    bool operator==(const Document&) const = default;
};

struct Corpus {
    std::string name;
    std::vector<Document> documents;

    std::size_t size() const { return documents.size(); }

    /// 1 for documents citing bp_id, 0 otherwise, in corpus order.
    std::vector<int> citation_labels(const std::string& bp_id) const {
        std::vector<int> labels(documents.size(), 0);
        for (std::size_t i = 0; i < documents.size(); ++i)
            labels[i] = documents[i].cites(bp_id) ? 1 : 0;
        return labels;
    }

    std::vector<Date> dates() const {
        std::vector<Date> out;
        out.reserve(documents.size());
        for (const auto& d : documents) out.push_back(d.date);
        return out;
    }

    std::unordered_map<std::string, std::size_t> id_index() const {
        std::unordered_map<std::string, std::size_t> idx;
        idx.reserve(documents.size());
        for (std::size_t i = 0; i < documents.size(); ++i)
            idx.emplace(documents[i].id, i);
        return idx;
    }

    std::pair<Date, Date> date_range() const {
        if (documents.empty()) fail("corpus '", name, "' is empty");
        Date lo = documents.front().date, hi = lo;
        for (const auto& d : documents) {
            lo = std::min(lo, d.date);
            hi = std::max(hi, d.date);
        }
        return {lo, hi};
    }
};

/// Accepted bounds for document dates at load time.
struct CorpusSchema {
    Date date_min{1500, 1, 1};
    Date date_max{2500, 12, 31};
};

namespace detail {

inline std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline std::string meta_value(const Json& j, const char* key,
                              const std::string& context) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return kUnknown;
    if (!it->is_string())
        fail(context, ": field '", key, "' must be a string");
    std::string v = it->get<std::string>();
    return v.empty() ? std::string(kUnknown) : v;
}

}  // namespace detail

/// One JSON object per line, fields: id, date, text, process_type, state,
/// decision, cited_bps. Metadata fields are optional and default to UNKNOWN;
/// cited_bps defaults to empty.
inline Corpus load_corpus(const std::string& path,
                          const CorpusSchema& schema = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open corpus file '", path, "'");
    Corpus corpus;
    corpus.name = path;
    std::unordered_map<std::string, std::size_t> seen;  // id -> first line
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string ctx = concat("line ", line_no);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const std::exception& e) {
            fail(ctx, ": malformed record: ", e.what());
        }
        if (!j.is_object()) fail(ctx, ": record must be an object");

        Document doc;
        doc.id = require_string(j, "id", ctx);
        if (doc.id.empty()) fail(ctx, ": empty id");
        if (const auto it = seen.find(doc.id); it != seen.end())
            fail(ctx, ": duplicate id '", doc.id, "' (first seen on line ",
                 it->second, ")");
        seen.emplace(doc.id, line_no);

        const std::string rec = concat(ctx, " (id '", doc.id, "')");
        doc.text = require_string(j, "text", rec);
        if (doc.text.empty()) fail(rec, ": empty text");
        try {
            doc.date = parse_date(require_string(j, "date", rec));
        } catch (const Error& e) {
            fail(rec, ": ", e.what());
        }
        if (doc.date < schema.date_min || schema.date_max < doc.date)
            fail(rec, ": date ", format_date(doc.date),
                 " outside accepted range [", format_date(schema.date_min),
                 ", ", format_date(schema.date_max), "]");
        doc.process_type = detail::meta_value(j, "process_type", rec);
        doc.state = detail::meta_value(j, "state", rec);
        doc.decision = detail::meta_value(j, "decision", rec);
        if (const auto it = j.find("cited_bps"); it != j.end() && !it->is_null()) {
            if (!it->is_array())
                fail(rec, ": field 'cited_bps' must be an array");
            std::vector<std::string> bps;
            for (const auto& b : *it) {
                if (!b.is_string())
                    fail(rec, ": 'cited_bps' entries must be strings");
                bps.push_back(b.get<std::string>());
            }
            doc.cited_bps = detail::sorted_unique(std::move(bps));
        }
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write corpus file '", path, "'");
    for (const auto& d : corpus.documents) {
        Json j;
        j["id"] = d.id;
        j["date"] = format_date(d.date);
        j["text"] = d.text;
        j["process_type"] = d.process_type;
        j["state"] = d.state;
        j["decision"] = d.decision;
        j["cited_bps"] = d.cited_bps;
        out << j.dump() << '\n';
    }
    if (!out) fail("failed writing corpus file '", path, "'");
}

/// One precedent under study: identity, publication date, its regex query as
/// a conjunction of alternative-term groups, plot words, extra masking
/// aliases, and the recall floor used for threshold retuning.
struct PrecedentSpec {
    std::string bp_id;
    Date publication_date;
    std::vector<std::vector<std::string>> regex_terms;  // AND of OR-groups
    std::vector<std::string> relevant_words;
    std::vector<std::string> citation_aliases;
    double recall_floor = 0.9;

    void validate() const {
        if (bp_id.empty()) fail("precedent with empty bp_id");
        if (regex_terms.empty())
            fail("precedent '", bp_id, "': regex_terms must be non-empty");
        for (const auto& group : regex_terms)
            if (group.empty())
                fail("precedent '", bp_id, "': empty alternation group");
        if (!(recall_floor > 0.0 && recall_floor <= 1.0))
            fail("precedent '", bp_id, "': recall_floor must be in (0, 1], got ",
                 recall_floor);
    }

    static PrecedentSpec from_json(const Json& j) {
        PrecedentSpec spec;
        spec.bp_id = require_string(j, "bp_id", "precedent");
        const std::string ctx = concat("precedent '", spec.bp_id, "'");
        spec.publication_date =
            parse_date(require_string(j, "publication_date", ctx));
        const Json& terms = require_field(j, "regex_terms", ctx);
        if (!terms.is_array()) fail(ctx, ": regex_terms must be an array");
        for (const auto& g : terms) {
            std::vector<std::string> group;
            if (g.is_string()) {
                group.push_back(g.get<std::string>());
            } else if (g.is_array()) {
                for (const auto& t : g) {
                    if (!t.is_string())
                        fail(ctx, ": regex_terms entries must be strings");
                    group.push_back(t.get<std::string>());
                }
            } else {
                fail(ctx, ": regex_terms groups must be strings or arrays");
            }
            spec.regex_terms.push_back(std::move(group));
        }
        spec.relevant_words =
            field_or(j, "relevant_words", std::vector<std::string>{});
        spec.citation_aliases =
            field_or(j, "citation_aliases", std::vector<std::string>{});
        spec.recall_floor = field_or(j, "recall_floor", 0.9);
        spec.validate();
        return spec;
    }

    Json to_json() const {
        Json j;
        j["bp_id"] = bp_id;
        j["publication_date"] = format_date(publication_date);
        j["regex_terms"] = regex_terms;
        j["relevant_words"] = relevant_words;
        j["citation_aliases"] = citation_aliases;
        j["recall_floor"] = recall_floor;
        return j;
    }
};

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
    std::uint64_t seed = 0;

    Json to_json() const {
        Json j;
        j["seed"] = seed;
        j["train"] = train;
        j["validation"] = validation;
        j["test"] = test;
        return j;
    }

    static DatasetSplit from_json(const Json& j) {
        DatasetSplit s;
        s.seed = field_or<std::uint64_t>(j, "seed", 0);
        s.train = field_or(j, "train", std::vector<std::string>{});
        s.validation = field_or(j, "validation", std::vector<std::string>{});
        s.test = field_or(j, "test", std::vector<std::string>{});
        return s;
    }
};

/// Label-stratified split. The test share is drawn from the whole corpus and
/// the validation share from what remains, per class independently, so each
/// part's positive rate tracks the global rate to within one document.
/// Output id lists follow corpus order.
inline DatasetSplit stratified_split(const Corpus& corpus,
                                     const std::string& bp_id, double test_frac,
                                     double val_frac, std::uint64_t seed) {
    if (!(test_frac > 0.0 && test_frac < 1.0))
        fail("test_frac must be in (0, 1), got ", test_frac);
    if (!(val_frac >= 0.0 && val_frac < 1.0))
        fail("val_frac must be in [0, 1), got ", val_frac);

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < corpus.documents.size(); ++i)
        (corpus.documents[i].cites(bp_id) ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        fail("corpus has ", pos.size(), " positives and ", neg.size(),
             " negatives for '", bp_id, "'; need at least one of each");

    enum Part { kTrain = 0, kVal = 1, kTest = 2 };
    std::vector<char> part(corpus.documents.size(), kTrain);
    std::size_t pos_in[3] = {0, 0, 0};

    const auto assign = [&](std::vector<std::size_t> idx, const char* tag,
                            bool positive) {
        Rng rng = Rng::derive(seed, concat("split:", tag));
        rng.shuffle(idx);
        const auto n = idx.size();
        const auto n_test = static_cast<std::size_t>(
            std::llround(test_frac * static_cast<double>(n)));
        const auto n_val = static_cast<std::size_t>(
            std::llround(val_frac * static_cast<double>(n - n_test)));
        for (std::size_t k = 0; k < n; ++k) {
            const char p = k < n_test ? kTest : (k < n_test + n_val ? kVal : kTrain);
            part[idx[k]] = p;
            if (positive) ++pos_in[static_cast<int>(p)];
        }
    };
    assign(pos, "pos", true);
    assign(neg, "neg", false);

    if (pos_in[kTest] == 0 || pos_in[kTrain] == 0 ||
        (val_frac > 0.0 && pos_in[kVal] == 0))
        fail("too few positives (", pos.size(),
             ") to give every split part at least one for '", bp_id, "'");

    DatasetSplit split;
    split.seed = seed;
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
        const std::string& id = corpus.documents[i].id;
        switch (part[i]) {
            case kTrain: split.train.push_back(id); break;
            case kVal: split.validation.push_back(id); break;
            default: split.test.push_back(id); break;
        }
    }
    return split;
}

/// Topic planted into a synthetic corpus: documents on the topic carry its
/// words at word_rate_positive and cite bp_id once past the publication date.
/// positive_rate_end >= 0 makes the topic prevalence ramp linearly across the
/// corpus date range, giving the citation series a shape.
struct SynthTopic {
    std::string bp_id;
    Date publication{2008, 1, 1};
    std::vector<std::string> words;
    double word_rate_positive = 0.9;
    double word_rate_negative = 0.05;
    double positive_rate = 0.3;
    double positive_rate_end = -1.0;
    double citation_rate = 1.0;
};

struct SynthConfig {
    std::string name = "synthetic";
    std::size_t n_docs = 1000;
    Date date_min{2005, 1, 1};
    Date date_max{2018, 12, 31};
    std::size_t vocabulary_size = 400;
    std::size_t doc_len_min = 40;
    std::size_t doc_len_max = 160;
    double stopword_rate = 0.15;
    std::string id_prefix = "doc";
    std::vector<SynthTopic> topics;
    std::vector<std::pair<std::string, double>> process_types = {
        {"RE", 0.3}, {"ARE", 0.2}, {"Rcl", 0.15},
        {"HC", 0.15}, {"AI", 0.1}, {kUnknown, 0.1}};
    std::vector<std::pair<std::string, double>> states = {
        {"SP", 0.3},  {"RJ", 0.15}, {"MG", 0.15}, {"RS", 0.1},
        {"BA", 0.1},  {"DF", 0.1},  {kUnknown, 0.1}};
    std::vector<std::pair<std::string, double>> decisions = {
        {"procedural", 0.4}, {"granted", 0.3}, {"denied", 0.2}, {kUnknown, 0.1}};

    static SynthConfig from_json(const Json& j);
};

namespace detail {

inline const std::string& weighted_choice(
    const std::vector<std::pair<std::string, double>>& pool, Rng& rng) {
    double total = 0.0;
    for (const auto& [v, w] : pool) total += w;
    double r = rng.uniform(0.0, total);
    for (const auto& [v, w] : pool) {
        r -= w;
        if (r < 0.0) return v;
    }
    return pool.back().first;
}

inline std::string filler_term(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "termo%03zu", index);
    return buf;
}

inline std::string citation_digits(const std::string& bp_id) {
    std::string digits;
    for (char c : bp_id)
        if (c >= '0' && c <= '9') digits.push_back(c);
    return digits.empty() ? bp_id : digits;
}

inline std::string spelled_date(const Date& d, bool month_name, Rng& rng) {
    char buf[64];
    if (!month_name) {
        std::snprintf(buf, sizeof buf, "%02d/%02d/%04d", d.day, d.month, d.year);
        return buf;
    }
    static const char* months[] = {
        "janeiro", "fevereiro", "março",    "abril",   "maio",     "junho",
        "julho",   "agosto",    "setembro", "outubro", "novembro", "dezembro"};
    std::snprintf(buf, sizeof buf, "%d%s de %s de %04d", d.day,
                  rng.chance(0.5) ? "º" : "", months[d.month - 1], d.year);
    return buf;
}

}  // namespace detail

/// Deterministic topic-planting generator. Document i is produced from the
/// substream derive(seed, i), so the corpus is stable under reordering of the
/// generation loop.
inline Corpus generate_synthetic_corpus(const SynthConfig& config,
                                        std::uint64_t seed) {
    if (config.n_docs == 0) fail("synthetic corpus needs n_docs >= 1");
    if (config.vocabulary_size == 0)
        fail("synthetic corpus needs vocabulary_size >= 1");
    if (config.doc_len_min == 0 || config.doc_len_max < config.doc_len_min)
        fail("synthetic corpus needs 1 <= doc_len_min <= doc_len_max");
    if (config.date_max < config.date_min)
        fail("synthetic corpus date range is inverted");
    for (const auto& t : config.topics) {
        if (t.bp_id.empty()) fail("synthetic topic with empty bp_id");
        if (t.words.empty())
            fail("synthetic topic '", t.bp_id, "' has an empty word list");
    }

    const auto& stopword_pool = Stopwords::default_portuguese_list();
    const std::int64_t day_min = days_since_epoch(config.date_min);
    const std::int64_t day_max = days_since_epoch(config.date_max);
    const auto day_span = static_cast<std::uint64_t>(day_max - day_min) + 1;

    Corpus corpus;
    corpus.name = config.name;
    corpus.documents.reserve(config.n_docs);
    char idbuf[64];
    for (std::size_t i = 0; i < config.n_docs; ++i) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
        Document doc;
        std::snprintf(idbuf, sizeof idbuf, "%s%06zu", config.id_prefix.c_str(),
                      i);
        doc.id = idbuf;
        doc.date = date_from_days(day_min +
                                  static_cast<std::int64_t>(rng.bounded(day_span)));
        const double when =
            day_span <= 1 ? 0.0
                          : static_cast<double>(days_since_epoch(doc.date) - day_min) /
                                static_cast<double>(day_span - 1);

        const std::size_t len =
            config.doc_len_min +
            rng.bounded(config.doc_len_max - config.doc_len_min + 1);
        std::vector<std::string> tokens;
        tokens.reserve(len + 8);
        for (std::size_t k = 0; k < len; ++k) {
            if (rng.chance(config.stopword_rate))
                tokens.push_back(stopword_pool[rng.index(stopword_pool.size())]);
            else
                tokens.push_back(
                    detail::filler_term(rng.index(config.vocabulary_size)));
        }

        for (const auto& topic : config.topics) {
            const double rate =
                topic.positive_rate_end < 0.0
                    ? topic.positive_rate
                    : topic.positive_rate +
                          (topic.positive_rate_end - topic.positive_rate) * when;
            const bool on_topic = rng.chance(rate);
            const double word_rate =
                on_topic ? topic.word_rate_positive : topic.word_rate_negative;
            for (const auto& w : topic.words)
                if (rng.chance(word_rate))
                    tokens.insert(tokens.begin() +
                                      static_cast<std::ptrdiff_t>(
                                          rng.index(tokens.size() + 1)),
                                  w);
            if (on_topic && !(doc.date < topic.publication) &&
                rng.chance(topic.citation_rate)) {
                doc.cited_bps.push_back(topic.bp_id);
                const std::string num = detail::citation_digits(topic.bp_id);
                const std::string when_str =
                    detail::spelled_date(doc.date, rng.chance(0.3), rng);
                std::string phrase;
                switch (rng.bounded(3)) {
                    case 0:
                        phrase = concat("conforme a Súmula Vinculante nº ", num,
                                        ", em ", when_str);
                        break;
                    case 1:
                        phrase = concat("nos termos da súmula vinculante ", num,
                                        ", julgado em ", when_str);
                        break;
                    default:
                        phrase = concat("aplica-se a SV ", num, ". Decisão de ",
                                        when_str);
                        break;
                }
                tokens.push_back(phrase);
            }
        }
        doc.cited_bps = detail::sorted_unique(std::move(doc.cited_bps));

        doc.process_type = detail::weighted_choice(config.process_types, rng);
        doc.state = detail::weighted_choice(config.states, rng);
        doc.decision = detail::weighted_choice(config.decisions, rng);

        std::string text;
        for (std::size_t k = 0; k < tokens.size(); ++k) {
            if (k) text += (k % 13 == 0) ? ". " : " ";
            text += tokens[k];
        }
        text += '.';
        doc.text = std::move(text);
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

inline SynthConfig SynthConfig::from_json(const Json& j) {
    SynthConfig c;
    c.name = field_or<std::string>(j, "name", c.name);
    c.n_docs = field_or<std::size_t>(j, "n_docs", c.n_docs);
    if (j.contains("date_min"))
        c.date_min = parse_date(require_string(j, "date_min", "synth config"));
    if (j.contains("date_max"))
        c.date_max = parse_date(require_string(j, "date_max", "synth config"));
    c.vocabulary_size =
        field_or<std::size_t>(j, "vocabulary_size", c.vocabulary_size);
    c.doc_len_min = field_or<std::size_t>(j, "doc_len_min", c.doc_len_min);
    c.doc_len_max = field_or<std::size_t>(j, "doc_len_max", c.doc_len_max);
    c.stopword_rate = field_or(j, "stopword_rate", c.stopword_rate);
    c.id_prefix = field_or<std::string>(j, "id_prefix", c.id_prefix);
    if (j.contains("topics")) {
        c.topics.clear();
        for (const auto& tj : j.at("topics")) {
            SynthTopic t;
            t.bp_id = require_string(tj, "bp_id", "synth topic");
            const std::string ctx = concat("synth topic '", t.bp_id, "'");
            if (tj.contains("publication_date"))
                t.publication =
                    parse_date(require_string(tj, "publication_date", ctx));
            t.words = field_or(tj, "words", std::vector<std::string>{});
            t.word_rate_positive =
                field_or(tj, "word_rate_positive", t.word_rate_positive);
            t.word_rate_negative =
                field_or(tj, "word_rate_negative", t.word_rate_negative);
            t.positive_rate = field_or(tj, "positive_rate", t.positive_rate);
            t.positive_rate_end =
                field_or(tj, "positive_rate_end", t.positive_rate_end);
            t.citation_rate = field_or(tj, "citation_rate", t.citation_rate);
            c.topics.push_back(std::move(t));
        }
    }
    const auto pool = [&](const char* key,
                          std::vector<std::pair<std::string, double>>& out) {
        if (!j.contains(key)) return;
        out.clear();
        for (const auto& e : j.at(key)) {
            out.emplace_back(require_string(e, "value", key),
                             field_or(e, "weight", 1.0));
        }
    };
    pool("process_types", c.process_types);
    pool("states", c.states);
    pool("decisions", c.decisions);
    return c;
}

}  // namespace scr
