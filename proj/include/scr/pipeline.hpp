#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "scr/analytics.hpp"
#include "scr/corpus.hpp"
#include "scr/error.hpp"
#include "scr/eval.hpp"
#include "scr/explain.hpp"
#include "scr/forest.hpp"
#include "scr/jsonio.hpp"
#include "scr/linear.hpp"
#include "scr/parallel.hpp"
#include "scr/plot.hpp"
#include "scr/rng.hpp"
#include "scr/scorer.hpp"
#include "scr/textprep.hpp"
#include "scr/tfidf.hpp"
#include "scr/version.hpp"

namespace scr {

struct ModelMenu {
    bool logistic = true;
    bool svm = true;
    bool forest = true;
    bool regex = true;
    LinearHyper logistic_hyper;
    LinearHyper svm_hyper;
    ForestHyper forest_hyper;
    std::vector<std::pair<std::string, std::string>> external;  // label, path
};

struct LimeConfig {
    bool enabled = true;
    int docs = 20;  // explained documents per (precedent, model)
    LimeOptions options;
};

struct PipelineConfig {
    std::string name = "run";
    std::string labeled_corpus;
    std::string unlabeled_corpus;  // empty: analytics run on the labeled corpus
    CorpusSchema schema;
    std::string stopword_file;  // empty: built-in Portuguese list
    std::vector<std::string> extra_citation_patterns;
    double test_frac = 0.2;
    double val_frac = 0.1;
    TfidfOptions tfidf;
    ModelMenu models;
    LimeConfig lime;
    int bin_width_months = 6;
    int top_k_groups = 5;
    std::vector<std::string> breakdown_fields = {"process_type", "state",
                                                 "decision"};
    int importance_k = 10;
    ImportanceMode forest_importance_mode = ImportanceMode::stddev;
    std::vector<PrecedentSpec> precedents;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int workers = 0;  // 0: hardware concurrency

    static PipelineConfig from_json(const Json& j);
    Json to_json() const;
    static PipelineConfig load_file(const std::string& path) {
        return from_json(load_json_file(path));
    }
};

namespace detail {

inline void parse_linear_hyper(const Json& j, LinearHyper& h) {
    h.lambda = field_or(j, "lambda", h.lambda);
    h.learning_rate = field_or(j, "learning_rate", h.learning_rate);
    h.epochs = field_or(j, "epochs", h.epochs);
}

inline void parse_forest_hyper(const Json& j, ForestHyper& h) {
    h.trees = field_or(j, "trees", h.trees);
    h.max_depth = field_or(j, "max_depth", h.max_depth);
    h.min_leaf = field_or(j, "min_leaf", h.min_leaf);
    h.features_per_split = field_or(j, "features_per_split", h.features_per_split);
    h.bootstrap = field_or(j, "bootstrap", h.bootstrap);
}

/// Model entries accept either a bool or an object with hyperparameters.
template <class ParseHyper>
bool parse_model_entry(const Json& models, const char* key, bool fallback,
                       ParseHyper&& parse) {
    const auto it = models.find(key);
    if (it == models.end()) return fallback;
    if (it->is_boolean()) return it->get<bool>();
    if (!it->is_object())
        fail("config: models.", key, " must be a bool or an object");
    parse(*it);
    return field_or(*it, "enabled", true);
}

}  // namespace detail

inline PipelineConfig PipelineConfig::from_json(const Json& j) {
    PipelineConfig c;
    c.name = field_or<std::string>(j, "name", c.name);
    c.labeled_corpus = require_string(j, "labeled_corpus", "config");
    c.unlabeled_corpus = field_or<std::string>(j, "unlabeled_corpus", "");
    if (j.contains("date_min"))
        c.schema.date_min = parse_date(require_string(j, "date_min", "config"));
    if (j.contains("date_max"))
        c.schema.date_max = parse_date(require_string(j, "date_max", "config"));
    c.stopword_file = field_or<std::string>(j, "stopword_file", "");
    c.extra_citation_patterns =
        field_or(j, "extra_citation_patterns", std::vector<std::string>{});
    c.test_frac = field_or(j, "test_frac", c.test_frac);
    c.val_frac = field_or(j, "val_frac", c.val_frac);
    c.tfidf.relative_tf = field_or(j, "relative_tf", false);
    c.tfidf.l2_normalize = field_or(j, "l2_normalize", false);
    if (j.contains("models")) {
        const Json& m = j.at("models");
        c.models.logistic = detail::parse_model_entry(
            m, "logistic", true,
            [&](const Json& o) { detail::parse_linear_hyper(o, c.models.logistic_hyper); });
        c.models.svm = detail::parse_model_entry(
            m, "svm", true,
            [&](const Json& o) { detail::parse_linear_hyper(o, c.models.svm_hyper); });
        c.models.forest = detail::parse_model_entry(
            m, "forest", true,
            [&](const Json& o) { detail::parse_forest_hyper(o, c.models.forest_hyper); });
        c.models.regex = detail::parse_model_entry(m, "regex", true,
                                                   [](const Json&) {});
        if (m.contains("external")) {
            for (const auto& e : m.at("external"))
                c.models.external.emplace_back(
                    require_string(e, "label", "models.external"),
                    require_string(e, "path", "models.external"));
        }
    }
    if (j.contains("lime")) {
        const Json& l = j.at("lime");
        c.lime.enabled = field_or(l, "enabled", true);
        c.lime.docs = field_or(l, "docs", c.lime.docs);
        c.lime.options.samples = field_or(l, "samples", c.lime.options.samples);
        c.lime.options.top_n = field_or(l, "top_n", c.lime.options.top_n);
        c.lime.options.keep_prob =
            field_or(l, "keep_prob", c.lime.options.keep_prob);
        c.lime.options.ridge = field_or(l, "ridge", c.lime.options.ridge);
    }
    c.bin_width_months = field_or(j, "bin_width_months", c.bin_width_months);
    c.top_k_groups = field_or(j, "top_k_groups", c.top_k_groups);
    c.breakdown_fields = field_or(j, "breakdown_fields", c.breakdown_fields);
    c.importance_k = field_or(j, "importance_k", c.importance_k);
    const std::string mode =
        field_or<std::string>(j, "forest_importance_mode", "std");
    if (mode == "std") c.forest_importance_mode = ImportanceMode::stddev;
    else if (mode == "mean") c.forest_importance_mode = ImportanceMode::mean;
    else fail("config: forest_importance_mode must be 'std' or 'mean'");
    const Json& ps = require_field(j, "precedents", "config");
    for (const auto& p : ps) c.precedents.push_back(PrecedentSpec::from_json(p));
    if (c.precedents.empty()) fail("config: needs at least one precedent");
    c.seed = field_or<std::uint64_t>(j, "seed", c.seed);
    c.out_dir = field_or<std::string>(j, "out_dir", c.out_dir);
    c.workers = field_or(j, "workers", c.workers);
    return c;
}

inline Json PipelineConfig::to_json() const {
    Json j;
    j["name"] = name;
    j["labeled_corpus"] = labeled_corpus;
    j["unlabeled_corpus"] = unlabeled_corpus;
    j["date_min"] = format_date(schema.date_min);
    j["date_max"] = format_date(schema.date_max);
    j["stopword_file"] = stopword_file;
    j["extra_citation_patterns"] = extra_citation_patterns;
    j["test_frac"] = test_frac;
    j["val_frac"] = val_frac;
    j["relative_tf"] = tfidf.relative_tf;
    j["l2_normalize"] = tfidf.l2_normalize;
    j["models"] = {
        {"logistic",
         {{"enabled", models.logistic},
          {"lambda", models.logistic_hyper.lambda},
          {"learning_rate", models.logistic_hyper.learning_rate},
          {"epochs", models.logistic_hyper.epochs}}},
        {"svm",
         {{"enabled", models.svm},
          {"lambda", models.svm_hyper.lambda},
          {"learning_rate", models.svm_hyper.learning_rate},
          {"epochs", models.svm_hyper.epochs}}},
        {"forest",
         {{"enabled", models.forest},
          {"trees", models.forest_hyper.trees},
          {"max_depth", models.forest_hyper.max_depth},
          {"min_leaf", models.forest_hyper.min_leaf},
          {"features_per_split", models.forest_hyper.features_per_split},
          {"bootstrap", models.forest_hyper.bootstrap}}},
        {"regex", models.regex}};
    Json ext = Json::array();
    for (const auto& [label, path] : models.external)
        ext.push_back({{"label", label}, {"path", path}});
    j["models"]["external"] = std::move(ext);
    j["lime"] = {{"enabled", lime.enabled},
                 {"docs", lime.docs},
                 {"samples", lime.options.samples},
                 {"top_n", lime.options.top_n},
                 {"keep_prob", lime.options.keep_prob},
                 {"ridge", lime.options.ridge}};
    j["bin_width_months"] = bin_width_months;
    j["top_k_groups"] = top_k_groups;
    j["breakdown_fields"] = breakdown_fields;
    j["importance_k"] = importance_k;
    j["forest_importance_mode"] =
        forest_importance_mode == ImportanceMode::stddev ? "std" : "mean";
    Json ps = Json::array();
    for (const auto& p : precedents) ps.push_back(p.to_json());
    j["precedents"] = std::move(ps);
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["workers"] = workers;
    return j;
}

/// Dotted-path overrides ("models.forest.trees=50"). Values parse as JSON
/// when possible, otherwise as strings.
inline void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        fail("override '", assignment, "' is not of the form key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(raw);
    } catch (const std::exception&) {
        value = raw;
    }
    Json* at = &config;
    std::size_t begin = 0;
    while (true) {
        const auto dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot - begin);
        if (key.empty()) fail("override '", assignment, "' has an empty key");
        if (dot == std::string::npos) {
            (*at)[key] = std::move(value);
            return;
        }
        at = &(*at)[key];
        if (!at->is_object() && !at->is_null())
            fail("override '", assignment, "': '", key, "' is not an object");
        begin = dot + 1;
    }
}

enum class Stage : unsigned {
    load = 1u << 0,
    split = 1u << 1,
    vectorize = 1u << 2,
    train = 1u << 3,
    evaluate = 1u << 4,
    retune = 1u << 5,
    predict = 1u << 6,
    timeseries = 1u << 7,
    correlate = 1u << 8,
    breakdown = 1u << 9,
    explain = 1u << 10,
    all = (1u << 11) - 1,
};

inline unsigned operator|(Stage a, Stage b) {
    return static_cast<unsigned>(a) | static_cast<unsigned>(b);
}
inline bool has_stage(unsigned mask, Stage s) {
    return (mask & static_cast<unsigned>(s)) != 0;
}

/// Every stage pulls in the stages whose in-memory results it consumes.
inline unsigned stage_closure(unsigned mask) {
    const auto need = [&](Stage s, unsigned deps) {
        if (has_stage(mask, s)) mask |= deps;
    };
    need(Stage::explain, Stage::evaluate | Stage::retune);
    need(Stage::breakdown, static_cast<unsigned>(Stage::predict));
    need(Stage::correlate, static_cast<unsigned>(Stage::predict));
    need(Stage::timeseries, static_cast<unsigned>(Stage::predict));
    need(Stage::predict, static_cast<unsigned>(Stage::retune));
    need(Stage::retune, static_cast<unsigned>(Stage::evaluate));
    need(Stage::evaluate, static_cast<unsigned>(Stage::train));
    need(Stage::train, static_cast<unsigned>(Stage::vectorize));
    need(Stage::vectorize, static_cast<unsigned>(Stage::split));
    need(Stage::split, static_cast<unsigned>(Stage::load));
    return mask;
}

struct StageTiming {
    std::string name;
    double seconds = 0.0;
};

struct RunManifest {
    std::string name;
    std::string version = kVersion;
    std::string config_hash;
    std::uint64_t seed = 0;
    int workers = 1;
    bool valid = false;
    std::string error;
    std::vector<StageTiming> stages;
    std::vector<std::string> outputs;

    Json to_json() const {
        Json j;
        j["name"] = name;
        j["version"] = version;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["workers"] = workers;
        j["valid"] = valid;
        if (!valid) j["error"] = error;
        Json st = Json::array();
        for (const auto& s : stages)
            st.push_back({{"name", s.name}, {"seconds", s.seconds}});
        j["stages"] = std::move(st);
        j["outputs"] = outputs;
        return j;
    }
};

namespace detail {

inline std::string format_full(double v) {  // shortest round-trip form
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_pct(double fraction) {  // one decimal, of 100
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
    return buf;
}

inline std::string format_fixed(double v, int places = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

inline std::string sanitize_name(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? std::string("x") : out;
}

inline std::string config_hash_hex(const PipelineConfig& config) {
    // Canonical form: sorted keys, independent of declaration order.
    const nlohmann::json canonical =
        nlohmann::json::parse(config.to_json().dump());
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical.dump())));
    return buf;
}

class Emitter {
public:
    Emitter(std::string dir, RunManifest& manifest)
        : dir_(std::move(dir)), manifest_(manifest) {}

    std::ofstream open(const std::string& name) {
        std::ofstream out(path_of(name), std::ios::binary);
        if (!out) fail("cannot write output file '", path_of(name), "'");
        manifest_.outputs.push_back(name);
        return out;
    }

    std::string claim(const std::string& name) {  // for non-stream writers
        manifest_.outputs.push_back(name);
        return path_of(name);
    }

    std::string path_of(const std::string& name) const {
        return (std::filesystem::path(dir_) / name).string();
    }

private:
    std::string dir_;
    RunManifest& manifest_;
};

struct TrainedModel {
    Scorer scorer;
    double tuned_threshold = 0.0;
    std::vector<double> labeled_scores;  // over the full labeled corpus
    std::vector<double> predicted_scores;  // over the analyzed corpus
};

}  // namespace detail

/// Executes the staged flow: load -> split -> vectorize -> train ->
/// evaluate -> retune -> predict -> time series / correlations / breakdowns /
/// explanations, emitting deterministic artifacts into out_dir. `mask`
/// selects the stages to run; upstream dependencies join automatically.
inline RunManifest run_pipeline(const PipelineConfig& config,
                                unsigned requested = static_cast<unsigned>(Stage::all)) {
    using Clock = std::chrono::steady_clock;
    // Requested stages emit their artifacts; their upstream dependencies run
    // for their in-memory results only.
    const unsigned effective = stage_closure(requested);

    const int workers =
        config.workers > 0
            ? config.workers
            : std::max(1u, std::thread::hardware_concurrency());

    RunManifest manifest;
    manifest.name = config.name;
    manifest.seed = config.seed;
    manifest.workers = workers;
    manifest.config_hash = detail::config_hash_hex(config);

    std::filesystem::create_directories(config.out_dir);
    detail::Emitter emit(config.out_dir, manifest);

    const auto write_manifest = [&] {
        save_json_file(emit.path_of("manifest.json"), manifest.to_json());
    };

    const auto stage = [&](const std::string& name, auto&& fn) {
        const auto t0 = Clock::now();
        try {
            fn();
        } catch (const std::exception& e) {
            manifest.valid = false;
            manifest.error = concat(name, ": ", e.what());
            write_manifest();
            fail(manifest.error);
        }
        const double secs =
            std::chrono::duration<double>(Clock::now() - t0).count();
        manifest.stages.push_back({name, secs});
    };

    // ---- load ----------------------------------------------------------
    Corpus labeled;
    Corpus analyzed;  // unlabeled corpus when given, else the labeled one
    bool separate_analyzed = false;
    Stopwords stopwords;
    stage("load", [&] {
        labeled = load_corpus(config.labeled_corpus, config.schema);
        if (labeled.documents.empty())
            fail("labeled corpus '", config.labeled_corpus, "' is empty");
        if (!config.unlabeled_corpus.empty()) {
            analyzed = load_corpus(config.unlabeled_corpus, config.schema);
            if (analyzed.documents.empty())
                fail("corpus '", config.unlabeled_corpus, "' is empty");
            separate_analyzed = true;
        }
        stopwords = config.stopword_file.empty()
                        ? Stopwords::default_portuguese()
                        : Stopwords::load_file(config.stopword_file);
        const auto [lo, hi] = labeled.date_range();
        for (const auto& spec : config.precedents) {
            spec.validate();
            if (hi < spec.publication_date)
                fail("precedent '", spec.bp_id, "' published ",
                     format_date(spec.publication_date),
                     " after every labeled document (last: ", format_date(hi),
                     ")");
        }
    });
    const Corpus& scored_corpus = separate_analyzed ? analyzed : labeled;

    for (const auto& spec : config.precedents) {
        const std::string bp = detail::sanitize_name(spec.bp_id);
        const auto sub_seed = [&](const std::string& tag) {
            return Rng::derive(config.seed, concat(spec.bp_id, ":", tag))
                .next_u64();
        };

        // Masking depends on per-precedent aliases, so the text pipeline and
        // token caches are per precedent.
        std::vector<std::string> aliases = config.extra_citation_patterns;
        for (const auto& a : spec.citation_aliases) aliases.push_back(a);
        const TextPipeline tp(stopwords, MaskingRules::defaults(aliases));

        const std::vector<int> labels = labeled.citation_labels(spec.bp_id);

        DatasetSplit split;
        std::vector<std::size_t> train_rows, val_rows, test_rows;
        stage(concat("split:", bp), [&] {
            split = stratified_split(labeled, spec.bp_id, config.test_frac,
                                     config.val_frac, sub_seed("split"));
            const auto index = labeled.id_index();
            const auto rows = [&](const std::vector<std::string>& ids,
                                  std::vector<std::size_t>& out) {
                out.reserve(ids.size());
                for (const auto& id : ids) out.push_back(index.at(id));
            };
            rows(split.train, train_rows);
            rows(split.validation, val_rows);
            rows(split.test, test_rows);
            if (has_stage(requested, Stage::split))
                save_json_file(emit.claim(concat("split_", bp, ".json")),
                               split.to_json());
        });

        std::shared_ptr<const TfidfModel> tfidf;
        std::vector<TokenStream> labeled_tokens(labeled.size());
        std::vector<SparseVector> labeled_vectors(labeled.size());
        stage(concat("vectorize:", bp), [&] {
            parallel_for(labeled.size(), workers, [&](std::size_t i) {
                labeled_tokens[i] = tp.preprocess_text(labeled.documents[i].text);
            });
            std::vector<TokenStream> train_streams;
            train_streams.reserve(train_rows.size());
            for (const auto r : train_rows)
                train_streams.push_back(labeled_tokens[r]);
            auto model = fit_tfidf(train_streams, config.tfidf);
            tfidf = std::make_shared<const TfidfModel>(std::move(model));
            parallel_for(labeled.size(), workers, [&](std::size_t i) {
                labeled_vectors[i] = tfidf->transform(labeled_tokens[i]);
            });
            if (has_stage(requested, Stage::vectorize))
                save_json_file(emit.claim(concat("tfidf_", bp, ".json")),
                               tfidf->to_json());
        });

        std::vector<detail::TrainedModel> menu;
        stage(concat("train:", bp), [&] {
            std::vector<SparseVector> xs;
            std::vector<int> ys;
            xs.reserve(train_rows.size());
            ys.reserve(train_rows.size());
            for (const auto r : train_rows) {
                xs.push_back(labeled_vectors[r]);
                ys.push_back(labels[r]);
            }
            const std::size_t dim = tfidf->vocabulary.size();
            const bool emit_models = has_stage(requested, Stage::train);

            if (config.models.logistic) {
                LinearHyper h = config.models.logistic_hyper;
                h.seed = sub_seed("train:logistic");
                auto m = std::make_shared<const LinearModel>(
                    train_logistic(xs, ys, dim, h));
                if (emit_models)
                    save_json_file(
                        emit.claim(concat("model_", bp, "_logistic.json")),
                        m->to_json());
                menu.push_back({Scorer::make_linear(m, tfidf), 0.0, {}, {}});
            }
            if (config.models.svm) {
                LinearHyper h = config.models.svm_hyper;
                h.seed = sub_seed("train:svm");
                auto m = std::make_shared<const LinearModel>(
                    train_linear_svm(xs, ys, dim, h));
                if (emit_models)
                    save_json_file(emit.claim(concat("model_", bp, "_svm.json")),
                                   m->to_json());
                menu.push_back({Scorer::make_linear(m, tfidf), 0.0, {}, {}});
            }
            if (config.models.forest) {
                ForestHyper h = config.models.forest_hyper;
                h.seed = sub_seed("train:forest");
                auto m = std::make_shared<const Forest>(
                    train_random_forest(xs, ys, dim, h, workers));
                if (emit_models)
                    save_json_file(
                        emit.claim(concat("model_", bp, "_forest.json")),
                        m->to_json());
                menu.push_back({Scorer::make_forest(m, tfidf), 0.0, {}, {}});
            }
            if (config.models.regex) {
                auto q = std::make_shared<const RegexQuery>(
                    RegexQuery::compile(spec.regex_terms));
                menu.push_back({Scorer::make_regex(q), 0.0, {}, {}});
            }
            for (const auto& [label, path] : config.models.external) {
                auto ext = std::make_shared<const ExternalScores>(
                    ExternalScores::load_file(path, label));
                menu.push_back({Scorer::make_external(ext), 0.0, {}, {}});
            }
            if (menu.empty()) fail("no models enabled in config");
            std::vector<std::string> seen;
            for (const auto& tm : menu) {
                for (const auto& s : seen)
                    if (s == tm.scorer.label())
                        fail("duplicate model label '", s, "'");
                seen.push_back(tm.scorer.label());
            }
        });

        const auto score_labeled_row = [&](const Scorer& s, std::size_t row) {
            if (s.needs_text_pipeline()) {
                const SparseVector& v = labeled_vectors[row];
                return s.kind() == Scorer::Kind::forest ? s.forest()->score(v)
                                                        : s.linear()->score(v);
            }
            return s.score_document(labeled.documents[row], tp);
        };

        if (has_stage(effective, Stage::evaluate))
        stage(concat("evaluate:", bp), [&] {
            for (auto& tm : menu) {
                tm.labeled_scores.resize(labeled.size());
                parallel_for(labeled.size(), workers, [&](std::size_t i) {
                    tm.labeled_scores[i] = score_labeled_row(tm.scorer, i);
                });
            }
            if (!has_stage(requested, Stage::evaluate)) return;

            auto csv = emit.open(concat("metrics_", bp, ".csv"));
            csv << "bp,model,f1,precision,recall,auprc\n";
            Json jm;
            for (const auto& tm : menu) {
                std::vector<double> scores;
                std::vector<int> ls;
                scores.reserve(test_rows.size());
                ls.reserve(test_rows.size());
                for (const auto r : test_rows) {
                    scores.push_back(tm.labeled_scores[r]);
                    ls.push_back(labels[r]);
                }
                EvaluationReport rep =
                    compute_metrics(scores, ls, tm.scorer.threshold());
                rep.bp_id = spec.bp_id;
                rep.model = tm.scorer.label();
                csv << rep.bp_id << ',' << rep.model << ','
                    << detail::format_pct(rep.f1) << ','
                    << detail::format_pct(rep.precision) << ','
                    << detail::format_pct(rep.recall) << ','
                    << detail::format_pct(rep.auprc) << '\n';
                jm[rep.model] = {{"threshold", rep.threshold},
                                 {"f1", rep.f1},
                                 {"precision", rep.precision},
                                 {"recall", rep.recall},
                                 {"auprc", rep.auprc},
                                 {"accuracy", rep.accuracy}};
            }
            save_json_file(emit.claim(concat("metrics_", bp, ".json")), jm);
        });

        if (has_stage(effective, Stage::retune))
        stage(concat("retune:", bp), [&] {
            const std::vector<Date> dates = labeled.dates();
            Json jt;
            for (auto& tm : menu) {
                tm.tuned_threshold = retune_threshold(
                    tm.labeled_scores, labels, dates, spec.publication_date,
                    spec.recall_floor);
                jt[tm.scorer.label()] = {{"initial", tm.scorer.threshold()},
                                         {"tuned", tm.tuned_threshold}};
            }
            if (!has_stage(requested, Stage::retune)) return;
            save_json_file(emit.claim(concat("thresholds_", bp, ".json")), jt);
            auto csv = emit.open(concat("thresholds_", bp, ".csv"));
            csv << "bp,model,stage,threshold\n";
            for (const auto& tm : menu) {
                csv << spec.bp_id << ',' << tm.scorer.label() << ",initial,"
                    << detail::format_fixed(tm.scorer.threshold(), 6) << '\n';
                csv << spec.bp_id << ',' << tm.scorer.label() << ",tuned,"
                    << detail::format_fixed(tm.tuned_threshold, 6) << '\n';
            }
        });

        std::vector<TokenStream> scored_tokens;
        if (has_stage(effective, Stage::predict))
        stage(concat("predict:", bp), [&] {
            const bool reuse = !separate_analyzed;
            if (!reuse) {
                scored_tokens.resize(scored_corpus.size());
                parallel_for(scored_corpus.size(), workers, [&](std::size_t i) {
                    scored_tokens[i] =
                        tp.preprocess_text(scored_corpus.documents[i].text);
                });
            }
            for (auto& tm : menu) {
                if (reuse) {
                    tm.predicted_scores = tm.labeled_scores;
                    continue;
                }
                tm.predicted_scores.resize(scored_corpus.size());
                parallel_for(scored_corpus.size(), workers, [&](std::size_t i) {
                    const Scorer& s = tm.scorer;
                    if (s.needs_text_pipeline()) {
                        const SparseVector v = s.tfidf()->transform(scored_tokens[i]);
                        tm.predicted_scores[i] =
                            s.kind() == Scorer::Kind::forest
                                ? s.forest()->score(v)
                                : s.linear()->score(v);
                    } else {
                        tm.predicted_scores[i] =
                            s.score_document(scored_corpus.documents[i], tp);
                    }
                });
            }
            if (!has_stage(requested, Stage::predict)) return;
            for (const auto& tm : menu) {
                auto csv = emit.open(concat("predictions_", bp, "_",
                                            detail::sanitize_name(tm.scorer.label()),
                                            ".csv"));
                csv << "id,score,pred_initial,pred_tuned\n";
                for (std::size_t i = 0; i < scored_corpus.size(); ++i) {
                    const double s = tm.predicted_scores[i];
                    csv << scored_corpus.documents[i].id << ','
                        << detail::format_full(s) << ','
                        << (s >= tm.scorer.threshold() ? 1 : 0) << ','
                        << (s >= tm.tuned_threshold ? 1 : 0) << '\n';
                }
            }
        });

        const auto [range_lo, range_hi] = scored_corpus.date_range();
        const auto predicted_docs = [&](const detail::TrainedModel& tm,
                                        bool tuned) {
            std::vector<const Document*> docs;
            const double t = tuned ? tm.tuned_threshold : tm.scorer.threshold();
            for (std::size_t i = 0; i < scored_corpus.size(); ++i)
                if (tm.predicted_scores[i] >= t)
                    docs.push_back(&scored_corpus.documents[i]);
            return docs;
        };

        if (has_stage(requested, Stage::timeseries))
            stage(concat("timeseries:", bp), [&] {
                std::vector<Date> citation_dates;
                for (const auto& d : scored_corpus.documents)
                    if (d.cites(spec.bp_id)) citation_dates.push_back(d.date);
                const TimeSeries citations =
                    bin_time_series(citation_dates, config.bin_width_months,
                                    range_lo, range_hi);
                for (const auto& tm : menu) {
                    std::vector<Date> initial_dates, tuned_dates;
                    for (std::size_t i = 0; i < scored_corpus.size(); ++i) {
                        const double s = tm.predicted_scores[i];
                        if (s >= tm.scorer.threshold())
                            initial_dates.push_back(scored_corpus.documents[i].date);
                        if (s >= tm.tuned_threshold)
                            tuned_dates.push_back(scored_corpus.documents[i].date);
                    }
                    const TimeSeries initial =
                        bin_time_series(initial_dates, config.bin_width_months,
                                        range_lo, range_hi);
                    const TimeSeries tuned =
                        bin_time_series(tuned_dates, config.bin_width_months,
                                        range_lo, range_hi);
                    const std::string model =
                        detail::sanitize_name(tm.scorer.label());
                    auto csv = emit.open(
                        concat("timeseries_", bp, "_", model, ".csv"));
                    csv << "bin_start,predicted_initial,predicted_tuned,"
                           "citations\n";
                    for (std::size_t i = 0; i < tuned.size(); ++i)
                        csv << format_date(tuned.bin_start(i)) << ','
                            << initial.counts[i] << ',' << tuned.counts[i]
                            << ',' << citations.counts[i] << '\n';

                    std::vector<PlotCurve> curves;
                    PlotCurve ci;
                    ci.label = "initial threshold";
                    ci.color = "#7f9cc4";
                    ci.dashed = true;
                    PlotCurve ct;
                    ct.label = "tuned threshold";
                    ct.color = "#1f5fa8";
                    PlotCurve cc;
                    cc.label = "citations";
                    cc.color = "#d97108";
                    for (std::size_t i = 0; i < tuned.size(); ++i) {
                        ci.values.push_back(
                            static_cast<double>(initial.counts[i]));
                        ct.values.push_back(static_cast<double>(tuned.counts[i]));
                        cc.values.push_back(
                            static_cast<double>(citations.counts[i]));
                    }
                    curves.push_back(std::move(ci));
                    curves.push_back(std::move(ct));
                    if (citations.total() > 0) curves.push_back(std::move(cc));
                    write_timeseries_svg(
                        emit.claim(concat("timeseries_", bp, "_", model, ".svg")),
                        tuned, tuned.counts, curves,
                        concat(spec.bp_id, " similar cases (", tm.scorer.label(),
                               ")"));
                }
            });

        if (has_stage(requested, Stage::correlate) && spec.relevant_words.size() >= 2)
            stage(concat("correlate:", bp), [&] {
                const auto emit_corr = [&](const std::vector<const Document*>& docs,
                                           const std::string& tag,
                                           const std::string& title) {
                    if (docs.size() < 2) return;
                    const auto presence =
                        word_presence(docs, spec.relevant_words);
                    const CorrelationMatrix cm =
                        phi_correlations(presence, spec.relevant_words);
                    auto csv = emit.open(
                        concat("correlations_", bp, "_", tag, ".csv"));
                    csv << "word";
                    for (const auto& w : cm.words) csv << ',' << w;
                    csv << ",degenerate\n";
                    for (std::size_t i = 0; i < cm.words.size(); ++i) {
                        csv << cm.words[i];
                        for (std::size_t j = 0; j < cm.words.size(); ++j)
                            csv << ',' << detail::format_fixed(cm.values[i][j]);
                        csv << ',' << (cm.degenerate[i] ? 1 : 0) << '\n';
                    }
                    write_heatmap_svg(
                        emit.claim(concat("correlations_", bp, "_", tag, ".svg")),
                        cm, title);
                };
                for (const auto& tm : menu)
                    emit_corr(predicted_docs(tm, true),
                              detail::sanitize_name(tm.scorer.label()),
                              concat(spec.bp_id, " word correlations (",
                                     tm.scorer.label(), ")"));
                std::vector<const Document*> citing;
                for (const auto& d : scored_corpus.documents)
                    if (d.cites(spec.bp_id)) citing.push_back(&d);
                emit_corr(citing, "citations",
                          concat(spec.bp_id, " word correlations (citing)"));
            });

        if (has_stage(requested, Stage::correlate) && !spec.relevant_words.empty())
            stage(concat("frequencies:", bp), [&] {
                for (const auto& tm : menu) {
                    const auto docs = predicted_docs(tm, true);
                    if (docs.empty()) continue;
                    const auto freqs =
                        word_frequencies(docs, spec.relevant_words);
                    auto csv = emit.open(
                        concat("frequencies_", bp, "_",
                               detail::sanitize_name(tm.scorer.label()), ".csv"));
                    csv << "word,doc_count,fraction\n";
                    for (const auto& f : freqs)
                        csv << f.word << ',' << f.doc_count << ','
                            << detail::format_fixed(f.fraction) << '\n';
                }
            });

        if (has_stage(requested, Stage::breakdown))
            stage(concat("breakdown:", bp), [&] {
                for (const auto& tm : menu) {
                    const auto docs = predicted_docs(tm, true);
                    if (docs.empty()) continue;
                    for (const auto& field : config.breakdown_fields) {
                        const MetadataBreakdown bd = metadata_breakdown(
                            docs, field, config.top_k_groups,
                            config.bin_width_months, range_lo, range_hi);
                        auto csv = emit.open(concat(
                            "breakdown_", bp, "_",
                            detail::sanitize_name(tm.scorer.label()), "_",
                            detail::sanitize_name(field), ".csv"));
                        csv << "bin_start,total";
                        for (const auto& g : bd.groups) csv << ',' << g;
                        csv << '\n';
                        for (std::size_t i = 0; i < bd.total.size(); ++i) {
                            csv << format_date(bd.total.bin_start(i)) << ','
                                << bd.total.counts[i];
                            for (const auto& s : bd.series)
                                csv << ',' << s.counts[i];
                            csv << '\n';
                        }
                    }
                }
            });

        if (has_stage(requested, Stage::explain))
            stage(concat("explain:", bp), [&] {
                std::vector<ImportanceRanking> rankings;
                for (const auto& tm : menu) {
                    if (tm.scorer.kind() == Scorer::Kind::logistic ||
                        tm.scorer.kind() == Scorer::Kind::svm)
                        rankings.push_back(linear_importances(
                            *tm.scorer.linear(), tfidf->vocabulary,
                            config.importance_k));
                    else if (tm.scorer.kind() == Scorer::Kind::forest)
                        rankings.push_back(forest_importances(
                            *tm.scorer.forest(), tfidf->vocabulary,
                            config.importance_k, config.forest_importance_mode));
                }
                if (!rankings.empty()) {
                    auto csv = emit.open(concat("importance_", bp, ".csv"));
                    csv << "bp,model,term,importance\n";
                    for (const auto& r : rankings)
                        for (const auto& e : r.entries)
                            csv << spec.bp_id << ',' << r.model << ',' << e.term
                                << ',' << detail::format_fixed(e.importance)
                                << '\n';
                }
                if (rankings.size() >= 2) {
                    const auto consensus =
                        consensus_features(rankings, config.importance_k);
                    auto csv = emit.open(concat("consensus_", bp, ".csv"));
                    csv << "bp,term,mean_importance\n";
                    for (const auto& e : consensus)
                        csv << spec.bp_id << ',' << e.term << ','
                            << detail::format_fixed(e.importance) << '\n';
                }

                if (!config.lime.enabled) return;
                for (const auto& tm : menu) {
                    if (!tm.scorer.supports_perturbation()) continue;
                    std::vector<const Document*> docs;
                    for (const auto r : test_rows) {
                        if (tm.labeled_scores[r] >= tm.scorer.threshold())
                            docs.push_back(&labeled.documents[r]);
                        if (docs.size() >=
                            static_cast<std::size_t>(config.lime.docs))
                            break;
                    }
                    if (docs.empty()) continue;
                    std::vector<LimeExplanation> exps;
                    for (const auto* doc : docs) {
                        LimeOptions opt = config.lime.options;
                        opt.seed = sub_seed(
                            concat("lime:", tm.scorer.label(), ":", doc->id));
                        exps.push_back(
                            lime_explain(tm.scorer, tp, *doc, opt, workers));
                    }
                    const auto agg =
                        lime_aggregate(exps, config.lime.options.top_n);
                    auto csv = emit.open(
                        concat("lime_", bp, "_",
                               detail::sanitize_name(tm.scorer.label()), ".csv"));
                    csv << "bp,model,word,percentage\n";
                    for (const auto& e : agg)
                        csv << spec.bp_id << ',' << tm.scorer.label() << ','
                            << e.word << ','
                            << detail::format_fixed(e.percentage, 1) << '\n';
                }
            });
    }

    manifest.valid = true;
    write_manifest();
    return manifest;
}

}  // namespace scr
