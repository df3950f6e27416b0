#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "scr/corpus.hpp"
#include "scr/jsonio.hpp"
#include "scr/pipeline.hpp"
#include "scr/version.hpp"

namespace {

using scr::Json;

/// Flags shared by every pipeline subcommand. Named flags mirror top-level
/// config keys; anything nested is reachable through --set.
struct PipelineArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::vector<std::string> named;  // applied after --set, so flags win
};

void add_pipeline_flags(CLI::App* cmd, PipelineArgs& args) {
    cmd->add_option("-c,--config", args.config_path,
                    "pipeline configuration (JSON)")
        ->required();
    cmd->add_option("--set", args.sets,
                    "override a config key: dotted.path=value "
                    "(value parsed as JSON when possible; repeatable)");
    static const char* kKeys[] = {
        "name",          "labeled_corpus",  "unlabeled_corpus",
        "date_min",      "date_max",        "stopword_file",
        "test_frac",     "val_frac",        "relative_tf",
        "l2_normalize",  "bin_width_months", "top_k_groups",
        "importance_k",  "forest_importance_mode",
        "seed",          "out_dir",         "workers"};
    for (const char* key : kKeys) {
        std::string names = std::string("--") + key;
        std::string dashed = key;
        for (auto& ch : dashed)
            if (ch == '_') ch = '-';
        if (dashed != key) names += ",--" + dashed;
        cmd->add_option_function<std::string>(
            names,
            [key, &args](const std::string& v) {
                args.named.push_back(std::string(key) + "=" + v);
            },
            std::string("config key ") + key);
    }
}

scr::PipelineConfig load_config(const PipelineArgs& args) {
    Json j = scr::load_json_file(args.config_path);
    for (const auto& s : args.sets) scr::apply_override(j, s);
    for (const auto& s : args.named) scr::apply_override(j, s);
    return scr::PipelineConfig::from_json(j);
}

void run_stage(const PipelineArgs& args, unsigned mask) {
    const scr::PipelineConfig config = load_config(args);
    const scr::RunManifest manifest = scr::run_pipeline(config, mask);
    double total = 0.0;
    for (const auto& s : manifest.stages) total += s.seconds;
    std::cout << manifest.name << ": " << manifest.outputs.size()
              << " artifact(s) in " << config.out_dir << " ("
              << scr::detail::format_fixed(total, 2) << "s, config "
              << manifest.config_hash << ")\n";
}

void add_stage_command(CLI::App& app, const char* name, const char* help,
                       scr::Stage stage_bit,
                       std::vector<std::unique_ptr<PipelineArgs>>& storage) {
    auto args = std::make_unique<PipelineArgs>();
    CLI::App* cmd = app.add_subcommand(name, help);
    add_pipeline_flags(cmd, *args);
    PipelineArgs* raw = args.get();
    cmd->callback(
        [raw, stage_bit] { run_stage(*raw, static_cast<unsigned>(stage_bit)); });
    storage.push_back(std::move(args));
}

void print_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) scr::fail("cannot open '", path, "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::size_t begin = 0;
        while (true) {
            const auto comma = line.find(',', begin);
            cells.push_back(line.substr(begin, comma - begin));
            if (comma == std::string::npos) break;
            begin = comma + 1;
        }
        rows.push_back(std::move(cells));
    }
    std::vector<std::size_t> widths;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (widths.size() <= i) widths.push_back(0);
            widths[i] = std::max(widths[i], r[i].size());
        }
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) std::cout << "  ";
            std::cout << r[i]
                      << std::string(widths[i] - r[i].size(), ' ');
        }
        std::cout << '\n';
    }
}

void report(const std::string& dir, const std::string& kind) {
    const Json manifest =
        scr::load_json_file(dir + "/manifest.json");
    std::cout << "run: " << manifest.at("name").get<std::string>()
              << "  version: " << manifest.at("version").get<std::string>()
              << "  config: " << manifest.at("config_hash").get<std::string>()
              << "  valid: " << (manifest.at("valid").get<bool>() ? "yes" : "no")
              << "\n";
    if (manifest.contains("error"))
        std::cout << "error: " << manifest.at("error").get<std::string>()
                  << "\n";
    if (kind == "stages") {
        for (const auto& s : manifest.at("stages"))
            std::cout << "  " << s.at("name").get<std::string>() << "  "
                      << scr::detail::format_fixed(s.at("seconds").get<double>(), 3)
                      << "s\n";
        return;
    }
    bool any = false;
    for (const auto& out : manifest.at("outputs")) {
        const std::string name = out.get<std::string>();
        const bool is_csv =
            name.size() > 4 && name.substr(name.size() - 4) == ".csv";
        if (!is_csv || (kind != "all" && name.rfind(kind + "_", 0) != 0))
            continue;
        std::cout << "\n== " << name << "\n";
        print_csv_table(dir + "/" + name);
        any = true;
    }
    if (!any) std::cout << "(no matching artifacts)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"similar case retrieval over dated legal corpora"};
    app.set_version_flag("--version", scr::kVersion);
    app.require_subcommand(1);

    // corpus validate / corpus synth
    CLI::App* corpus = app.add_subcommand("corpus", "corpus utilities");
    corpus->require_subcommand(1);

    struct {
        std::string input;
        std::string date_min, date_max;
    } validate_args;
    CLI::App* validate =
        corpus->add_subcommand("validate", "check a corpus file and summarize it");
    validate->add_option("-i,--input", validate_args.input, "corpus (JSONL)")
        ->required();
    validate->add_option("--date-min", validate_args.date_min,
                         "earliest admissible date (YYYY-MM-DD)");
    validate->add_option("--date-max", validate_args.date_max,
                         "latest admissible date (YYYY-MM-DD)");
    validate->callback([&] {
        scr::CorpusSchema schema;
        if (!validate_args.date_min.empty())
            schema.date_min = scr::parse_date(validate_args.date_min);
        if (!validate_args.date_max.empty())
            schema.date_max = scr::parse_date(validate_args.date_max);
        const scr::Corpus c = scr::load_corpus(validate_args.input, schema);
        const auto [lo, hi] = c.date_range();
        std::cout << validate_args.input << ": " << c.size()
                  << " document(s), " << scr::format_date(lo) << " .. "
                  << scr::format_date(hi) << "\n";
        std::map<std::string, std::size_t> cited;
        for (const auto& d : c.documents)
            for (const auto& bp : d.cited_bps) ++cited[bp];
        for (const auto& [bp, n] : cited)
            std::cout << "  cites " << bp << ": " << n << " document(s)\n";
    });

    struct {
        std::string config, output;
        std::uint64_t seed = 1;
        std::vector<std::string> sets;
    } synth_args;
    CLI::App* synth =
        corpus->add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("-c,--config", synth_args.config,
                      "generator configuration (JSON)")
        ->required();
    synth->add_option("-o,--output", synth_args.output, "corpus to write (JSONL)")
        ->required();
    synth->add_option("--seed", synth_args.seed, "generator seed");
    synth->add_option("--set", synth_args.sets,
                      "override a generator key: dotted.path=value");
    synth->callback([&] {
        Json j = scr::load_json_file(synth_args.config);
        for (const auto& s : synth_args.sets) scr::apply_override(j, s);
        const scr::SynthConfig config = scr::SynthConfig::from_json(j);
        const scr::Corpus c =
            scr::generate_synthetic_corpus(config, synth_args.seed);
        scr::save_corpus(c, synth_args.output);
        std::cout << synth_args.output << ": " << c.size() << " document(s)\n";
    });

    std::vector<std::unique_ptr<PipelineArgs>> storage;
    add_stage_command(app, "train",
                      "fit the vocabulary and classifiers for each precedent",
                      scr::Stage::train, storage);
    add_stage_command(app, "evaluate",
                      "score the held-out split at default thresholds",
                      scr::Stage::evaluate, storage);
    add_stage_command(app, "retune",
                      "recalibrate thresholds to the recall floor",
                      scr::Stage::retune, storage);
    add_stage_command(app, "predict", "score the analysis corpus per model",
                      scr::Stage::predict, storage);
    add_stage_command(app, "timeseries",
                      "bin predicted and citing documents over time",
                      scr::Stage::timeseries, storage);
    add_stage_command(app, "correlate",
                      "word co-occurrence diagnostics over predicted documents",
                      scr::Stage::correlate, storage);
    add_stage_command(app, "breakdown",
                      "metadata composition of predicted documents over time",
                      scr::Stage::breakdown, storage);
    add_stage_command(app, "explain",
                      "feature importances and local explanations",
                      scr::Stage::explain, storage);
    add_stage_command(app, "run", "full pipeline, all artifacts",
                      scr::Stage::all, storage);

    struct {
        std::string dir = "out";
        std::string kind = "all";
    } report_args;
    CLI::App* rep = app.add_subcommand("report", "print artifact tables");
    rep->add_option("-d,--dir", report_args.dir, "artifact directory");
    rep->add_option("-k,--kind", report_args.kind,
                    "one of: all, stages, or an artifact prefix such as "
                    "metrics, thresholds, importance, lime")
        ->check(CLI::IsMember({"all", "stages", "metrics", "thresholds",
                               "importance", "consensus", "lime", "timeseries",
                               "correlations", "frequencies", "breakdown",
                               "predictions"}));
    rep->callback([&] { report(report_args.dir, report_args.kind); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
