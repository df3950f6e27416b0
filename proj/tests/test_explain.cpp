#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "scr/explain.hpp"

using namespace scr;

namespace {

Vocabulary vocab_of(std::vector<std::string> terms) {
    std::sort(terms.begin(), terms.end());
    return Vocabulary::from_terms(std::move(terms));
}

TreeNode leaf(double positive_fraction, std::uint32_t n) {
    TreeNode node;
    node.positive_fraction = positive_fraction;
    node.n_samples = n;
    return node;
}

TreeNode split(std::int32_t feature, std::int32_t left, std::int32_t right,
               std::uint32_t n, double decrease) {
    TreeNode node;
    node.feature = feature;
    node.threshold = 0.5;
    node.left = left;
    node.right = right;
    node.n_samples = n;
    node.impurity_decrease = decrease;
    return node;
}

}  // namespace

TEST_CASE("linear importances rank absolute weights, scaled to 1") {
    LinearModel m;
    m.kind = LinearKind::logistic;
    m.weights = {0.5, -2.0, 1.0};
    const Vocabulary v = vocab_of({"a", "b", "c"});
    const ImportanceRanking r = linear_importances(m, v, 2);
    CHECK(r.model == "logistic");
    CHECK(r.normalized);
    REQUIRE(r.entries.size() == 2);
    CHECK(r.entries[0].term == "b");
    CHECK(r.entries[0].importance == 1.0);
    CHECK(r.entries[1].term == "c");
    CHECK(r.entries[1].importance == 0.5);

    m.kind = LinearKind::hinge;
    CHECK(linear_importances(m, v, 3).model == "svm");
}

TEST_CASE("linear importances break ties by term") {
    LinearModel m;
    m.weights = {-1.0, 1.0};
    const ImportanceRanking r = linear_importances(m, vocab_of({"b", "a"}), 2);
    CHECK(r.entries[0].term == "a");
    CHECK(r.entries[1].term == "b");
    CHECK(r.entries[0].importance == 1.0);
    CHECK(r.entries[1].importance == 1.0);
}

TEST_CASE("linear importances reject degenerate inputs") {
    LinearModel m;
    m.weights = {0.0, 0.0};
    const Vocabulary v = vocab_of({"a", "b"});
    CHECK_THROWS_AS(linear_importances(m, v, 2), Error);
    m.weights = {1.0};
    CHECK_THROWS_AS(linear_importances(m, v, 2), Error);
    m.weights = {1.0, 0.5};
    CHECK_THROWS_AS(linear_importances(m, v, 0), Error);
}

TEST_CASE("forest importances aggregate weighted gini drops per tree") {
    // tree 0: root splits u (drop 0.3 over all 10 rows), its left child
    // splits v (drop 0.2 over 6 rows)
    DecisionTree t0;
    t0.nodes.push_back(split(0, 1, 2, 10, 0.3));
    t0.nodes.push_back(split(1, 3, 4, 6, 0.2));
    t0.nodes.push_back(leaf(0.9, 4));
    t0.nodes.push_back(leaf(0.1, 3));
    t0.nodes.push_back(leaf(0.8, 3));
    // tree 1: root splits u only (drop 0.1)
    DecisionTree t1;
    t1.nodes.push_back(split(0, 1, 2, 10, 0.1));
    t1.nodes.push_back(leaf(0.2, 5));
    t1.nodes.push_back(leaf(0.7, 5));

    Forest f;
    f.trees = {t0, t1};
    f.n_features = 2;
    const Vocabulary v = vocab_of({"u", "v"});

    // per-tree totals: u {0.3, 0.1}, v {0.12, 0}
    const ImportanceRanking mean =
        forest_importances(f, v, 2, ImportanceMode::mean);
    CHECK(mean.model == "forest");
    REQUIRE(mean.entries.size() == 2);
    CHECK(mean.entries[0].term == "u");
    CHECK(mean.entries[0].importance == 1.0);  // 0.2 scaled by itself
    CHECK(mean.entries[1].term == "v");
    CHECK(mean.entries[1].importance == Catch::Approx(0.06 / 0.2));

    const ImportanceRanking sd =
        forest_importances(f, v, 2, ImportanceMode::stddev);
    // population stddev: u sqrt(0.05 - 0.04) = 0.1, v sqrt(0.0072 - 0.0036)
    CHECK(sd.entries[0].term == "u");
    CHECK(sd.entries[0].importance == 1.0);
    CHECK(sd.entries[1].term == "v");
    CHECK(sd.entries[1].importance == Catch::Approx(0.06 / 0.1));
}

TEST_CASE("forest importances reject mismatch and leaf-only forests") {
    Forest f;
    DecisionTree t;
    t.nodes.push_back(leaf(0.5, 10));
    f.trees = {t};
    f.n_features = 2;
    const Vocabulary v = vocab_of({"u", "v"});
    CHECK_THROWS_AS(forest_importances(f, v, 2, ImportanceMode::mean), Error);
    f.n_features = 3;
    CHECK_THROWS_AS(forest_importances(f, v, 2, ImportanceMode::mean), Error);
}

TEST_CASE("consensus keeps terms in every top list, ordered by mean weight") {
    ImportanceRanking r1;
    r1.model = "logistic";
    r1.entries = {{"a", 1.0}, {"b", 0.8}, {"c", 0.1}};
    ImportanceRanking r2;
    r2.model = "svm";
    r2.entries = {{"b", 1.0}, {"d", 0.7}, {"a", 0.5}};

    const auto both = consensus_features({r1, r2}, 3);
    REQUIRE(both.size() == 2);
    CHECK(both[0].term == "b");
    CHECK(both[0].importance == Catch::Approx(0.9));
    CHECK(both[1].term == "a");
    CHECK(both[1].importance == Catch::Approx(0.75));

    // with k=2 only b survives; with k=1 the tops are disjoint
    const auto narrow = consensus_features({r1, r2}, 2);
    REQUIRE(narrow.size() == 1);
    CHECK(narrow[0].term == "b");
    CHECK(consensus_features({r1, r2}, 1).empty());

    CHECK_THROWS_AS(consensus_features({r1}, 3), Error);
    CHECK_THROWS_AS(consensus_features({r1, r2}, 0), Error);
}

TEST_CASE("ridge solver inverts small symmetric systems") {
    std::vector<std::vector<double>> a = {{4.0, 1.0}, {1.0, 3.0}};
    const std::vector<double> x = detail::ridge_solve(a, {1.0, 2.0}, 0.0);
    REQUIRE(x.size() == 2);
    CHECK(x[0] == Catch::Approx(1.0 / 11.0).epsilon(1e-12));
    CHECK(x[1] == Catch::Approx(7.0 / 11.0).epsilon(1e-12));

    // the ridge term is added to the diagonal before solving
    std::vector<std::vector<double>> b = {{4.0, 1.0}, {1.0, 3.0}};
    const std::vector<double> y = detail::ridge_solve(b, {1.0, 2.0}, 1.0);
    CHECK(y[0] == Catch::Approx(2.0 / 19.0).epsilon(1e-12));
    CHECK(y[1] == Catch::Approx(9.0 / 19.0).epsilon(1e-12));

    std::vector<std::vector<double>> zero = {{0.0, 0.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(detail::ridge_solve(zero, {1.0, 1.0}, 0.0), Error);
}

TEST_CASE("lime recovers an exactly linear scoring rule") {
    // score depends only on which word types survive, linearly
    const std::vector<std::string> tokens = {"alpha", "beta",  "gamma",
                                             "delta", "alpha", "alpha"};
    const auto score = [](const std::vector<std::string>& kept) {
        const auto has = [&](const char* w) {
            return std::find(kept.begin(), kept.end(), w) != kept.end();
        };
        return 1.0 + 2.0 * has("alpha") - 1.5 * has("beta") +
               0.5 * has("gamma") + 0.0 * has("delta");
    };
    LimeOptions opt;
    opt.samples = 2000;
    opt.top_n = 4;
    opt.ridge = 1e-8;
    opt.seed = 99;
    const LimeExplanation exp = lime_explain_fn(score, tokens, opt, "doc1");
    CHECK(exp.doc_id == "doc1");
    CHECK(exp.samples == 2000);
    REQUIRE(exp.words.size() == 4);
    CHECK(exp.words[0].first == "alpha");
    CHECK(exp.words[0].second == Catch::Approx(2.0).margin(1e-3));
    CHECK(exp.words[1].first == "gamma");
    CHECK(exp.words[1].second == Catch::Approx(0.5).margin(1e-3));
    CHECK(exp.words[2].first == "delta");
    CHECK(exp.words[2].second == Catch::Approx(0.0).margin(1e-3));
    CHECK(exp.words[3].first == "beta");
    CHECK(exp.words[3].second == Catch::Approx(-1.5).margin(1e-3));
}

TEST_CASE("lime results do not depend on the worker count") {
    const std::vector<std::string> tokens = {"um", "dois", "tres", "quatro",
                                             "cinco"};
    const auto score = [](const std::vector<std::string>& kept) {
        return static_cast<double>(kept.size());
    };
    LimeOptions opt;
    opt.samples = 500;
    opt.top_n = 5;
    opt.seed = 7;
    const LimeExplanation one = lime_explain_fn(score, tokens, opt, "d", 1);
    const LimeExplanation four = lime_explain_fn(score, tokens, opt, "d", 4);
    REQUIRE(one.words.size() == four.words.size());
    for (std::size_t i = 0; i < one.words.size(); ++i) {
        CHECK(one.words[i].first == four.words[i].first);
        CHECK(one.words[i].second == four.words[i].second);
    }
}

TEST_CASE("lime validates its options") {
    const std::vector<std::string> tokens = {"a", "b"};
    const auto score = [](const std::vector<std::string>&) { return 0.0; };
    LimeOptions opt;
    opt.samples = 99;
    CHECK_THROWS_AS(lime_explain_fn(score, tokens, opt, "d"), Error);
    opt.samples = 100;
    opt.keep_prob = 0.0;
    CHECK_THROWS_AS(lime_explain_fn(score, tokens, opt, "d"), Error);
    opt.keep_prob = 1.0;
    CHECK_THROWS_AS(lime_explain_fn(score, tokens, opt, "d"), Error);
    opt.keep_prob = 0.5;
    opt.top_n = 0;
    CHECK_THROWS_AS(lime_explain_fn(score, tokens, opt, "d"), Error);
    opt.top_n = 1;

    try {
        lime_explain_fn(score, {}, opt, "empty-doc");
        FAIL("expected an error");
    } catch (const Error& err) {
        CHECK(std::string(err.what()).find("empty-doc") != std::string::npos);
    }
}

TEST_CASE("lime refuses scorers backed by static score files") {
    const std::string path = "/tmp/scr_test_ext_scores.csv";
    {
        std::ofstream out(path);
        out << "id,score\nx1,0.9\n";
    }
    auto ext = std::make_shared<ExternalScores>(
        ExternalScores::load_file(path, "bert"));
    const Scorer scorer = Scorer::make_external(std::move(ext));
    CHECK_FALSE(scorer.supports_perturbation());

    Document doc;
    doc.id = "x1";
    doc.text = "qualquer texto";
    doc.date = Date{2010, 1, 1};
    const TextPipeline tp = TextPipeline::with_defaults();
    try {
        lime_explain(scorer, tp, doc, LimeOptions{});
        FAIL("expected an error");
    } catch (const Error& err) {
        CHECK(std::string(err.what()).find("bert") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("lime aggregate reports the share of documents per word") {
    LimeExplanation e1, e2, e3;
    e1.words = {{"algema", 0.8}, {"fuga", 0.2}};
    e2.words = {{"algema", 0.5}};
    e3.words = {{"flagrante", 0.9}, {"algema", 0.1}};
    const auto agg = lime_aggregate({e1, e2, e3}, 10);
    REQUIRE(agg.size() == 3);
    CHECK(agg[0].word == "algema");
    CHECK(agg[0].percentage == Catch::Approx(100.0));
    CHECK(agg[1].word == "flagrante");
    CHECK(agg[1].percentage == Catch::Approx(100.0 / 3.0));
    CHECK(agg[2].word == "fuga");
    CHECK(agg[2].percentage == Catch::Approx(100.0 / 3.0));

    const auto top1 = lime_aggregate({e1, e2, e3}, 1);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].word == "algema");

    CHECK_THROWS_AS(lime_aggregate({}, 3), Error);
    CHECK_THROWS_AS(lime_aggregate({e1}, 0), Error);
}
