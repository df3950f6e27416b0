#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "scr/corpus.hpp"
#include "scr/scorer.hpp"
#include "scr/textprep.hpp"

using namespace scr;

TEST_CASE("accent folding covers Portuguese text") {
    CHECK(normalize_text("Súmula") == "sumula");
    CHECK(normalize_text("SÚMULA VINCULANTE") == "sumula vinculante");
    CHECK(normalize_text("ação épica") == "acao epica");
    CHECK(normalize_text("ÀÁÂÃÄÅ") == "aaaaaa");
    CHECK(normalize_text("çÇ") == "cc");
    CHECK(normalize_text("decisão órgão") == "decisao orgao");
    CHECK(normalize_text("Doença sœur ﬂ") == "doenca soeur ﬂ");
}

TEST_CASE("folding handles the odd latin letters") {
    CHECK(normalize_text("Æther") == "aether");
    CHECK(normalize_text("straße") == "strasse");
    CHECK(normalize_text("Øre") == "ore");
    CHECK(normalize_text("Þing ð") == "thing d");
    CHECK(normalize_text("nº 1ª") == "no 1a");      // ordinal indicators
    CHECK(normalize_text("naïve ĳ") == "naive ij");
    CHECK(normalize_text("2×3÷4") == "2×3÷4");      // math signs survive
}

TEST_CASE("combining marks are dropped") {
    // "Súmula" written with a combining acute accent (u + U+0301).
    const std::string decomposed = "Su\xcc\x81mula";
    CHECK(normalize_text(decomposed) == "sumula");
}

TEST_CASE("normalization map points back at source bytes") {
    const std::string raw = "Ação X";
    const NormalizedText nt = normalize_with_map(raw);
    CHECK(nt.text == "acao x");
    REQUIRE(nt.src.size() == nt.text.size());
    // The 'x' in the normalized text maps to the 'X' byte in the raw string.
    CHECK(raw[nt.src[nt.text.size() - 1]] == 'X');
    CHECK(nt.src[0] == 0);
}

TEST_CASE("tokenizer extracts lowercase alphanumeric runs") {
    CHECK(tokenize("lei 11.343/2006") ==
          std::vector<std::string>{"lei", "11", "343", "2006"});
    CHECK(tokenize("  foo   bar  ") == std::vector<std::string>{"foo", "bar"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("...") == std::vector<std::string>{});
    CHECK(tokenize("a1b2") == std::vector<std::string>{"a1b2"});
}

TEST_CASE("citation and date masking removes the known spans") {
    const MaskingRules rules = MaskingRules::defaults();
    CHECK(mask_citations_and_dates(
              "conforme a Súmula Vinculante 11, em 12/11/2008", rules) ==
          "conforme a , em ");
    CHECK(mask_citations_and_dates("texto sem citacao", rules) ==
          "texto sem citacao");
}

TEST_CASE("masking catches citation spelling variants") {
    const MaskingRules rules = MaskingRules::defaults();
    const std::vector<std::string> variants = {
        "Súmula Vinculante nº 11",
        "súmula vinculante n. 11",
        "SUMULA VINCULANTE NO 11",
        "súmulas vinculantes 11",
        "Súmula Vinculante",  // bare reference, no number
        "SV 11",
        "SV nº 11",
        "sv11",
        "SV n.11",
    };
    for (const auto& v : variants) {
        const std::string masked =
            mask_citations_and_dates("inicio " + v + " fim", rules);
        INFO("variant: " << v);
        CHECK(masked.find("11") == std::string::npos);
        CHECK_FALSE(rules.any_match(normalize_text(masked)));
    }
}

TEST_CASE("masking catches date spelling variants") {
    const MaskingRules rules = MaskingRules::defaults();
    const std::vector<std::string> dates = {
        "12/11/2008", "1/2/08",      "31-12-1999",
        "5 de janeiro de 2009",       "1º de março de 2011",
        "23 de dezembro de 14",
    };
    for (const auto& d : dates) {
        const std::string masked =
            mask_citations_and_dates("julgado em " + d + " pela corte", rules);
        INFO("date: " << d);
        CHECK_FALSE(rules.any_match(normalize_text(masked)));
    }
    // Bare numbers and years are not dates.
    CHECK(mask_citations_and_dates("artigo 5 de 1988 tem 12 incisos",
                                   MaskingRules::defaults()) ==
          "artigo 5 de 1988 tem 12 incisos");
}

TEST_CASE("masking runs to a fixpoint") {
    const MaskingRules rules = MaskingRules::defaults();
    // Removing the inner span exposes a new match; one pass is not enough.
    const std::string tricky = "SV sumula vinculante 9 11";
    const std::string masked = mask_citations_and_dates(tricky, rules);
    CHECK_FALSE(rules.any_match(normalize_text(masked)));
}

TEST_CASE("extra citation patterns extend the rules") {
    const MaskingRules rules =
        MaskingRules::defaults({R"(\bbp\s*11\b)"});
    const std::string masked =
        mask_citations_and_dates("aplicando BP 11 ao caso", rules);
    CHECK(masked.find("11") == std::string::npos);
    CHECK(masked.find("aplicando") != std::string::npos);
}

TEST_CASE("masked tokens cannot reassemble into a citation") {
    // "SV. 11" dodges the pattern as raw text because of the period, but the
    // token join "sv 11" matches, so the second pass must strip it.
    const TextPipeline tp = TextPipeline::with_defaults();
    const auto tokens = tp.preprocess_text("reu algemado SV. 11 sem resistencia");
    for (const auto& t : tokens) {
        CHECK(t != "sv");
        CHECK(t != "11");
    }
    CHECK(std::find(tokens.begin(), tokens.end(), "algemado") != tokens.end());
}

TEST_CASE("stopword list drops function words and keeps content") {
    const Stopwords sw = Stopwords::default_portuguese();
    CHECK(sw.contains("de"));
    CHECK(sw.contains("a"));
    CHECK(sw.contains("que"));
    CHECK(sw.contains("nao"));  // stored normalized
    CHECK_FALSE(sw.contains("algema"));
    CHECK_FALSE(sw.contains("roubo"));

    const auto kept = drop_stopwords({"a", "algema", "de", "roubo"}, sw);
    CHECK(kept == std::vector<std::string>{"algema", "roubo"});
}

TEST_CASE("stopword files accept comments and accents") {
    const std::string path = "/tmp/scr_test_stopwords.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n"
            << "NÃO\n"
            << "\n"
            << "das\n";
    }
    const Stopwords sw = Stopwords::load_file(path);
    CHECK(sw.size() == 2);
    CHECK(sw.contains("nao"));
    CHECK(sw.contains("das"));
    CHECK_FALSE(sw.contains("comment"));
}

TEST_CASE("full preprocessing masks then tokenizes then filters") {
    const TextPipeline tp = TextPipeline::with_defaults();
    const auto tokens = tp.preprocess_text(
        "O réu foi algemado conforme a Súmula Vinculante nº 11, "
        "em 12/11/2008, sem resistência.");
    CHECK(std::find(tokens.begin(), tokens.end(), "algemado") != tokens.end());
    CHECK(std::find(tokens.begin(), tokens.end(), "resistencia") != tokens.end());
    for (const auto& t : tokens) {
        CHECK(t != "sumula");
        CHECK(t != "vinculante");
        CHECK(t != "11");
        CHECK(t != "2008");
        CHECK(t != "o");  // stopword
    }
}

TEST_CASE("unfiltered tokens keep stopwords but not citations") {
    const TextPipeline tp = TextPipeline::with_defaults();
    const auto tokens = tp.unfiltered_tokens("o réu e a Súmula Vinculante 11");
    CHECK(std::find(tokens.begin(), tokens.end(), "o") != tokens.end());
    CHECK(std::find(tokens.begin(), tokens.end(), "reu") != tokens.end());
    for (const auto& t : tokens) CHECK(t != "sumula");
}

TEST_CASE("no citation or date pattern survives preprocessing a corpus") {
    SynthConfig cfg;
    cfg.n_docs = 300;
    cfg.topics.push_back({"BP11",
                          Date{2008, 2, 1},
                          {"algema", "flagrante"},
                          0.9,
                          0.05,
                          0.5,
                          -1.0,
                          1.0});
    const Corpus corpus = generate_synthetic_corpus(cfg, 2024);
    const MaskingRules rules = MaskingRules::defaults();
    const TextPipeline tp = TextPipeline::with_defaults();
    std::size_t citing = 0;
    for (const auto& doc : corpus.documents) {
        citing += doc.cited_bps.empty() ? 0 : 1;
        const auto tokens = tp.preprocess_text(doc.text);
        CHECK_FALSE(rules.any_match(normalize_text(join_tokens(tokens))));
    }
    CHECK(citing > 50);  // the corpus actually contains planted citations
}
