#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "scr/error.hpp"

namespace scr {

/// Lowercase, accent-free word tokens with stopwords removed.
using TokenStream = std::vector<std::string>;

namespace detail {

struct Utf8Char {
    char32_t cp;
    std::size_t len;
};

inline Utf8Char decode_utf8(std::string_view s, std::size_t i) {
    const auto b = [&](std::size_t k) {
        return static_cast<unsigned char>(s[i + k]);
    };
    const auto cont = [&](std::size_t k) {
        return i + k < s.size() && (b(k) & 0xC0u) == 0x80u;
    };
    const unsigned char b0 = b(0);
    if (b0 < 0x80u) return {b0, 1};
    if ((b0 >> 5) == 0x6u && cont(1)) {
        return {static_cast<char32_t>(((b0 & 0x1Fu) << 6) | (b(1) & 0x3Fu)), 2};
    }
    if ((b0 >> 4) == 0xEu && cont(1) && cont(2)) {
        return {static_cast<char32_t>(((b0 & 0x0Fu) << 12) |
                                      ((b(1) & 0x3Fu) << 6) | (b(2) & 0x3Fu)),
                3};
    }
    if ((b0 >> 3) == 0x1Eu && cont(1) && cont(2) && cont(3)) {
        return {static_cast<char32_t>(((b0 & 0x07u) << 18) |
                                      ((b(1) & 0x3Fu) << 12) |
                                      ((b(2) & 0x3Fu) << 6) | (b(3) & 0x3Fu)),
                4};
    }
    return {b0, 1};  // stray byte, passed through
}

/// Latin-script folding: accented letters to their lowercase base letter,
/// ordinal indicators to a/o, combining diacritics dropped. Returns nullptr
/// for characters that are kept as-is.
inline const char* fold_latin(char32_t cp) {
    switch (cp) {
        case 0xAA: return "a";   // feminine ordinal
        case 0xBA: return "o";   // masculine ordinal
        case 0xC6: case 0xE6: return "ae";
        case 0xC7: case 0xE7: return "c";
        case 0xD0: case 0xF0: return "d";
        case 0xD1: case 0xF1: return "n";
        case 0xD8: case 0xF8: return "o";
        case 0xDE: case 0xFE: return "th";
        case 0xDF: return "ss";
        case 0xFF: return "y";
        default: break;
    }
    if ((cp >= 0xC0 && cp <= 0xC5) || (cp >= 0xE0 && cp <= 0xE5)) return "a";
    if ((cp >= 0xC8 && cp <= 0xCB) || (cp >= 0xE8 && cp <= 0xEB)) return "e";
    if ((cp >= 0xCC && cp <= 0xCF) || (cp >= 0xEC && cp <= 0xEF)) return "i";
    if ((cp >= 0xD2 && cp <= 0xD6) || (cp >= 0xF2 && cp <= 0xF6)) return "o";
    if ((cp >= 0xD9 && cp <= 0xDC) || (cp >= 0xF9 && cp <= 0xFC)) return "u";
    if (cp == 0xDD || cp == 0xFD) return "y";
    if (cp >= 0x100 && cp <= 0x105) return "a";
    if (cp >= 0x106 && cp <= 0x10D) return "c";
    if (cp >= 0x10E && cp <= 0x111) return "d";
    if (cp >= 0x112 && cp <= 0x11B) return "e";
    if (cp >= 0x11C && cp <= 0x123) return "g";
    if (cp >= 0x124 && cp <= 0x127) return "h";
    if (cp >= 0x128 && cp <= 0x131) return "i";
    if (cp == 0x132 || cp == 0x133) return "ij";
    if (cp == 0x134 || cp == 0x135) return "j";
    if (cp >= 0x136 && cp <= 0x138) return "k";
    if (cp >= 0x139 && cp <= 0x142) return "l";
    if (cp >= 0x143 && cp <= 0x14B) return "n";
    if (cp >= 0x14C && cp <= 0x151) return "o";
    if (cp == 0x152 || cp == 0x153) return "oe";
    if (cp >= 0x154 && cp <= 0x159) return "r";
    if (cp >= 0x15A && cp <= 0x161) return "s";
    if (cp >= 0x162 && cp <= 0x167) return "t";
    if (cp >= 0x168 && cp <= 0x173) return "u";
    if (cp == 0x174 || cp == 0x175) return "w";
    if (cp >= 0x176 && cp <= 0x178) return "y";
    if (cp >= 0x179 && cp <= 0x17E) return "z";
    if (cp == 0x17F) return "s";
    if (cp >= 0x300 && cp <= 0x36F) return "";  // combining marks
    return nullptr;
}

}  // namespace detail

/// Normalized text plus, per output byte, the offset of the raw byte that
/// produced it. Lets pattern matches found in normalized space be mapped back
/// to spans of the original string.
struct NormalizedText {
    std::string text;
    std::vector<std::uint32_t> src;
};

inline NormalizedText normalize_with_map(std::string_view raw) {
    NormalizedText out;
    out.text.reserve(raw.size());
    out.src.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        const unsigned char c = static_cast<unsigned char>(raw[i]);
        if (c < 0x80u) {
            const char low =
                (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                       : static_cast<char>(c);
            out.text.push_back(low);
            out.src.push_back(static_cast<std::uint32_t>(i));
            ++i;
            continue;
        }
        const auto [cp, len] = detail::decode_utf8(raw, i);
        if (const char* repl = detail::fold_latin(cp)) {
            for (const char* p = repl; *p; ++p) {
                out.text.push_back(*p);
                out.src.push_back(static_cast<std::uint32_t>(i));
            }
        } else {
            for (std::size_t k = 0; k < len; ++k) {
                out.text.push_back(raw[i + k]);
                out.src.push_back(static_cast<std::uint32_t>(i));
            }
        }
        i += len;
    }
    return out;
}

/// Lowercases and folds Latin accents to base letters; every other character
/// is preserved. Idempotent.
inline std::string normalize_text(std::string_view raw) {
    return normalize_with_map(raw).text;
}

/// Normalizes a regex pattern without touching escape sequences, so that
/// patterns written with accents or capitals match normalized text.
inline std::string normalize_pattern(std::string_view pattern) {
    std::string out;
    out.reserve(pattern.size());
    std::size_t i = 0;
    while (i < pattern.size()) {
        if (pattern[i] == '\\' && i + 1 < pattern.size()) {
            out.push_back(pattern[i]);
            out.push_back(pattern[i + 1]);
            i += 2;
            continue;
        }
        const auto [cp, len] = detail::decode_utf8(pattern, i);
        (void)cp;
        out += normalize_text(pattern.substr(i, len));
        i += len;
    }
    return out;
}

/// Maximal runs of ASCII alphanumerics. Digits survive as tokens; everything
/// else delimits.
inline std::vector<std::string> tokenize(std::string_view normalized) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : normalized) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            cur.push_back(static_cast<char>(c));
        } else if (c >= 'A' && c <= 'Z') {
            cur.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

/// One compiled masking pattern. `hint` is a cheap substring prefilter on the
/// normalized text; empty means the regex always runs.
struct MaskPattern {
    std::string source;
    std::string hint;
    std::regex re;
};

class MaskingRules {
public:
    MaskingRules(const std::vector<std::string>& citation_patterns,
                 const std::vector<std::string>& date_patterns) {
        if (citation_patterns.empty() && date_patterns.empty())
            fail("masking rules need at least one pattern");
        for (const auto& p : citation_patterns) add(p, citation_sources_);
        for (const auto& p : date_patterns) add(p, date_sources_);
    }

    /// Citation patterns for "sumula vinculante"-style references plus the
    /// three date formats dominant in Brazilian decisions. Per-precedent
    /// aliases from configuration are appended to the citation list.
    static MaskingRules defaults(
        const std::vector<std::string>& extra_citation_patterns = {}) {
        std::vector<std::string> cite = {
            R"(\bsumulas?\s+vinculantes?(\s+(n[o.]{0,2}\s*)?\d+)?)",
            R"(\bsv\s*(n[o.]{0,2}\s*)?\d+)",
        };
        for (const auto& p : extra_citation_patterns) cite.push_back(p);
        const std::vector<std::string> dates = {
            R"(\b\d{1,2}/\d{1,2}/\d{2,4}\b)",
            R"(\b\d{1,2}-\d{1,2}-\d{2,4}\b)",
            R"(\b\d{1,2}o?\s+de\s+(janeiro|fevereiro|marco|abril|maio|junho|julho|agosto|setembro|outubro|novembro|dezembro)(\s+de)?\s+\d{2,4}\b)",
        };
        MaskingRules rules(cite, dates);
        rules.patterns_[0].hint = "sumula";
        rules.patterns_[1].hint = "sv";
        const std::size_t d0 = cite.size();
        rules.patterns_[d0 + 0].hint = "/";
        rules.patterns_[d0 + 1].hint = "-";
        rules.patterns_[d0 + 2].hint = " de ";
        return rules;
    }

    const std::vector<MaskPattern>& patterns() const { return patterns_; }
    const std::vector<std::string>& citation_sources() const {
        return citation_sources_;
    }
    const std::vector<std::string>& date_sources() const {
        return date_sources_;
    }

    /// True when any pattern matches the given normalized text.
    bool any_match(const std::string& normalized) const {
        for (const auto& p : patterns_) {
            if (!p.hint.empty() && normalized.find(p.hint) == std::string::npos)
                continue;
            if (std::regex_search(normalized, p.re)) return true;
        }
        return false;
    }

private:
    void add(const std::string& pattern, std::vector<std::string>& group) {
        const std::string norm = normalize_pattern(pattern);
        try {
            MaskPattern mp;
            mp.source = norm;
            mp.re = std::regex(norm, std::regex::ECMAScript | std::regex::icase |
                                         std::regex::optimize);
            patterns_.push_back(std::move(mp));
        } catch (const std::regex_error& e) {
            fail("masking pattern '", pattern, "' does not compile: ", e.what());
        }
        group.push_back(norm);
    }

    std::vector<MaskPattern> patterns_;
    std::vector<std::string> citation_sources_;
    std::vector<std::string> date_sources_;
};

/// Deletes every substring whose normalized form matches a masking pattern.
/// Matching is case- and accent-insensitive because it runs on a normalized
/// shadow of the input; the deletions are applied to the raw string through
/// the byte map. Repeats until no pattern matches, so the result is a fixpoint.
inline std::string mask_citations_and_dates(std::string_view raw,
                                            const MaskingRules& rules) {
    std::string cur(raw);
    for (int pass = 0; pass < 16; ++pass) {
        const NormalizedText shadow = normalize_with_map(cur);
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (const auto& p : rules.patterns()) {
            if (!p.hint.empty() &&
                shadow.text.find(p.hint) == std::string::npos)
                continue;
            for (auto it = std::sregex_iterator(shadow.text.begin(),
                                                shadow.text.end(), p.re);
                 it != std::sregex_iterator(); ++it) {
                if (it->length(0) <= 0) continue;
                const auto a = static_cast<std::size_t>(it->position(0));
                spans.emplace_back(a, a + static_cast<std::size_t>(it->length(0)));
            }
        }
        if (spans.empty()) return cur;
        std::sort(spans.begin(), spans.end());
        std::vector<std::pair<std::size_t, std::size_t>> merged;
        for (const auto& s : spans) {
            if (!merged.empty() && s.first <= merged.back().second)
                merged.back().second = std::max(merged.back().second, s.second);
            else
                merged.push_back(s);
        }
        for (auto it = merged.rbegin(); it != merged.rend(); ++it) {
            const std::size_t raw_begin = shadow.src[it->first];
            const std::size_t raw_end = it->second < shadow.text.size()
                                            ? shadow.src[it->second]
                                            : cur.size();
            cur.erase(raw_begin, raw_end - raw_begin);
        }
    }
    fail("masking did not reach a fixpoint after 16 passes");
}

class Stopwords {
public:
    Stopwords() = default;

    explicit Stopwords(const std::vector<std::string>& words) {
        for (const auto& w : words) {
            const std::string n = normalize_text(w);
            if (!n.empty()) set_.insert(n);
        }
    }

    bool contains(const std::string& token) const {
        return set_.count(token) != 0;
    }
    std::size_t size() const { return set_.size(); }

    /// One token per line, UTF-8; '#' starts a comment line.
    static Stopwords load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail("cannot open stopword file '", path, "'");
        std::vector<std::string> words;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            words.push_back(line);
        }
        return Stopwords(words);
    }

    static const std::vector<std::string>& default_portuguese_list() {
        static const std::vector<std::string> list = {
            "a", "o", "e", "de", "da", "do", "das", "dos", "em", "no", "na",
            "nos", "nas", "um", "uma", "uns", "umas", "que", "com", "por",
            "para", "mas", "se", "ao", "aos", "as", "os", "nao", "mais", "ja",
            "foi", "ser", "sao", "tem", "ha", "sua", "seu", "suas", "seus",
            "pelo", "pela", "pelos", "pelas", "isso", "isto", "ele", "ela",
            "eles", "elas", "entre", "depois", "antes", "sem", "mesmo",
            "mesma", "quando", "tambem", "so", "ate", "era", "eram", "sendo",
            "sido", "esta", "estao", "este", "estes", "estas", "esse", "essa",
            "esses", "essas", "aquele", "aquela", "aquilo", "eu", "tu",
            "voce", "voces", "vos", "me", "te", "lhe", "lhes", "meu", "minha",
            "teu", "tua", "nosso", "nossa", "dele", "dela", "deles", "delas",
            "num", "numa", "qual", "quais", "quem", "onde", "como", "porque",
            "pois", "ou", "nem", "seja", "sejam", "ter", "tinha", "tinham",
            "tendo", "tive", "teve", "sera", "serao", "seria", "seriam",
            "estar", "estava", "estavam", "estou", "estamos", "muito",
            "muita", "muitos", "muitas", "pouco", "pouca", "poucos",
            "poucas", "todo", "toda", "todos", "todas", "outro", "outra",
            "outros", "outras", "qualquer", "cada", "tal", "tais", "apos",
            "sob", "sobre", "contra", "desde", "durante", "perante", "ainda",
            "apenas", "assim", "entao", "la", "aqui", "ali", "fosse",
            "fossem", "for", "forem", "houve", "haja", "hajam", "seu", "sim",
        };
        return list;
    }

    static Stopwords default_portuguese() {
        return Stopwords(default_portuguese_list());
    }

private:
    std::unordered_set<std::string> set_;
};

/// mask -> normalize -> tokenize, without stopword removal. This is the word
/// universe perturbation-based explanations operate on.
inline std::vector<std::string> tokens_unfiltered(std::string_view raw,
                                                  const MaskingRules& rules) {
    const std::string masked = mask_citations_and_dates(raw, rules);
    auto tokens = tokenize(normalize_text(masked));
    // Tokenization can splice text that the patterns were written to catch
    // (e.g. a citation split by punctuation), so the token stream itself is
    // masked once more. The first pass leaves the hints cold, so this is
    // nearly free on clean text.
    const std::string joined = join_tokens(tokens);
    const std::string remasked = mask_citations_and_dates(joined, rules);
    if (remasked != joined) tokens = tokenize(remasked);
    return tokens;
}

inline TokenStream drop_stopwords(std::vector<std::string> tokens,
                                  const Stopwords& stopwords) {
    TokenStream out;
    out.reserve(tokens.size());
    for (auto& t : tokens)
        if (!stopwords.contains(t)) out.push_back(std::move(t));
    return out;
}

/// Full preprocessing pipeline: mask citations/dates, normalize, tokenize,
/// drop stopwords.
inline TokenStream preprocess(std::string_view raw, const Stopwords& stopwords,
                              const MaskingRules& rules) {
    return drop_stopwords(tokens_unfiltered(raw, rules), stopwords);
}

}  // namespace scr
