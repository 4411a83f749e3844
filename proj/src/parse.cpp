#include "forensics/parse.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <regex>
#include <sstream>

namespace forensics {

using nlohmann::json;

// Defined in the generated lexicon_data.cpp.
extern const char* const kBuiltinLexiconJson;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
        s.replace(pos, from.size(), to);
    return s;
}

// Typographic quotes and dashes to ASCII.
std::string ascii_punct(std::string s) {
    s = replace_all(std::move(s), "\xE2\x80\x99", "'");
    s = replace_all(std::move(s), "\xE2\x80\x98", "'");
    s = replace_all(std::move(s), "\xE2\x80\x9C", "\"");
    s = replace_all(std::move(s), "\xE2\x80\x9D", "\"");
    s = replace_all(std::move(s), "\xE2\x80\x93", "-");
    s = replace_all(std::move(s), "\xE2\x80\x94", "-");
    return s;
}

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (std::any_of(cur.begin(), cur.end(), [](unsigned char c) { return std::isalnum(c); }))
            out.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '\'' || c == '-')
            cur.push_back(static_cast<char>(std::tolower(c)));
        else
            flush();
    }
    flush();
    return out;
}

std::string collapse_spaces(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            space = true;
        } else {
            if (space && !out.empty()) out.push_back(' ');
            space = false;
            out.push_back(c);
        }
    }
    return out;
}

std::vector<std::string> string_list(const json& j, const char* key) {
    std::vector<std::string> out;
    for (const auto& v : j.at(key)) out.push_back(lower(v.get<std::string>()));
    return out;
}

}  // namespace

// ---------------------------------------------------------------- lexicon

Lexicon Lexicon::from_json(const json& j) {
    Lexicon lx;
    lx.refusals = string_list(j, "refusals");
    lx.affirmations = string_list(j, "affirmations");
    lx.negations = string_list(j, "negations");
    return lx;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(read_file_bytes(path.string())));
    } catch (const json::exception& e) {
        throw ConfigError("lexicon " + path.string() + ": " + e.what());
    }
}

const Lexicon& Lexicon::builtin() {
    static const Lexicon lx = from_json(json::parse(kBuiltinLexiconJson));
    return lx;
}

// ---------------------------------------------------------------- verdict

Verdict parse_verdict(std::string_view raw_text, const Lexicon& lexicon, ParseCounters* counters) {
    const std::string text = collapse_spaces(lower(ascii_punct(normalize_markdown(raw_text))));
    auto reject = [&](bool refusal) {
        if (counters) (refusal ? counters->refusals : counters->unparseable_verdicts).fetch_add(1);
        return Verdict::Reject;
    };
    if (text.empty()) return reject(false);
    for (const auto& phrase : lexicon.refusals)
        if (!phrase.empty() && text.find(phrase) != std::string::npos) return reject(true);

    struct Entry {
        std::vector<std::string> tokens;
        Verdict verdict;
    };
    std::vector<Entry> entries;
    for (const auto& w : lexicon.affirmations) entries.push_back({word_tokens(w), Verdict::Yes});
    for (const auto& w : lexicon.negations) entries.push_back({word_tokens(w), Verdict::No});
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.tokens.size() > b.tokens.size();
    });

    const auto tokens = word_tokens(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (const auto& e : entries) {
            if (e.tokens.empty() || i + e.tokens.size() > tokens.size()) continue;
            if (std::equal(e.tokens.begin(), e.tokens.end(), tokens.begin() + static_cast<long>(i)))
                return e.verdict;
        }
    }
    return reject(false);
}

// ---------------------------------------------------------------- markdown

std::string normalize_markdown(std::string_view text) {
    std::string s = replace_all(std::string(text), "**", "");
    s = replace_all(std::move(s), "__", "");
    std::istringstream in(s);
    std::string line;
    std::string out;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        std::size_t hashes = 0;
        while (hashes < t.size() && t[hashes] == '#') ++hashes;
        if (hashes > 0) t = trim(t.substr(hashes));
        t = collapse_spaces(t);
        if (t.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out += t;
    }
    return out;
}

// ---------------------------------------------------------------- report

namespace {

enum class Section { Location, Contents, Details, Method, None };

constexpr std::size_t kSectionCount = 4;

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double similarity(std::string_view a, std::string_view b) {
    const auto longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

// Lowercase letters and single spaces only.
std::string label_key(std::string_view s) {
    std::string out;
    for (unsigned char c : s) out.push_back(std::isalpha(c) ? static_cast<char>(std::tolower(c)) : ' ');
    return collapse_spaces(out);
}

const std::array<std::vector<std::string_view>, kSectionCount>& section_aliases() {
    static const std::array<std::vector<std::string_view>, kSectionCount> kAliases{{
        {"location of the tampering area", "location of the tampered area", "location",
         "tampering location", "localization", "tampered region location"},
        {"contents of the tampered area", "contents of the tampering area", "contents", "content",
         "description", "tampered content"},
        {"visible details in the tampered area", "visible details", "details", "visible detail",
         "reasoning", "evidence"},
        {"generation method and type of the image", "generation method and type", "generation method",
         "method", "tracing", "type of the image", "forgery type", "type"},
    }};
    return kAliases;
}

// Keyword rule for `Label:` lines; fuzzy alias match for bare lines.
Section classify_label(const std::string& key, bool has_colon) {
    const auto words = static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ') + 1);
    if (key.empty() || words > 9) return Section::None;
    if (has_colon) {
        auto has = [&](std::string_view w) { return key.find(w) != std::string::npos; };
        if (has("absolute") || has("relative")) return Section::Location;
        if (has("detail") || has("reasoning") || has("evidence")) return Section::Details;
        if (has("content") || has("description")) return Section::Contents;
        if (has("location") || has("localization") || has("localisation")) return Section::Location;
        if (has("method") || has("tracing") || has("type")) return Section::Method;
    }
    const auto& aliases = section_aliases();
    Section best = Section::None;
    double best_score = has_colon ? 0.8 : 0.85;
    for (std::size_t s = 0; s < kSectionCount; ++s) {
        for (auto alias : aliases[s]) {
            const double score = similarity(key, alias);
            if (score >= best_score) {
                best_score = score;
                best = static_cast<Section>(s);
            }
        }
    }
    return best;
}

struct Line {
    std::string text;       // markers stripped
    bool bullet = false;    // started with a list marker or number
    std::string label;      // text before ':' (if any)
    std::string rest;       // text after ':'
    bool has_colon = false;
};

Line split_line(const std::string& raw) {
    static const std::regex kMarker(R"(^\s*(?:[-*+>]|\(?\d+[.)]|\(?[ivx]+[.)]|[a-d][.)])\s+)",
                                    std::regex::icase);
    Line l;
    std::string t = trim(raw);
    std::smatch m;
    if (std::regex_search(t, m, kMarker)) {
        l.bullet = true;
        t = trim(t.substr(static_cast<std::size_t>(m.length(0))));
    }
    // A bullet may start with the UTF-8 bullet character.
    if (t.rfind("\xE2\x80\xA2", 0) == 0) {
        l.bullet = true;
        t = trim(t.substr(3));
    }
    l.text = t;
    if (auto colon = t.find(':'); colon != std::string::npos) {
        l.has_colon = true;
        l.label = trim(t.substr(0, colon));
        l.rest = trim(t.substr(colon + 1));
    } else {
        l.label = t;
    }
    return l;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        if (l.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out += l;
    }
    return out;
}

std::optional<std::size_t> first_match(const std::string& text, const std::regex& re) {
    std::smatch m;
    if (std::regex_search(text, m, re)) return static_cast<std::size_t>(m.position(0));
    return std::nullopt;
}

}  // namespace

bool AnalysisReport::missing(std::string_view section) const {
    const std::string tag = "MissingSection(" + std::string(section) + ")";
    return std::find(diagnostics.begin(), diagnostics.end(), tag) != diagnostics.end();
}

std::string AnalysisReport::location_text() const {
    std::string out;
    if (!location_absolute.empty()) out += "Absolute position: " + location_absolute;
    if (!location_relative.empty()) {
        if (!out.empty()) out += "\n";
        out += "Relative position: " + location_relative;
    }
    return out;
}

void to_json(json& j, const AnalysisReport& r) {
    j = json{{"location_absolute", r.location_absolute},
             {"location_relative", r.location_relative},
             {"contents", r.contents},
             {"visible_details", r.visible_details},
             {"method", to_string(r.method)},
             {"forgery_type", to_string(r.forgery_type)},
             {"diagnostics", r.diagnostics}};
}

void from_json(const json& j, AnalysisReport& r) {
    r.location_absolute = j.at("location_absolute").get<std::string>();
    r.location_relative = j.at("location_relative").get<std::string>();
    r.contents = j.at("contents").get<std::string>();
    r.visible_details = j.at("visible_details").get<std::vector<std::string>>();
    r.method = parse_method(j.at("method").get<std::string>()).value_or(Method::Unknown);
    r.forgery_type =
        parse_forgery_type(j.at("forgery_type").get<std::string>()).value_or(ForgeryType::Unknown);
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
}

AnalysisReport parse_report(std::string_view raw_text) {
    const std::string normalized = normalize_markdown(ascii_punct(std::string(raw_text)));

    struct Collected {
        bool seen = false;
        std::vector<Line> lines;
    };
    std::array<Collected, kSectionCount> sections;
    Section current = Section::None;

    std::istringstream in(normalized);
    std::string raw;
    while (std::getline(in, raw)) {
        Line line = split_line(raw);
        const Section s = classify_label(label_key(line.label), line.has_colon);
        const bool location_sublabel =
            s == Section::Location && line.has_colon &&
            (label_key(line.label).find("absolute") != std::string::npos ||
             label_key(line.label).find("relative") != std::string::npos);

        if (s != Section::None && !(location_sublabel && current == Section::Location) &&
            s != current) {
            current = s;
            auto& sec = sections[static_cast<std::size_t>(s)];
            sec.seen = true;
            if (location_sublabel) {
                sec.lines.push_back(line);
            } else if (line.has_colon && !line.rest.empty()) {
                Line body = split_line(line.rest);
                sec.lines.push_back(body);
            }
            continue;
        }
        if (current != Section::None) sections[static_cast<std::size_t>(current)].lines.push_back(line);
    }

    AnalysisReport report;
    for (std::size_t i = 0; i < kSectionCount; ++i)
        if (!sections[i].seen)
            report.diagnostics.push_back("MissingSection(" + std::string(kReportSections[i]) + ")");

    // Location: split on absolute/relative sub-labels when present.
    {
        // "Absolute: ... Relative: ..." on one line is split into two lines first.
        static const std::regex kInlineSub(R"(\b(?:absolute|relative)(?:\s+position)?\s*:)", std::regex::icase);
        std::vector<Line> lines;
        for (const auto& l : sections[static_cast<std::size_t>(Section::Location)].lines) {
            std::vector<std::size_t> cuts;
            for (auto it = std::sregex_iterator(l.text.begin(), l.text.end(), kInlineSub);
                 it != std::sregex_iterator(); ++it)
                if (it->position(0) > 0) cuts.push_back(static_cast<std::size_t>(it->position(0)));
            if (cuts.empty()) {
                lines.push_back(l);
                continue;
            }
            cuts.push_back(l.text.size());
            std::size_t begin = 0;
            for (std::size_t cut : cuts) {
                const std::string piece = trim(l.text.substr(begin, cut - begin));
                if (!piece.empty()) lines.push_back(split_line(piece));
                begin = cut;
            }
        }
        std::vector<std::string> absolute, relative, untagged;
        std::vector<std::string>* target = &untagged;
        for (const auto& l : lines) {
            const std::string key = label_key(l.label);
            if (l.has_colon && key.find("absolute") != std::string::npos && key.size() < 40) {
                target = &absolute;
                target->push_back(l.rest);
            } else if (l.has_colon && key.find("relative") != std::string::npos && key.size() < 40) {
                target = &relative;
                target->push_back(l.rest);
            } else {
                target->push_back(l.text);
            }
        }
        if (absolute.empty() && relative.empty()) {
            report.location_absolute = join_lines(untagged);
        } else {
            if (!untagged.empty()) absolute.insert(absolute.begin(), untagged.begin(), untagged.end());
            report.location_absolute = join_lines(absolute);
            report.location_relative = join_lines(relative);
        }
    }

    {
        std::vector<std::string> texts;
        for (const auto& l : sections[static_cast<std::size_t>(Section::Contents)].lines)
            texts.push_back(l.text);
        report.contents = join_lines(texts);
    }

    // Visible details: one cue per bullet, else one per sentence.
    {
        const auto& lines = sections[static_cast<std::size_t>(Section::Details)].lines;
        const bool bulleted = std::any_of(lines.begin(), lines.end(), [](const Line& l) { return l.bullet; });
        for (const auto& l : lines) {
            if (l.text.empty()) continue;
            if (bulleted || lines.size() > 1) {
                if (bulleted && !l.bullet && !report.visible_details.empty())
                    report.visible_details.back() += " " + l.text;
                else
                    report.visible_details.push_back(l.text);
                continue;
            }
            std::string cue;
            for (std::size_t i = 0; i < l.text.size(); ++i) {
                cue.push_back(l.text[i]);
                const bool end = (l.text[i] == '.' || l.text[i] == '!' || l.text[i] == '?') &&
                                 (i + 1 == l.text.size() || l.text[i + 1] == ' ');
                if (end) {
                    if (!trim(cue).empty()) report.visible_details.push_back(trim(cue));
                    cue.clear();
                }
            }
            if (!trim(cue).empty()) report.visible_details.push_back(trim(cue));
        }
    }

    // Method and forgery type: first-mentioned keyword inside the section.
    {
        std::vector<std::string> texts;
        for (const auto& l : sections[static_cast<std::size_t>(Section::Method)].lines) texts.push_back(l.text);
        const std::string text = lower(join_lines(texts));

        static const std::regex kGan(R"(\b(?:style)?gans?\b|generative adversarial)");
        static const std::regex kDiffusion(R"(\bdiffusion\b)");
        static const std::regex kGlobal(R"(\bglobal(?:ly)?\b)");
        static const std::regex kLocal(R"(\blocal(?:ly)?\b)");

        auto pick = [&](const std::regex& a, const std::regex& b, const char* what) -> int {
            auto pa = first_match(text, a);
            auto pb = first_match(text, b);
            if (pa && pb) {
                report.diagnostics.push_back(std::string("Ambiguous(") + what + ")");
                return *pa < *pb ? 1 : 2;
            }
            return pa ? 1 : pb ? 2 : 0;
        };
        switch (pick(kGan, kDiffusion, "method")) {
            case 1: report.method = Method::GAN; break;
            case 2: report.method = Method::Diffusion; break;
            default: report.method = Method::Unknown;
        }
        switch (pick(kGlobal, kLocal, "forgery_type")) {
            case 1: report.forgery_type = ForgeryType::Global; break;
            case 2: report.forgery_type = ForgeryType::Local; break;
            default: report.forgery_type = ForgeryType::Unknown;
        }
    }
    return report;
}

// ---------------------------------------------------------------- judge

JudgeSubScores parse_judge_scores(std::string_view raw_text, ParseCounters* counters) {
    std::string text = lower(ascii_punct(normalize_markdown(raw_text)));
    // Scale descriptions would otherwise be read as scores.
    static const std::regex kScale(R"(\(?\b0\s*(?:-|to)\s*5\b(?:\s*scale)?\)?)");
    text = std::regex_replace(text, kScale, " ");

    struct Mention {
        std::size_t begin, end;
        std::size_t rubric;
    };
    static const std::array<std::regex, 4> kRubrics{
        std::regex(R"(\babsolute(?:\s+position)?(?:\s+accuracy)?\b)"),
        std::regex(R"(\brelative(?:\s+position)?(?:\s+accuracy)?\b)"),
        std::regex(R"(\breadability\b)"),
        std::regex(R"(\bcompleteness\b)"),
    };
    std::vector<Mention> mentions;
    for (std::size_t r = 0; r < kRubrics.size(); ++r) {
        for (auto it = std::sregex_iterator(text.begin(), text.end(), kRubrics[r]);
             it != std::sregex_iterator(); ++it)
            mentions.push_back({static_cast<std::size_t>(it->position(0)),
                                static_cast<std::size_t>(it->position(0) + it->length(0)), r});
    }
    std::sort(mentions.begin(), mentions.end(),
              [](const Mention& a, const Mention& b) { return a.begin < b.begin; });

    static const std::regex kNumber(R"([-+]?\d+(?:\.\d+)?)");
    std::array<std::optional<double>, 4> found;
    for (std::size_t i = 0; i < mentions.size(); ++i) {
        const auto& m = mentions[i];
        if (found[m.rubric]) continue;
        const std::size_t stop = i + 1 < mentions.size() ? mentions[i + 1].begin : text.size();
        if (stop <= m.end) continue;
        const std::string window = text.substr(m.end, stop - m.end);
        std::smatch nm;
        if (std::regex_search(window, nm, kNumber)) found[m.rubric] = std::stod(nm.str(0));
    }

    JudgeSubScores out;
    for (std::size_t r = 0; r < 4; ++r) {
        if (!found[r])
            throw JudgeParseError("judge output has no score for " + std::string(kRubricNames[r]));
        double v = *found[r];
        if (v < 0.0 || v > 5.0) {
            const double clamped = std::clamp(v, 0.0, 5.0);
            std::ostringstream note;
            note << "Clamped(" << kRubricNames[r] << ": " << v << " -> " << clamped << ")";
            out.diagnostics.push_back(note.str());
            if (counters) counters->judge_clamps.fetch_add(1);
            v = clamped;
        }
        out.scores[r] = v;
    }
    return out;
}

}  // namespace forensics
