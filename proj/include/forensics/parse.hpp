#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "forensics/common.hpp"

namespace forensics {

/// Polarity word lists, read from data/lexicon.json. Polarity is relative
/// to the question "is this image fake?": affirmations map to Yes.
struct Lexicon {
    std::vector<std::string> refusals;
    std::vector<std::string> affirmations;
    std::vector<std::string> negations;

    static Lexicon from_json(const nlohmann::json& j);
    static Lexicon load(const std::filesystem::path& path);
    /// The lexicon compiled into the library (same content as data/lexicon.json).
    static const Lexicon& builtin();
};

struct ParseCounters {
    std::atomic<std::size_t> unparseable_verdicts{0};
    std::atomic<std::size_t> refusals{0};
    std::atomic<std::size_t> judge_clamps{0};
};

/// Total over strings: empty text or any refusal phrase -> Reject; else the
/// first lexicon word (longest phrase wins at a position) decides; text
/// with no polarity word -> Reject, counted as unparseable.
Verdict parse_verdict(std::string_view raw_text, const Lexicon& lexicon = Lexicon::builtin(),
                      ParseCounters* counters = nullptr);

inline constexpr std::array<std::string_view, 4> kReportSections{
    "Location of the Tampering Area", "Contents of the Tampered Area",
    "Visible Details in the Tampered Area", "Generation Method and Type of the Image"};

struct AnalysisReport {
    std::string location_absolute;
    std::string location_relative;
    std::string contents;
    std::vector<std::string> visible_details;
    Method method = Method::Unknown;
    ForgeryType forgery_type = ForgeryType::Unknown;
    /// "MissingSection(<name>)" entries and ambiguity notes.
    std::vector<std::string> diagnostics;

    bool has_location() const { return !location_absolute.empty() || !location_relative.empty(); }
    bool missing(std::string_view section) const;
    /// Combined absolute + relative text, as handed to the judge.
    std::string location_text() const;
    bool operator==(const AnalysisReport&) const = default;
};

void to_json(nlohmann::json& j, const AnalysisReport& r);
void from_json(const nlohmann::json& j, AnalysisReport& r);

/// Extracts the four labeled Stage-2 sections. Tolerates markdown headings,
/// numbered and bulleted lists, bold labels and any section order. Never
/// throws; absent sections are listed in `diagnostics`.
AnalysisReport parse_report(std::string_view raw_text);

/// Strips bold/italic markers and heading hashes, trims each line, collapses
/// inner whitespace and drops blank lines. Parsers are invariant under it.
std::string normalize_markdown(std::string_view text);

inline constexpr std::array<std::string_view, 4> kRubricNames{
    "Absolute Position Accuracy", "Relative Position Accuracy", "Readability", "Completeness"};

struct JudgeSubScores {
    std::array<double, 4> scores{};
    std::vector<std::string> diagnostics;  // clamp notes
};

/// Finds the four rubric names and the first number after each; clamps to
/// [0,5]. Throws JudgeParseError when any rubric has no score.
JudgeSubScores parse_judge_scores(std::string_view raw_text, ParseCounters* counters = nullptr);

}  // namespace forensics
