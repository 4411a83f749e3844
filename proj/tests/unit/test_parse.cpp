#include <doctest.h>

#include "corpus.hpp"
#include "forensics/parse.hpp"

using namespace forensics;

namespace {

void report_failures(const testing::CorpusResult& r) {
    for (const auto& f : r.failures) MESSAGE(f);
}

}  // namespace

TEST_CASE("verdict corpus agrees with hand labels") {
    const auto r = testing::check_verdict_corpus();
    report_failures(r);
    CHECK(r.total >= 30);
    CHECK(r.ok());
}

TEST_CASE("report corpus agrees with hand labels") {
    const auto r = testing::check_report_corpus();
    report_failures(r);
    CHECK(r.total >= 20);
    CHECK(r.ok());
}

TEST_CASE("judge corpus agrees with hand labels") {
    const auto r = testing::check_judge_corpus();
    report_failures(r);
    CHECK(r.total >= 20);
    CHECK(r.ok());
}

TEST_CASE("verdict parsing is total and counts what it drops") {
    ParseCounters counters;
    CHECK(parse_verdict("", Lexicon::builtin(), &counters) == Verdict::Reject);
    CHECK(parse_verdict("a picture of a tree", Lexicon::builtin(), &counters) == Verdict::Reject);
    CHECK(parse_verdict("I'm sorry, I can't help.", Lexicon::builtin(), &counters) == Verdict::Reject);
    CHECK(counters.unparseable_verdicts.load() == 2);
    CHECK(counters.refusals.load() == 1);
    std::string junk;
    for (int i = 0; i < 256; ++i) junk.push_back(static_cast<char>(i));
    CHECK_NOTHROW(parse_verdict(junk));
}

TEST_CASE("first polarity word decides and longer phrases win") {
    CHECK(parse_verdict("Yes. It is not real.") == Verdict::Yes);
    CHECK(parse_verdict("No - although parts look edited, it is authentic.") == Verdict::No);
    CHECK(parse_verdict("It is not fake.") == Verdict::No);
    CHECK(parse_verdict("It is not real.") == Verdict::Yes);
    CHECK(parse_verdict("Nope") == Verdict::Reject);  // whole tokens only
    CHECK(parse_verdict("Yesterday I saw it") == Verdict::Reject);
}

TEST_CASE("custom lexicon") {
    auto lex = Lexicon::from_json(nlohmann::json::parse(
        R"({"refusals":["pass"],"affirmations":["oui"],"negations":["non"]})"));
    CHECK(parse_verdict("Oui.", lex) == Verdict::Yes);
    CHECK(parse_verdict("non", lex) == Verdict::No);
    CHECK(parse_verdict("I pass", lex) == Verdict::Reject);
    CHECK(parse_verdict("Yes", lex) == Verdict::Reject);
    const auto file = Lexicon::load(testing::data_dir() / "lexicon.json");
    CHECK(file.affirmations == Lexicon::builtin().affirmations);
    CHECK(file.refusals == Lexicon::builtin().refusals);
}

TEST_CASE("flag example from the bundled mock script") {
    std::string text;
    for (const auto& j : testing::read_jsonl(testing::mock10_dir() / "mock_script.jsonl"))
        if (j["sample_id"] == "as_001" && j["stage"] == "analyze") text = j["text"];
    REQUIRE_FALSE(text.empty());
    const auto r = parse_report(text);
    CHECK(r.method == Method::Diffusion);
    CHECK(r.forgery_type == ForgeryType::Local);
    CHECK(testing::contains_icase(r.contents, "flag"));
    CHECK(r.diagnostics.empty());
    CHECK(r.has_location());
    CHECK(r.visible_details.size() == 3);
}

TEST_CASE("missing details section is reported") {
    const auto r = parse_report(
        "Location of the Tampering Area: Absolute: top. Relative: sky.\n"
        "Contents of the Tampered Area: a moon.\n"
        "Generation Method and Type of the Image: Diffusion, local.");
    CHECK(r.missing("Visible Details in the Tampered Area"));
    CHECK_FALSE(r.missing("Contents of the Tampered Area"));
    CHECK(r.visible_details.empty());
}

TEST_CASE("method mentions of both families are flagged ambiguous") {
    const auto r = parse_report(
        "Location of the Tampering Area: center\nContents of the Tampered Area: a cup\n"
        "Visible Details in the Tampered Area: blur\n"
        "Generation Method and Type of the Image: Diffusion rather than a GAN; local.");
    CHECK(r.method == Method::Diffusion);
    bool flagged = false;
    for (const auto& d : r.diagnostics) flagged |= d.find("Ambiguous") != std::string::npos;
    CHECK(flagged);
}

TEST_CASE("report parsing is invariant under markdown normalization") {
    for (const auto& c : testing::read_jsonl(testing::corpus_dir() / "reports.jsonl")) {
        const auto text = c["raw_text"].get<std::string>();
        CHECK(parse_report(text) == parse_report(normalize_markdown(text)));
    }
}

TEST_CASE("report json round trip") {
    const auto r = parse_report(testing::read_jsonl(testing::corpus_dir() / "reports.jsonl").at(0)["raw_text"].get<std::string>());
    CHECK(nlohmann::json(r).get<AnalysisReport>() == r);
    CHECK(r.location_text().find("Absolute position:") == 0);
}

TEST_CASE("normalize_markdown") {
    CHECK(normalize_markdown("## **Bold**   heading\n\n  __x__  ") == "Bold heading\nx");
}

TEST_CASE("judge parsing clamps and counts") {
    ParseCounters counters;
    auto s = parse_judge_scores("Absolute Position Accuracy: 9\nRelative Position Accuracy: 2\nReadability: 3\nCompleteness: 4",
                                &counters);
    CHECK(s.scores == std::array<double, 4>{5, 2, 3, 4});
    CHECK(counters.judge_clamps.load() == 1);
    REQUIRE(s.diagnostics.size() == 1);
    CHECK(s.diagnostics[0].find("Clamped") == 0);
    CHECK_THROWS_AS(parse_judge_scores(""), JudgeParseError);
}
