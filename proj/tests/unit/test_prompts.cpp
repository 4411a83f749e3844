#include <doctest.h>

#include <map>

#include "forensics/dataset.hpp"
#include "forensics/experiments.hpp"
#include "forensics/prompts.hpp"
#include "test_support.hpp"

using namespace forensics;

namespace {

std::vector<Exemplar> numbered_pool(int n) {
    std::vector<Exemplar> pool;
    for (int i = 0; i < n; ++i) pool.push_back({std::to_string(i), "img.png", "No.", Label::Real});
    return pool;
}

std::vector<int> ids(const std::vector<Exemplar>& ex) {
    std::vector<int> out;
    for (const auto& e : ex) out.push_back(std::stoi(e.id));
    return out;
}

ImageSample mock_sample(const std::string& id) {
    static const Manifest m = load_manifest(testing::mock10_dir() / "manifest.jsonl");
    return *m.find(id);
}

}  // namespace

TEST_CASE("std::mt19937_64 matches the reference generator") {
    // 10000th output for the default seed, as fixed by the C++ standard.
    std::mt19937_64 e;
    e.discard(9999);
    CHECK(e() == 9981545732273789042ULL);
    // Seeds 1..3, cross-checked against an independent implementation.
    CHECK(std::mt19937_64(1)() == 2469588189546311528ULL);
    CHECK(std::mt19937_64(2)() == 16668552215174154828ULL);
    CHECK(std::mt19937_64(3)() == 10307413207671831467ULL);
}

TEST_CASE("sample_shots reproduces the enumerated draws") {
    // First draw is the first engine output mod 10 (no rejection at n=10
    // for these seeds); the rest follow the partial Fisher-Yates swaps.
    const auto pool = numbered_pool(10);
    CHECK(ids(sample_shots({4, pool, 1})) == std::vector<int>{8, 7, 4, 0});
    CHECK(ids(sample_shots({4, pool, 2})) == std::vector<int>{8, 4, 7, 5});
    CHECK(ids(sample_shots({4, pool, 3})) == std::vector<int>{7, 8, 5, 2});
    CHECK(ids(sample_shots({10, pool, 1})) == std::vector<int>{8, 7, 4, 0, 2, 9, 6, 1, 3, 5});
    CHECK(ids(sample_shots({1, pool, 3})) == std::vector<int>{7});
}

TEST_CASE("sample_shots contract") {
    const auto pool = numbered_pool(10);
    CHECK(sample_shots({0, pool, 99}).empty());
    CHECK_THROWS_AS(sample_shots({11, pool, 1}), KTooLarge);
    CHECK_THROWS_AS(sample_shots({-1, pool, 1}), KTooLarge);
    CHECK(ids(sample_shots({4, pool, 7})) == ids(sample_shots({4, pool, 7})));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto v = ids(sample_shots({4, pool, seed}));
        std::sort(v.begin(), v.end());
        CHECK(std::adjacent_find(v.begin(), v.end()) == v.end());
    }
}

TEST_CASE("sample_shots is close to uniform over exemplars") {
    const auto pool = numbered_pool(10);
    std::map<int, int> counts;
    const int n = 20000;
    for (int seed = 0; seed < n; ++seed) counts[ids(sample_shots({1, pool, static_cast<std::uint64_t>(seed)}))[0]]++;
    // Each count ~ Binomial(20000, 0.1): sd ~ 42; allow 5 sd.
    for (int i = 0; i < 10; ++i) CHECK(std::abs(counts[i] - n / 10) < 212);
}

TEST_CASE("bounded_index stays in range and unit_double in [0,1)") {
    std::mt19937_64 e(5);
    for (int i = 0; i < 1000; ++i) {
        CHECK(bounded_index(e, 7) < 7);
        const double u = unit_double(e);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("prompt text parsing") {
    auto spec = parse_prompt_text("[goal]\nFind fakes.\n\n[constraint]\nYes or no.\n[user]\nFake?\n", Stage::Detect, 2);
    REQUIRE(spec.blocks.size() == 2);
    CHECK(spec.blocks[0].kind == PrincipleKind::Goal);
    CHECK(spec.user_instruction == "Fake?");
    CHECK(spec.has(PrincipleKind::Constraint));
    CHECK_FALSE(spec.has(PrincipleKind::Profile));
    CHECK(spec.system_text() == "# Goal\nFind fakes.\n\n# Constraint\nYes or no.");
    CHECK_NOTHROW(spec.validate());

    CHECK_THROWS_AS(parse_prompt_text("[bogus]\nx\n[user]\ny", Stage::Detect), ConfigError);
    CHECK_THROWS_AS(parse_prompt_text("stray\n[goal]\nx\n[user]\ny", Stage::Detect), ConfigError);
    CHECK_THROWS_AS(parse_prompt_text("[goal]\nx\n", Stage::Detect), ConfigError);
    CHECK_THROWS_AS(parse_prompt_text("[constraint]\nx\n[goal]\ny\n[user]\nz", Stage::Detect), ConfigError);
}

TEST_CASE("bundled prompt ladder grows strictly and keeps the question fixed") {
    PromptLibrary lib(testing::data_dir() / "prompts");
    std::size_t prev = 0;
    std::string question;
    for (int rank = 1; rank <= 5; ++rank) {
        auto spec = lib.detect(rank);
        CHECK_NOTHROW(spec.validate());
        CHECK(spec.ladder_rank == rank);
        CHECK(static_cast<int>(spec.blocks.size()) == rank);
        const auto tokens = prompt_token_count(spec);
        CHECK(tokens > prev);
        prev = tokens;
        if (rank == 1) question = spec.user_instruction;
        CHECK(spec.user_instruction == question);
    }
    CHECK(lib.detect(5).has(PrincipleKind::Style));
    CHECK_THROWS(lib.detect(6));
    CHECK_NOTHROW(lib.analyze().validate());
    CHECK(lib.judge().user_instruction.find("{location}") != std::string::npos);
}

TEST_CASE("build_prompt injects exemplars as user/assistant turns") {
    const auto pool = load_exemplar_pool(testing::data_dir() / "exemplars" / "detect_pool.jsonl");
    REQUIRE(pool.size() == 10);
    auto spec = PromptLibrary(testing::data_dir() / "prompts").detect(5);
    const auto target = mock_sample("as_001");

    auto zero = build_prompt(spec, {0, pool, 1}, target);
    REQUIRE(zero.size() == 2);
    CHECK(zero[0].role == Role::System);
    CHECK(zero[1].role == Role::User);
    REQUIRE(zero[1].images.size() == 1);
    CHECK(zero[1].images[0].path == target.image_path);

    auto shots = build_prompt(spec, {2, pool, 1}, target);
    REQUIRE(shots.size() == 6);
    const auto drawn = sample_shots({2, pool, 1});
    for (int i = 0; i < 2; ++i) {
        CHECK(shots[1 + 2 * i].role == Role::User);
        CHECK(shots[1 + 2 * i].images.at(0).path == drawn[i].image_path);
        CHECK(shots[2 + 2 * i].role == Role::Assistant);
        CHECK(shots[2 + 2 * i].text == drawn[i].assistant_answer);
        CHECK(shots[2 + 2 * i].images.empty());
    }
    CHECK(shots.back().images.at(0).path == target.image_path);
    CHECK(prompt_fingerprint(shots) != prompt_fingerprint(zero));
    CHECK(prompt_fingerprint(shots) == prompt_fingerprint(build_prompt(spec, {2, pool, 1}, target)));
    CHECK_THROWS_AS(build_prompt(spec, {11, pool, 1}, target), KTooLarge);
}

TEST_CASE("prompt fingerprint follows image content") {
    auto spec = PromptLibrary(testing::data_dir() / "prompts").detect(1);
    auto a = build_prompt(spec, {}, mock_sample("cal_001"));
    auto b = build_prompt(spec, {}, mock_sample("cal_002"));
    CHECK(prompt_fingerprint(a) != prompt_fingerprint(b));
}

TEST_CASE("judge prompt carries forged, original and mask images") {
    auto spec = PromptLibrary(testing::data_dir() / "prompts").judge();
    const auto local = mock_sample("as_001");
    auto msgs = build_judge_prompt(spec, "Absolute position: lower center", local);
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[1].text.find("Absolute position: lower center") != std::string::npos);
    CHECK(msgs[1].text.find("{location}") == std::string::npos);
    REQUIRE(msgs[1].images.size() == 3);
    CHECK(msgs[1].images[0].path == local.image_path);
    CHECK(msgs[1].images[1].path == *local.gt_path);
    CHECK(msgs[1].images[2].path == *local.mask_path);
    CHECK_THROWS_AS(build_judge_prompt(spec, "x", mock_sample("sd_001")), PreconditionError);
}

TEST_CASE("caching encoder reads each file once") {
    CachingImageEncoder enc;
    const auto p = testing::mock10_dir() / "img" / "cal_001.png";
    auto a = enc(p);
    auto b = enc(p);
    CHECK(a.get() == b.get());
    CHECK(a->content_sha256 == sha256_hex(testing::slurp(p)));
}

TEST_CASE("approximate_tokens counts words and punctuation") {
    CHECK(approximate_tokens("") == 0);
    CHECK(approximate_tokens("Yes.") == 2);
    CHECK(approximate_tokens("Is this AI-generated?") == 6);
}
