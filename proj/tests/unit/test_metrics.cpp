#include <doctest.h>

#include "forensics/metrics.hpp"
#include "test_support.hpp"

using namespace forensics;

namespace {

ScoredSample s(double score, Label label) { return {"x", score, label}; }

}  // namespace

TEST_CASE("auc on a hand example with ties") {
    // Fakes 0.9, 0.5, 0.5; reals 0.5, 0.1. Pairs: 1+1, 0.5+1, 0.5+1 = 5/6.
    std::vector<ScoredSample> v{s(0.9, Label::Fake), s(0.5, Label::Fake), s(0.5, Label::Fake),
                                s(0.5, Label::Real), s(0.1, Label::Real)};
    const auto r = compute_auc(v);
    CHECK(r.auc == doctest::Approx(100.0 * 5.0 / 6.0).epsilon(1e-12));
    REQUIRE(r.roc_points.size() == 4);
    CHECK(r.roc_points.front().fpr == 0.0);
    CHECK(r.roc_points.front().tpr == 0.0);
    CHECK(r.roc_points.back().fpr == 1.0);
    CHECK(r.roc_points.back().tpr == 1.0);
    CHECK(trapezoid_area(r.roc_points) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("auc agrees with the pairwise count") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const auto v = testing::random_scores(rng, 2 + trial * 7, trial % 2 ? 6 : 0);
        const auto r = compute_auc(v);
        CHECK(r.auc / 100.0 == doctest::Approx(testing::pairwise_auc(v)).epsilon(1e-12));
        CHECK(trapezoid_area(r.roc_points) == doctest::Approx(r.auc / 100.0).epsilon(1e-12));
    }
}

TEST_CASE("auc invariants") {
    std::mt19937_64 rng(12);
    auto v = testing::random_scores(rng, 120, 0);
    const double base = compute_auc(v).auc;
    auto squashed = v;
    for (auto& x : squashed) x.score = std::exp(3.0 * x.score) - 7.0;
    CHECK(compute_auc(squashed).auc == doctest::Approx(base).epsilon(1e-12));
    auto flipped = v;
    for (auto& x : flipped) x.label = x.label == Label::Fake ? Label::Real : Label::Fake;
    CHECK(compute_auc(flipped).auc == doctest::Approx(100.0 - base).epsilon(1e-12));
    auto shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(compute_auc(shuffled).auc == base);
}

TEST_CASE("auc needs both classes") {
    CHECK_THROWS_AS(compute_auc({s(0.1, Label::Fake), s(0.2, Label::Fake)}), OneClassOnly);
    CHECK_THROWS_AS(compute_auc({}), OneClassOnly);
}

TEST_CASE("accuracy uses a closed threshold") {
    CHECK_FALSE(compute_acc({}).has_value());
    std::vector<ScoredSample> v{s(0.5, Label::Fake), s(0.4, Label::Fake), s(0.6, Label::Real), s(0.0, Label::Real)};
    CHECK(*compute_acc(v) == 50.0);
    CHECK(*compute_acc(v, 0.3) == 75.0);
    CHECK(*compute_acc(v, 0.7) == 50.0);
    CHECK(*compute_acc(v, 0.45) == 50.0);
    CHECK(*compute_acc({s(1.0, Label::Fake)}) == 100.0);
}

TEST_CASE("roc csv") {
    const auto csv = roc_csv({{1.0, 0.0, 0.5}, {0.5, 1.0, 1.0}});
    CHECK(csv.rfind("threshold,fpr,tpr\n", 0) == 0);
    CHECK(csv.find("0.5,1,1") != std::string::npos);
}

TEST_CASE("summarize the mock fixture") {
    const auto manifest = load_manifest(testing::mock10_dir() / "manifest.jsonl");
    PromptLibrary lib(testing::data_dir() / "prompts");
    RunPlan plan;
    plan.detect.prompt = lib.detect(5);
    plan.analyze.prompt = lib.analyze();
    plan.analyze.rounds = 1;
    plan.judge.prompt = lib.judge();
    plan.judge.rounds = 1;
    for (auto* q : {&plan.detect, &plan.analyze, &plan.judge}) {
        q->provider.model_id = "mock-vlm";
        q->provider.mock_script = testing::mock10_dir() / "mock_script.jsonl";
    }
    auto m = MockProvider::from_file(testing::mock10_dir() / "mock_script.jsonl", "mock-vlm");
    CachingImageEncoder enc;
    auto record = run_batch(manifest, plan, StageSet{true, true, true}, *m, *m, nullptr,
                            [&](const std::filesystem::path& p) { return enc(p); });
    const auto sum = summarize(record, manifest);

    CHECK(sum.n_total == 10);
    CHECK(sum.n_rejected == 1);
    CHECK(sum.n_scored == 9);
    CHECK(*sum.acc == doctest::Approx(700.0 / 9.0));
    CHECK(*sum.auc == doctest::Approx(95.0));
    CHECK(sum.rej == doctest::Approx(10.0));
    CHECK(sum.round_rej == doctest::Approx(16.0));
    CHECK(*sum.localization.at("autosplice") == doctest::Approx(87.5));
    CHECK(*sum.localization.at("lama") == doctest::Approx(62.5));
    // Fake-only datasets borrow the reals of the same content kind.
    CHECK(*sum.per_dataset.at("stylegan").auc == doctest::Approx(100.0));
    CHECK_FALSE(sum.per_dataset.at("webfaces").auc.has_value());
    CHECK(sum.method_acc.at("autosplice") == 100.0);

    const auto j = to_json(sum);
    CHECK(j.contains("per_dataset"));
    CHECK(j.at("acc").get<double>() == doctest::Approx(700.0 / 9.0));
}

TEST_CASE("rejection rates") {
    RunRecord r;
    CHECK(compute_rej(r) == 0.0);
    SampleRecord a;
    a.detection = score_rounds("a", {Verdict::Reject, Verdict::Reject});
    SampleRecord b;
    b.detection = score_rounds("b", {Verdict::Yes, Verdict::Reject});
    r.samples["a"] = a;
    r.samples["b"] = b;
    CHECK(compute_rej(r) == 50.0);
    CHECK(round_rejection_rate(r) == 75.0);
}

TEST_CASE("method accuracy counts unknown as wrong") {
    const auto manifest = load_manifest(testing::mock10_dir() / "manifest.jsonl");
    AnalysisReport good;
    good.method = Method::Diffusion;
    AnalysisReport unknown;
    unknown.method = Method::Unknown;
    AnalysisReport ignored;
    ignored.method = Method::GAN;
    const auto acc = compute_method_acc({{"as_001", good}, {"as_002", unknown}, {"cal_001", ignored}}, manifest);
    CHECK(acc.at("autosplice") == 50.0);
    CHECK_FALSE(acc.contains("caltech101"));
}
