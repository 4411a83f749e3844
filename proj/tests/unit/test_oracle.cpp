#include <doctest.h>

#include <cmath>

#include "forensics/oracle.hpp"
#include "test_support.hpp"

using namespace forensics;

namespace {

SyntheticBehavior behavior(double f, double r, double reject = 0.0) {
    SyntheticBehavior b;
    b.yes_rate_fake = f;
    b.yes_rate_real = r;
    b.reject_rate = reject;
    return b;
}

}  // namespace

// Frozen values from tests/oracles/compute_oracles.py (exact rational arithmetic).
TEST_CASE("expected_auc frozen values") {
    CHECK(expected_auc(behavior(0.9, 0.1), 5) == doctest::Approx(24977727.0 / 25000000.0).epsilon(1e-12));
    CHECK(expected_auc(behavior(0.7, 0.4), 5) == doctest::Approx(0.82952468).epsilon(1e-9));
    CHECK(expected_auc(behavior(0.9, 0.1, 0.3), 5) == doctest::Approx(0.9909797439057751).epsilon(1e-12));
    CHECK(expected_auc(behavior(0.9, 0.1), 1) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("expected_auc limits") {
    CHECK(expected_auc(behavior(0.6, 0.6), 5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(expected_auc(behavior(1.0, 0.0), 5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(expected_auc(behavior(0.0, 1.0), 3) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(expected_auc(behavior(0.8, 0.3), 4) + expected_auc(behavior(0.3, 0.8), 4) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(expected_auc(behavior(0.9, 0.1, 1.0), 5), ConfigError);
    CHECK_THROWS_AS(expected_auc(behavior(0.9, 0.1), 0), ConfigError);
}

TEST_CASE("full rejection probability") {
    CHECK(expected_full_rejection(behavior(0.9, 0.1, 0.3), 5) == doctest::Approx(0.00243).epsilon(1e-12));
    CHECK(expected_full_rejection(behavior(0.9, 0.1), 5) == 0.0);
}

TEST_CASE("bundled scenarios load") {
    const auto s = load_scenario(testing::data_dir() / "fixtures" / "oracle" / "scenario.json");
    CHECK(s.n_real == 2000);
    CHECK(s.tolerance == 0.02);
    CHECK_FALSE(s.derivation.empty());
    CHECK_THROWS_AS(scenario_from_json(nlohmann::json::parse(R"({"n_real":0})")), ConfigError);
}

TEST_CASE("small synthetic run lands near the exact AUC") {
    OracleScenario s;
    s.n_real = 300;
    s.n_fake = 300;
    s.behavior = behavior(0.7, 0.4, 0.1);
    s.behavior.seed = 4;
    s.tolerance = 0.06;  // ~3 standard errors at n = 300 per class
    const auto prompt = PromptLibrary(testing::data_dir() / "prompts").detect(5);
    const auto out = validate_pipeline(s, prompt, testing::data_dir() / "fixtures" / "oracle" / "blank.png", 2);
    CHECK(out.passed);
    CHECK(out.expected_rej == doctest::Approx(1e-5));

    s.behavior = behavior(0.9, 0.1);
    s.tolerance = 1e-9;
    CHECK_THROWS_AS(validate_pipeline(s, prompt, testing::data_dir() / "fixtures" / "oracle" / "blank.png"),
                    ToleranceExceeded);
}
