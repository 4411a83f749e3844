#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forensics/dataset.hpp"
#include "forensics/parse.hpp"
#include "forensics/pipeline.hpp"

namespace forensics {

struct ScoredSample {
    std::string sample_id;
    double score = 0.0;
    Label label = Label::Real;
};

struct RocPoint {
    double threshold;  // predict Fake iff score >= threshold
    double fpr;
    double tpr;
};

struct AucResult {
    double auc = 0.0;  // percentage
    std::vector<RocPoint> roc_points;
};

/// Percentage of correct predictions (Fake iff score >= threshold); empty
/// input yields nullopt rather than 0.
std::optional<double> compute_acc(const std::vector<ScoredSample>& scored, double threshold = 0.5);

/// Rank-based (Mann-Whitney) AUC with half credit for ties, Fake positive.
/// ROC points are emitted at every distinct score, from (0,0) to (1,1).
/// Throws OneClassOnly unless both labels are present.
AucResult compute_auc(const std::vector<ScoredSample>& scored);

/// Trapezoidal area under a ROC polyline (fraction, not percentage).
double trapezoid_area(const std::vector<RocPoint>& points);

/// Fully rejected samples over all samples, as a percentage (0 for an empty record).
double compute_rej(const RunRecord& record);

/// Fraction of rounds (not samples) that were rejected, as a percentage.
double round_rejection_rate(const RunRecord& record);

/// Generation-method accuracy per dataset; Unknown counts as incorrect.
/// Reports for samples without a GAN/Diffusion ground truth are ignored.
std::map<std::string, double> compute_method_acc(
    const std::vector<std::pair<std::string, AnalysisReport>>& reports, const Manifest& truth);

/// Mean final_percent per dataset. Datasets with no scores map to nullopt.
std::map<std::string, std::optional<double>> aggregate_localization(
    const std::vector<JudgeScore>& judge_scores, const Manifest& truth);

struct DatasetMetrics {
    std::optional<double> acc;
    std::optional<double> auc;
    double rej = 0.0;
    std::size_t n_total = 0;
    std::size_t n_scored = 0;
    std::size_t n_rejected = 0;
};

struct MetricsSummary {
    std::optional<double> acc;
    std::optional<double> auc;
    double rej = 0.0;
    double round_rej = 0.0;
    std::size_t n_total = 0;
    std::size_t n_scored = 0;
    std::size_t n_rejected = 0;
    std::vector<RocPoint> roc_points;
    std::map<std::string, DatasetMetrics> per_dataset;
    std::map<std::string, double> method_acc;
    std::map<std::string, std::optional<double>> localization;
};

/// Pooled and per-dataset metrics from a run record. A fake-only dataset's
/// AUC pairs its samples with every real sample of the same content kind.
MetricsSummary summarize(const RunRecord& record, const Manifest& manifest, double threshold = 0.5);

nlohmann::json to_json(const MetricsSummary& m);

/// `threshold,fpr,tpr` rows with a header.
std::string roc_csv(const std::vector<RocPoint>& points);

}  // namespace forensics
