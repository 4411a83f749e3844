#include "forensics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace forensics {

using nlohmann::json;

std::optional<double> compute_acc(const std::vector<ScoredSample>& scored, double threshold) {
    if (scored.empty()) return std::nullopt;
    std::size_t correct = 0;
    for (const auto& s : scored) {
        const Label predicted = s.score >= threshold ? Label::Fake : Label::Real;
        if (predicted == s.label) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(scored.size());
}

AucResult compute_auc(const std::vector<ScoredSample>& scored) {
    std::size_t n_pos = 0;
    for (const auto& s : scored) {
        if (!std::isfinite(s.score)) throw SchemaError("non-finite score for " + s.sample_id);
        if (s.label == Label::Fake) ++n_pos;
    }
    const std::size_t n_neg = scored.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw OneClassOnly("AUC needs both real and fake samples");

    std::vector<std::pair<double, Label>> v;
    v.reserve(scored.size());
    for (const auto& s : scored) v.emplace_back(s.score, s.label);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    // Sum of midranks of the positives (ranks are 1-based).
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        std::size_t pos_in_group = 0;
        while (j < v.size() && v[j].first == v[i].first) {
            if (v[j].second == Label::Fake) ++pos_in_group;
            ++j;
        }
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        rank_sum += midrank * static_cast<double>(pos_in_group);
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    const double u = rank_sum - np * (np + 1.0) / 2.0;

    AucResult out;
    out.auc = 100.0 * u / (np * nn);

    // Descending sweep over distinct scores.
    out.roc_points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = v.size(); i > 0;) {
        const double s = v[i - 1].first;
        while (i > 0 && v[i - 1].first == s) {
            (v[i - 1].second == Label::Fake ? tp : fp) += 1;
            --i;
        }
        out.roc_points.push_back({s, static_cast<double>(fp) / nn, static_cast<double>(tp) / np});
    }
    return out;
}

double trapezoid_area(const std::vector<RocPoint>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
    return area;
}

double compute_rej(const RunRecord& record) {
    std::size_t total = 0, rejected = 0;
    for (const auto& [id, s] : record.samples) {
        if (!s.detection) continue;
        ++total;
        if (s.detection->rejected()) ++rejected;
    }
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(rejected) / static_cast<double>(total);
}

double round_rejection_rate(const RunRecord& record) {
    std::size_t rounds = 0, rejected = 0;
    for (const auto& [id, s] : record.samples) {
        if (!s.detection) continue;
        rounds += static_cast<std::size_t>(s.detection->rounds_total);
        rejected += static_cast<std::size_t>(s.detection->rounds_rejected);
    }
    return rounds == 0 ? 0.0 : 100.0 * static_cast<double>(rejected) / static_cast<double>(rounds);
}

std::map<std::string, double> compute_method_acc(
    const std::vector<std::pair<std::string, AnalysisReport>>& reports, const Manifest& truth) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // correct, total
    for (const auto& [id, report] : reports) {
        const ImageSample* s = truth.find(id);
        if (!s || s->generator == Generator::None) continue;
        auto& [correct, total] = tally[s->dataset_name];
        ++total;
        const bool ok = (s->generator == Generator::GAN && report.method == Method::GAN) ||
                        (s->generator == Generator::Diffusion && report.method == Method::Diffusion);
        if (ok) ++correct;
    }
    std::map<std::string, double> out;
    for (const auto& [name, t] : tally)
        out[name] = 100.0 * static_cast<double>(t.first) / static_cast<double>(t.second);
    return out;
}

std::map<std::string, std::optional<double>> aggregate_localization(
    const std::vector<JudgeScore>& judge_scores, const Manifest& truth) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& e : truth.entries)
        if (e.scope == Scope::Local) acc.try_emplace(e.dataset_name, 0.0, 0);
    for (const auto& j : judge_scores) {
        const ImageSample* s = truth.find(j.sample_id);
        if (!s) continue;
        auto& [sum, n] = acc[s->dataset_name];
        sum += j.final_percent;
        ++n;
    }
    std::map<std::string, std::optional<double>> out;
    for (const auto& [name, v] : acc)
        out[name] = v.second == 0 ? std::nullopt : std::optional<double>(v.first / static_cast<double>(v.second));
    return out;
}

MetricsSummary summarize(const RunRecord& record, const Manifest& manifest, double threshold) {
    MetricsSummary m;
    std::vector<ScoredSample> pooled;
    std::map<std::string, std::vector<ScoredSample>> by_dataset;
    std::map<Content, std::vector<ScoredSample>> reals_by_content;
    std::map<std::string, DatasetMetrics> per;
    std::map<std::string, bool> has_real;
    std::map<std::string, Content> content_of;

    for (const auto& sample : manifest.entries) {
        auto it = record.samples.find(sample.id);
        if (it == record.samples.end() || !it->second.detection) continue;
        const auto& d = *it->second.detection;
        auto& dm = per[sample.dataset_name];
        ++m.n_total;
        ++dm.n_total;
        content_of.try_emplace(sample.dataset_name, sample.content);
        if (sample.label == Label::Real) has_real[sample.dataset_name] = true;
        if (d.rejected()) {
            ++m.n_rejected;
            ++dm.n_rejected;
            continue;
        }
        ++m.n_scored;
        ++dm.n_scored;
        ScoredSample s{sample.id, *d.score, sample.label};
        pooled.push_back(s);
        by_dataset[sample.dataset_name].push_back(s);
        if (sample.label == Label::Real) reals_by_content[sample.content].push_back(s);
    }

    m.acc = compute_acc(pooled, threshold);
    m.rej = m.n_total == 0 ? 0.0 : 100.0 * static_cast<double>(m.n_rejected) / static_cast<double>(m.n_total);
    m.round_rej = round_rejection_rate(record);
    try {
        auto auc = compute_auc(pooled);
        m.auc = auc.auc;
        m.roc_points = std::move(auc.roc_points);
    } catch (const OneClassOnly&) {
    }

    for (auto& [name, dm] : per) {
        const auto& mine = by_dataset[name];
        dm.acc = compute_acc(mine, threshold);
        dm.rej = dm.n_total == 0 ? 0.0 : 100.0 * static_cast<double>(dm.n_rejected) / static_cast<double>(dm.n_total);
        std::vector<ScoredSample> auc_set = mine;
        if (!has_real[name]) {
            const auto& reals = reals_by_content[content_of[name]];
            auc_set.insert(auc_set.end(), reals.begin(), reals.end());
        }
        try {
            dm.auc = compute_auc(auc_set).auc;
        } catch (const OneClassOnly&) {
        }
    }
    m.per_dataset = std::move(per);

    std::vector<std::pair<std::string, AnalysisReport>> reports;
    std::vector<JudgeScore> judged;
    for (const auto& [id, s] : record.samples) {
        if (!s.analyses.empty()) reports.emplace_back(id, s.analyses.front().report);
        if (s.judge) judged.push_back(*s.judge);
    }
    if (record.stages.analyze || record.stages.judge) m.method_acc = compute_method_acc(reports, manifest);
    if (record.stages.judge) m.localization = aggregate_localization(judged, manifest);
    return m;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json threshold_json(double t) { return std::isinf(t) ? json("inf") : json(t); }

}  // namespace

json to_json(const MetricsSummary& m) {
    json roc = json::array();
    for (const auto& p : m.roc_points) roc.push_back({threshold_json(p.threshold), p.fpr, p.tpr});
    json per = json::object();
    for (const auto& [name, d] : m.per_dataset)
        per[name] = {{"acc", opt(d.acc)},         {"auc", opt(d.auc)},
                     {"rej", d.rej},              {"n_total", d.n_total},
                     {"n_scored", d.n_scored},    {"n_rejected", d.n_rejected}};
    json loc = json::object();
    for (const auto& [name, v] : m.localization) loc[name] = opt(v);
    return json{{"schema_version", kSchemaVersion},
                {"acc", opt(m.acc)},
                {"auc", opt(m.auc)},
                {"rej", m.rej},
                {"round_rej", m.round_rej},
                {"n_total", m.n_total},
                {"n_scored", m.n_scored},
                {"n_rejected", m.n_rejected},
                {"roc_points", roc},
                {"per_dataset", per},
                {"method_acc", m.method_acc},
                {"localization", loc}};
}

std::string roc_csv(const std::vector<RocPoint>& points) {
    std::ostringstream out;
    out.precision(17);
    out << "threshold,fpr,tpr\n";
    for (const auto& p : points) {
        if (std::isinf(p.threshold))
            out << "inf";
        else
            out << p.threshold;
        out << ',' << p.fpr << ',' << p.tpr << '\n';
    }
    return out.str();
}

}  // namespace forensics
