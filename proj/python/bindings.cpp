#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "forensics/cli.hpp"
#include "forensics/dataset.hpp"
#include "forensics/metrics.hpp"
#include "forensics/oracle.hpp"
#include "forensics/parse.hpp"
#include "forensics/pipeline.hpp"
#include "forensics/prompts.hpp"

namespace py = pybind11;
using namespace forensics;

namespace {

py::object to_py(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null: return py::none();
        case nlohmann::json::value_t::boolean: return py::bool_(j.get<bool>());
        case nlohmann::json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
        case nlohmann::json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
        case nlohmann::json::value_t::number_float: return py::float_(j.get<double>());
        case nlohmann::json::value_t::string: return py::str(j.get<std::string>());
        case nlohmann::json::value_t::array: {
            py::list out;
            for (const auto& v : j) out.append(to_py(v));
            return out;
        }
        case nlohmann::json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
            return out;
        }
        default: return py::none();
    }
}

std::vector<ScoredSample> scored(const std::vector<double>& scores, const std::vector<bool>& is_fake) {
    if (scores.size() != is_fake.size()) throw py::value_error("scores and labels differ in length");
    std::vector<ScoredSample> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        out[i] = {std::to_string(i), scores[i], is_fake[i] ? Label::Fake : Label::Real};
    return out;
}

Verdict verdict_from(const std::string& s) {
    auto v = parse_verdict_name(s);
    if (!v) throw py::value_error("unknown verdict '" + s + "'");
    return *v;
}

}  // namespace

PYBIND11_MODULE(_forensics, m) {
    m.doc() = "Two-stage forensics evaluation core";

    static py::exception<Error> error(m, "ForensicsError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (e.kind() + ": " + e.what()).c_str());
        }
    });

    m.def(
        "parse_verdict", [](const std::string& text) { return std::string(to_string(parse_verdict(text))); },
        py::arg("text"), "Map a free-text answer to 'yes', 'no' or 'reject'.");
    m.def(
        "parse_report", [](const std::string& text) { return to_py(nlohmann::json(parse_report(text))); },
        py::arg("text"), "Split a Stage-2 analysis into its four fields.");
    m.def(
        "parse_judge_scores",
        [](const std::string& text) {
            const auto s = parse_judge_scores(text);
            py::dict out;
            out["scores"] = std::vector<double>(s.scores.begin(), s.scores.end());
            out["diagnostics"] = s.diagnostics;
            return out;
        },
        py::arg("text"));
    m.def(
        "score_rounds",
        [](const std::vector<std::string>& verdicts) -> std::optional<double> {
            std::vector<Verdict> v;
            for (const auto& s : verdicts) v.push_back(verdict_from(s));
            return score_rounds("py", v).score;
        },
        py::arg("verdicts"), "Fraction of yes over answered rounds; None when every round was rejected.");
    m.def("judge_final_percent", &judge_final_percent, py::arg("sub_scores"));
    m.def(
        "compute_auc",
        [](const std::vector<double>& scores, const std::vector<bool>& is_fake) {
            const auto r = compute_auc(scored(scores, is_fake));
            std::vector<std::tuple<double, double, double>> pts;
            for (const auto& p : r.roc_points) pts.emplace_back(p.threshold, p.fpr, p.tpr);
            return py::make_tuple(r.auc, pts);
        },
        py::arg("scores"), py::arg("is_fake"), "AUC in percent and the ROC points.");
    m.def(
        "compute_acc",
        [](const std::vector<double>& scores, const std::vector<bool>& is_fake, double threshold) {
            return compute_acc(scored(scores, is_fake), threshold);
        },
        py::arg("scores"), py::arg("is_fake"), py::arg("threshold") = 0.5);
    m.def(
        "expected_auc",
        [](double yes_rate_fake, double yes_rate_real, int rounds, double reject_rate) {
            SyntheticBehavior b;
            b.yes_rate_fake = yes_rate_fake;
            b.yes_rate_real = yes_rate_real;
            b.reject_rate = reject_rate;
            return expected_auc(b, rounds);
        },
        py::arg("yes_rate_fake"), py::arg("yes_rate_real"), py::arg("rounds") = 5, py::arg("reject_rate") = 0.0);
    m.def(
        "load_manifest",
        [](const std::filesystem::path& path) {
            py::list out;
            for (const auto& s : load_manifest(path).entries) out.append(to_py(sample_to_json(s)));
            return out;
        },
        py::arg("path"));
    m.def(
        "sample_shots",
        [](const std::filesystem::path& pool_path, int k, std::uint64_t seed) {
            std::vector<std::string> ids;
            for (const auto& e : sample_shots({k, load_exemplar_pool(pool_path), seed})) ids.push_back(e.id);
            return ids;
        },
        py::arg("pool_path"), py::arg("k"), py::arg("seed"), "Exemplar ids drawn for a k-shot prompt.");
    m.def(
        "run_eval",
        [](const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out_dir,
           const std::string& command) {
            auto config = load_run_config(config_path);
            if (out_dir) config.output_dir = std::filesystem::absolute(*out_dir).string();
            Command cmd = Command::Eval;
            if (command == "detect") cmd = Command::Detect;
            else if (command == "analyze") cmd = Command::Analyze;
            else if (command == "judge") cmd = Command::Judge;
            else if (command != "eval") throw py::value_error("unknown command '" + command + "'");
            CommandResult r;
            {
                py::gil_scoped_release release;
                r = run_command(cmd, config);
            }
            py::object metrics = py::none();
            if (r.summary) {
                auto j = to_json(*r.summary);
                j["config_hash"] = r.record.config_hash;
                metrics = to_py(j);
            }
            return py::make_tuple(r.exit_code, metrics);
        },
        py::arg("config"), py::arg("out_dir") = py::none(), py::arg("command") = "eval",
        "Run a pipeline command from a config file; returns (exit_code, metrics).");
}
