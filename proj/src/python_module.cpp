// Python extension: documents cross the boundary as JSON text and the Python
// package decodes them.

#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vulnscore/cli.hpp"
#include "vulnscore/error.hpp"
#include "vulnscore/evaluation.hpp"
#include "vulnscore/features.hpp"
#include "vulnscore/file_io.hpp"
#include "vulnscore/findings.hpp"
#include "vulnscore/linear_model.hpp"
#include "vulnscore/manifest.hpp"
#include "vulnscore/source_metrics.hpp"
#include "vulnscore/synthetic.hpp"

namespace py = pybind11;
using namespace vulnscore;

namespace {

std::string features_json(const FeatureVector& v) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [name, value] : v)
        doc[name] = value;
    return doc.dump();
}

FeatureVector features_from_json(const std::string& text) {
    FeatureVector v;
    const auto doc = parse_json_text(text);
    for (const auto& [name, value] : doc.items())
        if (!value.is_null())
            v.set(name, value.get<double>());
    return v;
}

std::string generate(std::uint64_t seed, std::size_t instances, double vulnerable_fraction, bool informative_l3,
                     bool shuffle_labels) {
    SynthOptions opt;
    opt.instances = instances;
    opt.vulnerable_fraction = vulnerable_fraction;
    opt.informative_l3 = informative_l3;
    opt.shuffle_labels = shuffle_labels;
    return dataset_to_json(generate_corpus(seed, opt)).dump();
}

std::vector<std::tuple<std::string, std::string, std::string>> validate(const std::string& dataset) {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& v : validate_dataset(dataset_from_json(parse_json_text(dataset))))
        out.emplace_back(v.instance_id, v.feature, v.rule);
    return out;
}

std::string parse_findings(const std::vector<std::filesystem::path>& paths) {
    std::vector<FindingsReport> reports;
    nlohmann::ordered_json doc;
    doc["reports"] = nlohmann::ordered_json::array();
    for (const auto& p : paths) {
        reports.push_back(parse_findings_file(p));
        const auto& r = reports.back();
        doc["reports"].push_back({{"path", p.string()},
                                  {"tool", r.tool},
                                  {"findings", r.findings.size()},
                                  {"element_errors", r.errors.size()},
                                  {"unmatched_lines", r.unmatched_lines}});
    }
    doc["features"] = parse_json_text(features_json(aggregate_layer1(reports)));
    return doc.dump();
}

std::string layer2(const std::filesystem::path& source_dir, const std::optional<std::filesystem::path>& manifest) {
    std::optional<ProjectManifest> m;
    if (manifest)
        m = load_manifest(*manifest);
    return features_json(extract_layer2(source_dir, m ? &*m : nullptr).features);
}

std::string layer3(const std::filesystem::path& manifest) { return features_json(encode_layer3(load_manifest(manifest))); }

EvalParams make_params(double beta, double c, std::size_t folds, std::size_t bootstraps) {
    EvalParams params;
    params.beta = beta;
    params.learner.svm.c = c;
    params.folds = folds;
    params.bootstraps = bootstraps;
    return params;
}

std::string train(const std::string& dataset, const std::string& model, const std::string& subset, double beta,
                  double c, std::uint64_t seed) {
    const auto d = dataset_from_json(parse_json_text(dataset));
    const auto pipeline =
        fit_pipeline(d, parse_model_kind(model), parse_subset_kind(subset), make_params(beta, c, 10, 0), seed);
    return model_to_json(pipeline.model).dump();
}

double decision(const std::string& model, const std::string& features) {
    return model_from_json(parse_json_text(model)).decision_value(features_from_json(features));
}

std::pair<std::string, std::string> evaluate(const std::string& dataset, std::uint64_t seed, std::size_t folds,
                                             std::size_t bootstraps, double beta, double c) {
    const auto d = dataset_from_json(parse_json_text(dataset));
    const auto report = run_table1_grid(d, seed, make_params(beta, c, folds, bootstraps));
    return {report_to_json(report).dump(), render_table(report)};
}

std::tuple<int, std::string, std::string> run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"vulnscore"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

} // namespace

PYBIND11_MODULE(_vulnscore, m) {
    py::register_exception<Error>(m, "VulnscoreError");
    m.attr("__version__") = cli::kVersion;
    m.def("generate_corpus", &generate, py::arg("seed"), py::arg("instances") = 75,
          py::arg("vulnerable_fraction") = 2.0 / 3.0, py::arg("informative_l3") = true,
          py::arg("shuffle_labels") = false);
    m.def("validate_dataset", &validate, py::arg("dataset"));
    m.def("parse_findings", &parse_findings, py::arg("paths"));
    m.def("extract_layer2", &layer2, py::arg("source_dir"), py::arg("manifest") = py::none());
    m.def("encode_layer3", &layer3, py::arg("manifest"));
    m.def("train", &train, py::arg("dataset"), py::arg("model") = "svm", py::arg("subset") = "all",
          py::arg("beta") = 1.0, py::arg("c") = 1.0, py::arg("seed") = 0);
    m.def("decision_value", &decision, py::arg("model"), py::arg("features"));
    m.def("evaluate", &evaluate, py::arg("dataset"), py::arg("seed"), py::arg("folds") = 10,
          py::arg("bootstraps") = 100, py::arg("beta") = 1.0, py::arg("c") = 1.0);
    m.def("run_cli", &run_cli, py::arg("args"));
}
