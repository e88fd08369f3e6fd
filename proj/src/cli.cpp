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

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <string_view>

namespace vulnscore::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string, std::less<>> kConfigKeys{
    "seed",     "model",    "subset",    "beta",       "C",     "lambda", "tol",
    "max_iter", "rfe_step", "folds",     "bootstraps", "binarize_l1", "source", "findings",
    "manifest", "dataset",  "model_file", "out",       "table"};

template <typename T>
T typed(const json& doc, const char* key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config: '") + key + "' has the wrong type");
    }
}

} // namespace

RunConfig run_config_from_json(const json& doc) {
    if (!doc.is_object())
        throw ValidationError("config must be a JSON object");
    for (const auto& [key, value] : doc.items())
        if (!kConfigKeys.contains(key))
            throw UnknownKeyError(key);
    RunConfig c;
    auto has = [&](const char* key) { return doc.contains(key); };
    if (has("seed")) {
        if (!doc["seed"].is_number_unsigned())
            throw ValidationError("config: 'seed' must be a non-negative integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    if (has("model")) c.model = typed<std::string>(doc, "model");
    if (has("subset")) c.subset = typed<std::string>(doc, "subset");
    if (has("beta")) c.beta = typed<double>(doc, "beta");
    if (has("C")) c.c = typed<double>(doc, "C");
    if (has("lambda")) c.lambda = typed<double>(doc, "lambda");
    if (has("tol")) c.tol = typed<double>(doc, "tol");
    if (has("max_iter")) c.max_iter = typed<long>(doc, "max_iter");
    if (has("rfe_step")) c.rfe_step = typed<std::size_t>(doc, "rfe_step");
    if (has("folds")) c.folds = typed<std::size_t>(doc, "folds");
    if (has("bootstraps")) c.bootstraps = typed<std::size_t>(doc, "bootstraps");
    if (has("binarize_l1")) c.binarize_l1 = typed<bool>(doc, "binarize_l1");
    if (has("source")) c.source = typed<std::string>(doc, "source");
    if (has("findings")) c.findings = typed<std::vector<std::string>>(doc, "findings");
    if (has("manifest")) c.manifest = typed<std::string>(doc, "manifest");
    if (has("dataset")) c.dataset = typed<std::string>(doc, "dataset");
    if (has("model_file")) c.model_file = typed<std::string>(doc, "model_file");
    if (has("out")) c.out = typed<std::string>(doc, "out");
    if (has("table")) c.table = typed<std::string>(doc, "table");
    validate_run_config(c);
    return c;
}

void validate_run_config(const RunConfig& c) {
    parse_model_kind(c.model);
    parse_subset_kind(c.subset);
    if (!(c.beta >= 0.0) || !std::isfinite(c.beta))
        throw RangeError("beta must be a non-negative number");
    if (!(c.c > 0.0) || !std::isfinite(c.c))
        throw RangeError("C must be positive");
    if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda))
        throw RangeError("lambda must be non-negative");
    if (!(c.tol > 0.0))
        throw RangeError("tol must be positive");
    if (c.max_iter < 1)
        throw RangeError("max_iter must be at least 1");
    if (c.rfe_step < 1)
        throw RangeError("rfe_step must be at least 1");
    if (c.folds < 2)
        throw RangeError("folds must be at least 2");
}

namespace {

class Session {
public:
    Session(std::ostream& out, std::ostream& err, bool quiet) : out_(out), err_(err), quiet_(quiet) {}

    void warn(const std::string& message) {
        if (!quiet_)
            err_ << "warning: " << message << '\n';
    }
    void emit(const ordered_json& doc) { out_ << doc.dump(2) << '\n'; }
    void emit_line(const ordered_json& doc) { out_ << doc.dump() << '\n'; }
    std::ostream& err() { return err_; }

private:
    std::ostream& out_;
    std::ostream& err_;
    bool quiet_;
};

EvalParams eval_params(const RunConfig& c) {
    EvalParams p;
    p.learner.fda.ridge = c.lambda;
    p.learner.svm.c = c.c;
    p.learner.svm.tol = c.tol;
    p.learner.svm.max_epochs = c.max_iter;
    p.beta = c.beta;
    p.folds = c.folds;
    p.bootstraps = c.bootstraps;
    p.rfe_step = c.rfe_step;
    return p;
}

std::uint64_t require_seed(const RunConfig& c, std::string_view command) {
    if (!c.seed)
        throw ValidationError("--seed is required for " + std::string(command));
    return *c.seed;
}

void write_output(const std::string& path, const std::string& content) {
    if (!path.empty())
        write_file_atomic(path, content);
}

Dataset load_valid_dataset(const std::string& path, Session& s) {
    if (path.empty())
        throw ValidationError("--dataset is required");
    auto d = load_dataset(path);
    const auto violations = validate_dataset(d);
    if (!violations.empty()) {
        for (const auto& v : violations)
            s.err() << "error: " << v.instance_id << (v.feature.empty() ? "" : " " + v.feature) << ": " << v.rule
                    << '\n';
        throw ValidationError("dataset " + path + " has " + std::to_string(violations.size()) + " violation(s)");
    }
    return d;
}

/// Accepts an extract fragment (`{"features": {...}}`) or a bare feature object.
FeatureVector read_feature_object(const std::string& path, std::map<std::string, std::string>* provenance) {
    const auto doc = parse_json_text(read_text_file(path));
    if (!doc.is_object())
        throw SchemaError(path + ": expected a JSON object");
    const json* features = &doc;
    if (doc.contains("features")) {
        if (doc.contains("schema_version") && doc["schema_version"] != "1")
            throw SchemaVersionError(doc["schema_version"].dump());
        features = &doc["features"];
        if (provenance && doc.contains("provenance") && doc["provenance"].is_object())
            for (const auto& [k, v] : doc["provenance"].items())
                (*provenance)[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (!features->is_object())
        throw SchemaError(path + ": 'features' must be an object");
    FeatureVector fv;
    for (const auto& [name, value] : features->items()) {
        if (!is_valid_feature_name(name))
            throw SchemaError(path + ": invalid feature name '" + name + "'");
        if (!value.is_number())
            throw SchemaError(path + ": feature '" + name + "' must be a number");
        fv.set(name, value.get<double>());
    }
    return fv;
}

ordered_json rfe_to_json(const RfeTrace& t, ModelKind kind, std::size_t step) {
    auto entries = [](const std::vector<RfeEntry>& list) {
        ordered_json a = ordered_json::array();
        for (const auto& e : list)
            a.push_back({{"feature", e.feature}, {"rank", e.rank}, {"abs_weight", e.abs_weight}});
        return a;
    };
    ordered_json j;
    j["schema_version"] = "1";
    j["model"] = to_string(kind);
    j["step"] = step;
    j["ranking"] = entries(t.ranking);
    j["eliminated"] = entries(t.eliminated);
    j["selected_features"] = t.selected_features;
    ordered_json curve = ordered_json::array();
    for (const auto& p : t.curve)
        curve.push_back({{"size", p.size}, {"accuracy", p.accuracy ? ordered_json(*p.accuracy) : ordered_json(nullptr)}});
    j["curve"] = std::move(curve);
    return j;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_extract(const RunConfig& c, const std::string& emit, const std::string& id_map,
                const std::string& splint_rules, Session& s) {
    if (c.source.empty())
        throw ValidationError("--source is required");
    const auto ids = id_map.empty() ? CppcheckIdMap::builtin() : CppcheckIdMap::load(id_map);
    const auto rules = splint_rules.empty() ? SplintRules::builtin() : SplintRules::load(splint_rules);

    std::vector<FindingsReport> reports;
    for (const auto& path : c.findings) {
        reports.push_back(parse_findings_file(path, ids, rules));
        for (const auto& e : reports.back().errors)
            s.warn(path + ":" + std::to_string(e.line) + ": " + e.message);
    }
    std::optional<ProjectManifest> manifest;
    if (!c.manifest.empty())
        manifest = load_manifest(c.manifest);
    const auto l2 = extract_layer2(c.source, manifest ? &*manifest : nullptr);
    for (const auto& w : l2.warnings)
        s.warn(w);

    if (emit == "per-file") {
        const auto doc = per_file_json(l2);
        write_output(c.out, doc.dump(2) + "\n");
        s.emit(doc);
        return kOk;
    }

    FeatureVector features = aggregate_layer1(reports);
    if (c.binarize_l1)
        features = binarize_layer1(std::move(features));
    features.merge(l2.features);
    if (manifest)
        features.merge(encode_layer3(*manifest));

    const auto dict = default_dictionary();
    ordered_json fragment;
    fragment["schema_version"] = "1";
    ordered_json values = ordered_json::object();
    for (const auto& d : dict) {
        if (auto v = features.get(d.name)) {
            if (auto problem = check_feature_value(d, *v))
                throw ValidationError(d.name + ": " + *problem);
            values[d.name] = *v;
        }
    }
    fragment["features"] = std::move(values);
    ordered_json prov;
    prov["source"] = c.source;
    std::string joined;
    for (const auto& f : c.findings)
        joined += (joined.empty() ? "" : ";") + f;
    prov["findings"] = joined;
    prov["manifest"] = c.manifest;
    if (manifest)
        prov["project"] = manifest->project_name;
    prov["l1_mode"] = c.binarize_l1 ? "binary" : "counts";
    fragment["provenance"] = std::move(prov);
    write_output(c.out, fragment.dump(2) + "\n");
    s.emit(fragment);
    return kOk;
}

int cmd_dataset_build(const RunConfig& c, const std::vector<std::string>& vulnerable,
                      const std::vector<std::string>& benign, Session& s) {
    if (c.out.empty())
        throw ValidationError("--out is required");
    Dataset d;
    d.dictionary = default_dictionary();
    auto add = [&](const std::string& path, Label label) {
        Instance inst;
        inst.id = std::filesystem::path(path).stem().string();
        inst.label = label;
        inst.features = read_feature_object(path, &inst.provenance);
        inst.provenance["fragment"] = path;
        for (const auto& [name, value] : inst.features)
            if (!d.dictionary.contains(name))
                throw UnknownFeatureError(name);
        d.instances.push_back(std::move(inst));
    };
    for (const auto& p : vulnerable)
        add(p, Label::Vulnerable);
    for (const auto& p : benign)
        add(p, Label::BenignFlaw);
    if (d.instances.empty())
        throw ValidationError("no fragments given (use --vulnerable and --benign)");
    const auto violations = validate_dataset(d);
    if (!violations.empty()) {
        for (const auto& v : violations)
            s.err() << "error: " << v.instance_id << (v.feature.empty() ? "" : " " + v.feature) << ": " << v.rule
                    << '\n';
        throw ValidationError("assembled dataset is invalid");
    }
    save_dataset(d, c.out);
    ordered_json summary;
    summary["out"] = c.out;
    summary["instances"] = d.instances.size();
    summary["vulnerable"] = d.count(Label::Vulnerable);
    summary["benign_flaw"] = d.count(Label::BenignFlaw);
    s.emit(summary);
    return kOk;
}

int cmd_dataset_validate(const RunConfig& c, Session& s) {
    if (c.dataset.empty())
        throw ValidationError("--dataset is required");
    const auto d = load_dataset(c.dataset);
    const auto violations = validate_dataset(d);
    ordered_json doc;
    doc["dataset"] = c.dataset;
    doc["instances"] = d.instances.size();
    ordered_json list = ordered_json::array();
    for (const auto& v : violations)
        list.push_back({{"instance", v.instance_id}, {"feature", v.feature}, {"rule", v.rule}});
    doc["violations"] = std::move(list);
    s.emit(doc);
    return violations.empty() ? kOk : kValidationError;
}

int cmd_train(const RunConfig& c, const std::vector<std::string>& feature_names, Session& s) {
    const auto d = load_valid_dataset(c.dataset, s);
    const auto kind = parse_model_kind(c.model);
    const auto params = eval_params(c);
    TrainedModel model;
    if (!feature_names.empty()) {
        const auto mask = FeatureMask::from_names(d.dictionary, feature_names);
        const auto table = FeatureTable::from_dataset(d);
        std::vector<std::size_t> rows(table.rows());
        for (std::size_t i = 0; i < rows.size(); ++i)
            rows[i] = i;
        const auto weights = layer3_instance_weights(table, c.beta);
        model = train_model(kind, build_design_matrix(table, mask, rows, weights), params.learner);
    } else {
        const auto subset = parse_subset_kind(c.subset);
        const std::uint64_t seed = subset == SubsetKind::Rfe ? require_seed(c, "train --subset rfe") : 0;
        model = fit_pipeline(d, kind, subset, params, seed).model;
    }
    if (!model.training.converged)
        s.warn("SVM stopped after " + std::to_string(model.training.epochs) +
               " epochs without reaching tol (max KKT violation " + std::to_string(model.training.max_violation) +
               ")");
    const auto doc = model_to_json(model);
    write_output(c.out, doc.dump(2) + "\n");
    s.emit(doc);
    return kOk;
}

int cmd_rfe(const RunConfig& c, Session& s) {
    const auto seed = require_seed(c, "rfe");
    const auto d = load_valid_dataset(c.dataset, s);
    const auto kind = parse_model_kind(c.model);
    const auto plan = make_split_plan(d, seed, c.folds, 0);
    for (const auto& w : plan.warnings)
        s.warn(w);
    const auto trace = run_rfe(d, kind, plan, c.rfe_step, eval_params(c));
    const auto doc = rfe_to_json(trace, kind, c.rfe_step);
    write_output(c.out, doc.dump(2) + "\n");
    s.emit(doc);
    return kOk;
}

int cmd_classify(const RunConfig& c, const std::string& instance, Session& s) {
    if (c.model_file.empty())
        throw ValidationError("--model is required");
    if (instance.empty())
        throw ValidationError("--instance is required");
    const auto model = load_model(c.model_file);
    const auto x = read_feature_object(instance, nullptr);
    for (const auto& f : model.features)
        if (!x.contains(f))
            s.warn("feature " + f + " missing; using the training mean");
    const double decision = model.decision_value(x);
    ordered_json doc;
    doc["label"] = to_string(label_for_decision(decision));
    doc["decision"] = decision;
    s.emit_line(doc);
    return kOk;
}

int cmd_evaluate(const RunConfig& c, const std::string& grid, Session& s) {
    if (grid != "table1")
        throw ValidationError("unknown grid '" + grid + "' (only table1 is defined)");
    const auto seed = require_seed(c, "evaluate");
    const auto d = load_valid_dataset(c.dataset, s);
    const auto report = run_table1_grid(d, seed, eval_params(c));
    for (const auto& w : report.warnings)
        s.warn(w);
    const auto doc = report_to_json(report);
    write_output(c.out, doc.dump(2) + "\n");
    write_output(c.table, render_table(report));
    s.emit(doc);
    return kOk;
}

int cmd_synth(const RunConfig& c, const SynthOptions& options, Session& s) {
    const auto seed = require_seed(c, "synth");
    if (c.out.empty())
        throw ValidationError("--out is required");
    Dataset d;
    try {
        d = generate_corpus(seed, options);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    save_dataset(d, c.out);
    ordered_json summary;
    summary["out"] = c.out;
    summary["seed"] = seed;
    summary["instances"] = d.instances.size();
    summary["vulnerable"] = d.count(Label::Vulnerable);
    summary["benign_flaw"] = d.count(Label::BenignFlaw);
    summary["informative_features"] = recorded_informative_features(d);
    s.emit(summary);
    return kOk;
}

/// Finds `--config FILE` / `--config=FILE` before the full parse.
std::optional<std::string> scan_config_path(int argc, const char* const* argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string_view a = argv[i];
        if (a == "--config" && i + 1 < argc)
            return std::string(argv[i + 1]);
        if (a.starts_with("--config="))
            return std::string(a.substr(9));
    }
    return std::nullopt;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    bool quiet = false;
    for (int i = 1; i < argc; ++i)
        if (std::string_view(argv[i]) == "--quiet")
            quiet = true;
    Session session(out, err, quiet);

    try {
        RunConfig cfg;
        if (auto path = scan_config_path(argc, argv))
            cfg = run_config_from_json(parse_json_text(read_text_file(*path)));

        CLI::App app{"Vulnerability classification from static-analysis, code-metric and project features",
                     "vulnscore"};
        app.require_subcommand(1);
        app.fallthrough();
        app.set_version_flag("--version", std::string("vulnscore ") + kVersion);
        std::string config_path;
        app.add_option("--config", config_path, "JSON run configuration");
        app.add_flag("--quiet", quiet, "Suppress warnings");

        std::uint64_t seed = 0;
        auto add_seed = [&](CLI::App* sub) { return sub->add_option("--seed", seed, "PRNG seed"); };
        auto add_learner = [&](CLI::App* sub) {
            sub->add_option("--model", cfg.model, "fda or svm");
            sub->add_option("--beta", cfg.beta, "Layer-3 instance weight strength");
            sub->add_option("--C", cfg.c, "SVM box constraint");
            sub->add_option("--lambda", cfg.lambda, "FDA ridge");
            sub->add_option("--tol", cfg.tol, "SVM KKT tolerance");
            sub->add_option("--max-iter", cfg.max_iter, "SVM epoch limit");
            sub->add_option("--folds", cfg.folds, "Cross-validation folds");
            sub->add_option("--rfe-step", cfg.rfe_step, "Features removed per RFE iteration");
        };

        auto* extract = app.add_subcommand("extract", "Extract one project's features into a fragment");
        std::string emit = "fragment", id_map, splint_rules;
        extract->add_option("--source", cfg.source, "Project source directory");
        extract->add_option("--findings", cfg.findings, "cppcheck XML or splint text reports");
        extract->add_option("--manifest", cfg.manifest, "Project manifest JSON");
        extract->add_option("--out", cfg.out, "Output file");
        extract->add_flag("--binarize-l1", cfg.binarize_l1, "Map layer-1 counts to presence flags");
        extract->add_option("--emit", emit, "fragment or per-file")->check(CLI::IsMember({"fragment", "per-file"}));
        extract->add_option("--cppcheck-map", id_map, "cppcheck id table JSON");
        extract->add_option("--splint-rules", splint_rules, "splint keyword rules JSON");

        auto* dataset = app.add_subcommand("dataset", "Assemble or validate datasets");
        dataset->require_subcommand(1);
        auto* build = dataset->add_subcommand("build", "Assemble labelled fragments into a dataset");
        std::vector<std::string> vulnerable, benign;
        build->add_option("--out", cfg.out, "Output dataset");
        build->add_option("--vulnerable", vulnerable, "Fragments labelled vulnerable");
        build->add_option("--benign", benign, "Fragments labelled benign_flaw");
        auto* validate = dataset->add_subcommand("validate", "Check a dataset against its dictionary");
        validate->add_option("--dataset", cfg.dataset, "Dataset file");

        auto* train = app.add_subcommand("train", "Train one model on a whole dataset");
        std::vector<std::string> feature_names;
        train->add_option("--dataset", cfg.dataset, "Dataset file");
        train->add_option("--subset", cfg.subset, "l1+l2, all or rfe");
        train->add_option("--features", feature_names, "Explicit feature list")->delimiter(',');
        train->add_option("--out", cfg.out, "Model output file");
        auto* train_seed = add_seed(train);
        add_learner(train);

        auto* rfe = app.add_subcommand("rfe", "Recursive feature elimination on the training portion");
        rfe->add_option("--dataset", cfg.dataset, "Dataset file");
        rfe->add_option("--step", cfg.rfe_step, "Features removed per iteration");
        rfe->add_option("--out", cfg.out, "Trace output file");
        auto* rfe_seed = add_seed(rfe);
        add_learner(rfe);

        auto* classify = app.add_subcommand("classify", "Classify one feature fragment");
        std::string instance;
        classify->add_option("--model", cfg.model_file, "Trained model file");
        classify->add_option("--instance", instance, "Fragment or feature object");

        auto* evaluate = app.add_subcommand("evaluate", "Run the model x subset accuracy grid");
        std::string grid = "table1";
        evaluate->add_option("--dataset", cfg.dataset, "Dataset file");
        evaluate->add_option("--grid", grid, "Grid name (table1)");
        evaluate->add_option("--out", cfg.out, "Report output file");
        evaluate->add_option("--table", cfg.table, "Text table output file");
        evaluate->add_option("--bootstraps", cfg.bootstraps, "Bootstrap resamples");
        auto* eval_seed = add_seed(evaluate);
        add_learner(evaluate);

        auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
        SynthOptions synth_options;
        synth->add_option("--out", cfg.out, "Output dataset");
        synth->add_option("--instances", synth_options.instances, "Instance count");
        synth->add_option("--informative-l3", synth_options.informative_l3, "Plant class signal in layer 3");
        synth->add_option("--vulnerable-fraction", synth_options.vulnerable_fraction, "Share of vulnerable instances");
        synth->add_flag("--shuffle-labels", synth_options.shuffle_labels, "Permute labels after generation");
        auto* synth_seed = add_seed(synth);

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kOk : kValidationError;
        }
        for (auto* opt : {train_seed, rfe_seed, eval_seed, synth_seed})
            if (opt->count())
                cfg.seed = seed;
        validate_run_config(cfg);

        if (extract->parsed())
            return cmd_extract(cfg, emit, id_map, splint_rules, session);
        if (build->parsed())
            return cmd_dataset_build(cfg, vulnerable, benign, session);
        if (validate->parsed())
            return cmd_dataset_validate(cfg, session);
        if (train->parsed())
            return cmd_train(cfg, feature_names, session);
        if (rfe->parsed())
            return cmd_rfe(cfg, session);
        if (classify->parsed())
            return cmd_classify(cfg, instance, session);
        if (evaluate->parsed())
            return cmd_evaluate(cfg, grid, session);
        if (synth->parsed())
            return cmd_synth(cfg, synth_options, session);
        return kValidationError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << '\n';
        return kModelError;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kModelError;
    }
}

} // namespace vulnscore::cli
