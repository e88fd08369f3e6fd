#include "vulnscore/evaluation.hpp"

#include "vulnscore/error.hpp"
#include "vulnscore/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vulnscore {

using nlohmann::ordered_json;

std::string_view to_string(SubsetKind subset) {
    switch (subset) {
    case SubsetKind::L1L2: return "l1+l2";
    case SubsetKind::All: return "all";
    case SubsetKind::Rfe: return "rfe";
    }
    return "all";
}

SubsetKind parse_subset_kind(std::string_view text) {
    if (text == "l1+l2" || text == "L1+L2")
        return SubsetKind::L1L2;
    if (text == "all")
        return SubsetKind::All;
    if (text == "rfe" || text == "RFE")
        return SubsetKind::Rfe;
    throw SchemaError("unknown feature subset '" + std::string(text) + "' (expected l1+l2, all or rfe)");
}

// ---------------------------------------------------------------------------
// Split plans

std::size_t effective_folds(std::size_t positives, std::size_t negatives, std::size_t requested) {
    if (requested < 2)
        throw std::invalid_argument("fold count must be at least 2");
    return std::max<std::size_t>(2, std::min({requested, positives, negatives}));
}

std::vector<std::size_t> stratified_folds(std::span<const double> labels, std::size_t k, std::uint64_t seed) {
    if (k == 0)
        throw std::invalid_argument("fold count must be positive");
    Rng rng(seed);
    std::vector<std::size_t> fold(labels.size(), 0);
    std::size_t counter = 0;
    for (double cls : {1.0, -1.0}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if ((labels[i] > 0) == (cls > 0))
                members.push_back(i);
        rng.shuffle(std::span<std::size_t>(members));
        for (auto i : members)
            fold[i] = counter++ % k;
    }
    return fold;
}

SplitPlan make_split_plan(const Dataset& d, std::uint64_t seed, std::size_t folds, std::size_t bootstraps) {
    const std::size_t n = d.instances.size();
    if (n == 0)
        throw ModelError("dataset is empty");
    std::vector<std::size_t> classes[2];
    std::vector<double> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool vuln = d.instances[i].label == Label::Vulnerable;
        classes[vuln ? 0 : 1].push_back(i);
        labels[i] = vuln ? 1.0 : -1.0;
    }
    if (classes[0].empty() || classes[1].empty())
        throw ModelError("dataset contains a single class; both vulnerable and benign_flaw are required");

    SplitPlan plan;
    plan.seed = seed;

    // Test size is 25% rounded half up, shared between the classes by largest remainder.
    const std::size_t test_total = (n + 2) / 4;
    std::size_t take[2];
    std::size_t rem[2];
    for (int c = 0; c < 2; ++c) {
        take[c] = test_total * classes[c].size() / n;
        rem[c] = test_total * classes[c].size() % n;
    }
    std::size_t left = test_total - take[0] - take[1];
    for (int c : {rem[1] > rem[0] ? 1 : 0, rem[1] > rem[0] ? 0 : 1}) {
        if (left > 0) {
            ++take[c];
            --left;
        }
    }
    for (int c = 0; c < 2; ++c) {
        const std::size_t size = classes[c].size();
        if (size >= 2) {
            take[c] = std::clamp<std::size_t>(take[c], 1, size - 1);
        } else {
            take[c] = 0;
            plan.warnings.push_back(std::string("class ") + (c == 0 ? "vulnerable" : "benign_flaw") +
                                    " has a single instance; it is kept out of the test portion");
        }
    }

    Rng holdout(derive_seed(seed, 0));
    for (int c = 0; c < 2; ++c) {
        auto members = classes[c];
        holdout.shuffle(std::span<std::size_t>(members));
        plan.test.insert(plan.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take[c]));
        plan.train.insert(plan.train.end(), members.begin() + static_cast<std::ptrdiff_t>(take[c]), members.end());
    }
    std::sort(plan.test.begin(), plan.test.end());
    std::sort(plan.train.begin(), plan.train.end());

    plan.folds = effective_folds(classes[0].size(), classes[1].size(), folds);
    if (plan.folds != folds)
        plan.warnings.push_back("fold count reduced from " + std::to_string(folds) + " to " +
                                std::to_string(plan.folds) + " (smallest class has " +
                                std::to_string(std::min(classes[0].size(), classes[1].size())) + " instances)");
    plan.fold_of = stratified_folds(labels, plan.folds, derive_seed(seed, 1));

    Rng boot(derive_seed(seed, 2));
    plan.bootstraps.reserve(bootstraps);
    for (std::size_t b = 0; b < bootstraps; ++b) {
        std::vector<std::size_t> sample(plan.train.size());
        for (auto& s : sample)
            s = plan.train[boot.below(plan.train.size())];
        plan.bootstraps.push_back(std::move(sample));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Training helpers

namespace {

FeatureMask mask_of(std::size_t width, std::span<const std::size_t> columns) {
    std::vector<bool> bits(width, false);
    for (auto c : columns)
        bits[c] = true;
    return FeatureMask(std::move(bits));
}

TrainedModel train_rows(const FeatureTable& table, const FeatureMask& mask, std::span<const std::size_t> rows,
                        std::span<const double> weights, ModelKind kind, const LearnerOptions& learner) {
    return train_model(kind, build_design_matrix(table, mask, rows, weights), learner);
}

bool correct_on_row(const TrainedModel& model, const FeatureTable& table, std::span<const std::size_t> columns,
                    std::size_t row, std::vector<double>& scratch) {
    scratch.resize(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j)
        scratch[j] = table.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(columns[j]));
    const bool vulnerable = model.predict(std::span<const double>(scratch)) == Label::Vulnerable;
    return vulnerable == (table.labels(static_cast<Eigen::Index>(row)) > 0);
}

std::size_t count_correct(const TrainedModel& model, const FeatureTable& table, const FeatureMask& mask,
                          std::span<const std::size_t> rows) {
    const auto columns = mask.indices();
    std::vector<double> scratch;
    std::size_t hits = 0;
    for (auto r : rows)
        hits += correct_on_row(model, table, columns, r, scratch) ? 1 : 0;
    return hits;
}

bool has_both_classes(const FeatureTable& table, std::span<const std::size_t> rows) {
    bool pos = false, neg = false;
    for (auto r : rows)
        (table.labels(static_cast<Eigen::Index>(r)) > 0 ? pos : neg) = true;
    return pos && neg;
}

std::vector<double> weights_for(const FeatureTable& table, SubsetKind subset, double beta) {
    if (subset == SubsetKind::L1L2)
        return {};
    return layer3_instance_weights(table, beta);
}

FittedPipeline fit_on_table(const FeatureTable& table, std::span<const std::size_t> rows, ModelKind kind,
                            SubsetKind subset, const EvalParams& params, std::uint64_t seed) {
    if (params.rfe_step < 1)
        throw std::invalid_argument("RFE step must be at least 1");
    FittedPipeline out;
    out.subset = subset;
    const auto weights = weights_for(table, subset, params.beta);
    const std::size_t width = table.cols();
    if (subset == SubsetKind::L1L2) {
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < width; ++j)
            if (table.layers[j] != Layer::L3)
                cols.push_back(j);
        out.mask = mask_of(width, cols);
    } else {
        out.mask = FeatureMask(std::vector<bool>(width, true));
    }
    if (subset == SubsetKind::Rfe) {
        if (!has_both_classes(table, rows))
            throw ModelError("training data contains a single class; both vulnerable and benign_flaw are required");
        std::vector<double> labels(rows.size());
        std::size_t pos = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            labels[i] = table.labels(static_cast<Eigen::Index>(rows[i]));
            pos += labels[i] > 0 ? 1 : 0;
        }
        const std::size_t k = effective_folds(pos, rows.size() - pos, params.folds);
        const auto folds = stratified_folds(labels, k, seed);
        out.rfe = rfe_on_rows(table, rows, weights, folds, k, kind, params.learner, params.rfe_step, out.mask);
        out.mask = out.rfe->selected;
    }
    out.model = train_rows(table, out.mask, rows, weights, kind, params.learner);
    return out;
}

double percentile(std::vector<double> sorted_values, double q) {
    std::sort(sorted_values.begin(), sorted_values.end());
    const double pos = q * static_cast<double>(sorted_values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted_values.size() - 1);
    return sorted_values[lo] + (pos - static_cast<double>(lo)) * (sorted_values[hi] - sorted_values[lo]);
}

} // namespace

// ---------------------------------------------------------------------------
// RFE

RfeTrace rfe_on_rows(const FeatureTable& table, std::span<const std::size_t> rows, std::span<const double> weights,
                     std::span<const std::size_t> fold_of_row, std::size_t k, ModelKind kind,
                     const LearnerOptions& learner, std::size_t step, const FeatureMask& start) {
    if (step < 1)
        throw std::invalid_argument("RFE step must be at least 1");
    if (fold_of_row.size() != rows.size())
        throw std::invalid_argument("fold assignment does not match the rows");
    std::vector<std::size_t> current = start.indices();
    if (current.empty())
        throw ModelError("feature mask selects no features");
    const std::size_t width = table.cols();

    std::vector<std::vector<std::size_t>> fold_train(k), fold_test(k);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t f = 0; f < k; ++f)
            (fold_of_row[i] == f ? fold_test[f] : fold_train[f]).push_back(rows[i]);

    auto inner_cv = [&](const FeatureMask& mask) -> std::optional<double> {
        std::size_t hits = 0, total = 0;
        for (std::size_t f = 0; f < k; ++f) {
            if (fold_test[f].empty() || !has_both_classes(table, fold_train[f]))
                continue;
            const auto model = train_rows(table, mask, fold_train[f], weights, kind, learner);
            hits += count_correct(model, table, mask, fold_test[f]);
            total += fold_test[f].size();
        }
        if (total == 0)
            return std::nullopt;
        return static_cast<double>(hits) / static_cast<double>(total);
    };

    RfeTrace trace;
    std::vector<std::vector<std::size_t>> survivors; // feature set per curve point
    for (;;) {
        const auto mask = mask_of(width, current);
        trace.curve.push_back({current.size(), inner_cv(mask)});
        survivors.push_back(current);
        if (current.size() == 1) {
            break;
        }
        const auto model = train_rows(table, mask, rows, weights, kind, learner);
        const std::size_t size = current.size();
        const std::size_t drop = std::min(step, size - 1);
        double largest = 0.0;
        for (double w : model.w)
            largest = std::max(largest, std::abs(w));
        // Weights within a relative 1e-9 of the smallest remaining one are
        // tied, so duplicated columns tie despite rounding in the solver.
        // Among tied features the later dictionary entry goes first.
        std::vector<std::size_t> order;
        std::vector<bool> picked(size, false);
        for (std::size_t r = 0; r < drop; ++r) {
            double smallest = std::numeric_limits<double>::infinity();
            for (std::size_t pos = 0; pos < size; ++pos)
                if (!picked[pos])
                    smallest = std::min(smallest, std::abs(model.w[pos]));
            const double limit = smallest * (1.0 + 1e-9) + 1e-12 * largest;
            std::size_t choice = size;
            for (std::size_t pos = 0; pos < size; ++pos)
                if (!picked[pos] && std::abs(model.w[pos]) <= limit && (choice == size || current[pos] > current[choice]))
                    choice = pos;
            picked[choice] = true;
            order.push_back(choice);
        }
        for (std::size_t i = 0; i < drop; ++i)
            trace.ranking.push_back({table.names[current[order[i]]], size - i, std::abs(model.w[order[i]])});
        std::vector<std::size_t> next;
        double last_weight = 0.0;
        for (std::size_t pos = 0; pos < size; ++pos) {
            if (!picked[pos]) {
                next.push_back(current[pos]);
                last_weight = std::abs(model.w[pos]);
            }
        }
        current = std::move(next);
        if (current.size() == 1) {
            trace.curve.push_back({1, inner_cv(mask_of(width, current))});
            survivors.push_back(current);
            trace.ranking.push_back({table.names[current[0]], 1, last_weight});
            break;
        }
    }
    if (trace.ranking.empty()) // a single starting feature
        trace.ranking.push_back({table.names[current[0]], 1, 0.0});

    std::size_t best = 0;
    std::optional<double> best_acc;
    for (std::size_t i = 0; i < trace.curve.size(); ++i) {
        const auto& acc = trace.curve[i].accuracy;
        if (acc && (!best_acc || *acc >= *best_acc)) {
            best = i;
            best_acc = acc;
        }
    }
    trace.selected = mask_of(width, survivors[best]);
    for (auto j : survivors[best])
        trace.selected_features.push_back(table.names[j]);
    const std::size_t removed_count = start.count() - survivors[best].size();
    trace.eliminated.assign(trace.ranking.begin(), trace.ranking.begin() + static_cast<std::ptrdiff_t>(removed_count));
    return trace;
}

RfeTrace run_rfe(const Dataset& d, ModelKind kind, const SplitPlan& plan, std::size_t step, const EvalParams& params) {
    const auto table = FeatureTable::from_dataset(d);
    if (plan.fold_of.size() != table.rows())
        throw std::invalid_argument("split plan does not match the dataset");
    std::vector<std::size_t> folds;
    for (auto r : plan.train)
        folds.push_back(plan.fold_of[r]);
    const auto weights = layer3_instance_weights(table, params.beta);
    return rfe_on_rows(table, plan.train, weights, folds, plan.folds, kind, params.learner, step,
                       FeatureMask::all(d.dictionary));
}

// ---------------------------------------------------------------------------
// Pipelines and cells

Dataset subset_dataset(const Dataset& d, std::span<const std::size_t> rows) {
    Dataset out;
    out.dictionary = d.dictionary;
    out.instances.reserve(rows.size());
    for (auto r : rows)
        out.instances.push_back(d.instances.at(r));
    return out;
}

FittedPipeline fit_pipeline(const Dataset& train, ModelKind kind, SubsetKind subset, const EvalParams& params,
                            std::uint64_t seed) {
    const auto table = FeatureTable::from_dataset(train);
    std::vector<std::size_t> rows(table.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return fit_on_table(table, rows, kind, subset, params, seed);
}

FittedPipeline fit_pipeline_rows(const Dataset& d, std::span<const std::size_t> rows, ModelKind kind,
                                 SubsetKind subset, const EvalParams& params, std::uint64_t seed) {
    return fit_on_table(FeatureTable::from_dataset(d), rows, kind, subset, params, seed);
}

std::uint64_t fold_pipeline_seed(std::uint64_t plan_seed, std::size_t fold) { return derive_seed(plan_seed, 16 + fold); }
std::uint64_t holdout_pipeline_seed(std::uint64_t plan_seed) { return derive_seed(plan_seed, 3); }

CellResult evaluate_cell(const Dataset& d, ModelKind kind, SubsetKind subset, const SplitPlan& plan,
                         const EvalParams& params, bool keep_fold_models) {
    const auto table = FeatureTable::from_dataset(d);
    if (plan.fold_of.size() != table.rows())
        throw std::invalid_argument("split plan does not match the dataset");
    CellResult cell;
    cell.model = kind;
    cell.subset = subset;

    for (std::size_t f = 0; f < plan.folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t r = 0; r < table.rows(); ++r)
            (plan.fold_of[r] == f ? test : train).push_back(r);
        if (test.empty())
            continue;
        if (!has_both_classes(table, train)) {
            cell.warnings.push_back("fold " + std::to_string(f) + " skipped: training part has a single class");
            continue;
        }
        auto fitted = fit_on_table(table, train, kind, subset, params, fold_pipeline_seed(plan.seed, f));
        const auto hits = count_correct(fitted.model, table, fitted.mask, test);
        cell.fold_accs.push_back(static_cast<double>(hits) / static_cast<double>(test.size()));
        if (keep_fold_models)
            cell.fold_models.push_back({std::move(train), std::move(fitted)});
    }
    if (!cell.fold_accs.empty()) {
        const double m = std::accumulate(cell.fold_accs.begin(), cell.fold_accs.end(), 0.0) /
                         static_cast<double>(cell.fold_accs.size());
        cell.mean_acc = m;
        if (cell.fold_accs.size() > 1) {
            double ss = 0.0;
            for (double a : cell.fold_accs)
                ss += (a - m) * (a - m);
            cell.fold_std = std::sqrt(ss / static_cast<double>(cell.fold_accs.size() - 1));
        }
    } else {
        cell.warnings.push_back("no cross-validation fold could be evaluated");
    }

    if (plan.test.empty() || !has_both_classes(table, plan.train)) {
        cell.warnings.push_back("holdout and bootstrap skipped: the split leaves no usable train/test pair");
        return cell;
    }
    const auto holdout = fit_on_table(table, plan.train, kind, subset, params, holdout_pipeline_seed(plan.seed));
    cell.holdout_acc = static_cast<double>(count_correct(holdout.model, table, holdout.mask, plan.test)) /
                       static_cast<double>(plan.test.size());
    if (subset == SubsetKind::Rfe)
        cell.selected_features = holdout.rfe->selected_features;

    // Resampled models keep the feature mask chosen on the training portion.
    const auto weights = weights_for(table, subset, params.beta);
    std::vector<double> boot_accs;
    std::size_t skipped = 0;
    for (const auto& sample : plan.bootstraps) {
        if (!has_both_classes(table, sample)) {
            ++skipped;
            continue;
        }
        const auto model = train_rows(table, holdout.mask, sample, weights, kind, params.learner);
        boot_accs.push_back(static_cast<double>(count_correct(model, table, holdout.mask, plan.test)) /
                            static_cast<double>(plan.test.size()));
    }
    if (skipped)
        cell.warnings.push_back(std::to_string(skipped) + " bootstrap resample(s) skipped: single class");
    cell.bootstraps_used = boot_accs.size();
    if (!boot_accs.empty())
        cell.ci = std::make_pair(percentile(boot_accs, 0.025), percentile(boot_accs, 0.975));
    return cell;
}

ExperimentReport run_table1_grid(const Dataset& d, std::uint64_t seed, const EvalParams& params) {
    ExperimentReport report;
    report.seed = seed;
    report.params = params;
    report.instances = d.instances.size();
    const auto plan = make_split_plan(d, seed, params.folds, params.bootstraps);
    report.train_size = plan.train.size();
    report.test_size = plan.test.size();
    report.folds = plan.folds;
    report.warnings = plan.warnings;
    for (auto kind : {ModelKind::Fda, ModelKind::Svm}) {
        for (auto subset : {SubsetKind::L1L2, SubsetKind::All, SubsetKind::Rfe}) {
            auto cell = evaluate_cell(d, kind, subset, plan, params);
            for (const auto& w : cell.warnings)
                report.warnings.push_back(std::string(to_string(kind)) + "/" + std::string(to_string(subset)) +
                                          ": " + w);
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

ordered_json optional_number(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

} // namespace

ordered_json report_to_json(const ExperimentReport& report) {
    ordered_json j;
    j["schema_version"] = "1";
    j["seed"] = report.seed;
    ordered_json config;
    config["folds"] = report.params.folds;
    config["bootstraps"] = report.params.bootstraps;
    config["beta"] = report.params.beta;
    config["C"] = report.params.learner.svm.c;
    config["tol"] = report.params.learner.svm.tol;
    config["max_iter"] = report.params.learner.svm.max_epochs;
    config["lambda"] = report.params.learner.fda.ridge;
    config["rfe_step"] = report.params.rfe_step;
    j["config"] = std::move(config);
    ordered_json split;
    split["instances"] = report.instances;
    split["train"] = report.train_size;
    split["test"] = report.test_size;
    split["cv_folds"] = report.folds;
    j["split"] = std::move(split);
    ordered_json cells = ordered_json::array();
    for (const auto& c : report.cells) {
        ordered_json cell;
        cell["model"] = to_string(c.model);
        cell["subset"] = to_string(c.subset);
        cell["mean_acc"] = optional_number(c.mean_acc);
        cell["fold_std"] = c.fold_std;
        cell["fold_accs"] = c.fold_accs;
        cell["holdout_acc"] = optional_number(c.holdout_acc);
        cell["ci"] = c.ci ? ordered_json::array({c.ci->first, c.ci->second}) : ordered_json(nullptr);
        cell["bootstraps_used"] = c.bootstraps_used;
        if (c.subset == SubsetKind::Rfe)
            cell["selected_features"] = c.selected_features;
        cells.push_back(std::move(cell));
    }
    j["cells"] = std::move(cells);
    j["warnings"] = report.warnings;
    return j;
}

std::string format_accuracy(std::optional<double> acc) {
    if (!acc)
        return "-";
    const long hundredths = std::lround(*acc * 100.0);
    if (hundredths >= 100)
        return "1.00";
    char buf[8];
    std::snprintf(buf, sizeof buf, ".%02ld", std::max(0L, hundredths));
    return buf;
}

std::string render_table(const ExperimentReport& report) {
    auto find = [&](ModelKind kind, SubsetKind subset) -> const CellResult* {
        for (const auto& c : report.cells)
            if (c.model == kind && c.subset == subset)
                return &c;
        return nullptr;
    };
    std::ostringstream out;
    auto block = [&](const char* title, bool holdout) {
        char line[96];
        std::snprintf(line, sizeof line, "%-18s%7s%7s%7s\n", title, "L1+L2", "all", "RFE");
        out << line;
        for (auto kind : {ModelKind::Fda, ModelKind::Svm}) {
            std::string row[3];
            int i = 0;
            for (auto subset : {SubsetKind::L1L2, SubsetKind::All, SubsetKind::Rfe}) {
                const auto* c = find(kind, subset);
                row[i++] = format_accuracy(c ? (holdout ? c->holdout_acc : c->mean_acc) : std::nullopt);
            }
            std::snprintf(line, sizeof line, "%-18s%7s%7s%7s\n", kind == ModelKind::Fda ? "FDA" : "SVM",
                          row[0].c_str(), row[1].c_str(), row[2].c_str());
            out << line;
        }
    };
    out << "Accuracy by model and feature subset (seed " << report.seed << ", " << report.instances
        << " instances)\n\n";
    block("cross-validation", false);
    out << '\n';
    block("holdout", true);
    return out.str();
}

} // namespace vulnscore
