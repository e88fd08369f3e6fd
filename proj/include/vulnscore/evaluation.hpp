#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vulnscore/features.hpp"
#include "vulnscore/linear_model.hpp"

namespace vulnscore {

enum class SubsetKind { L1L2, All, Rfe };

std::string_view to_string(SubsetKind subset);
SubsetKind parse_subset_kind(std::string_view text);

struct EvalParams {
    LearnerOptions learner;
    double beta = 1.0;          // layer-3 instance weight strength (unused by the L1+L2 subset)
    std::size_t folds = 10;
    std::size_t bootstraps = 100;
    std::size_t rfe_step = 1;
};

/// Holdout split, stratified fold assignment over every instance and
/// bootstrap resamples of the training portion.
struct SplitPlan {
    std::uint64_t seed = 0;
    std::size_t folds = 0;            // effective fold count
    std::vector<std::size_t> train;   // ascending instance indices
    std::vector<std::size_t> test;    // ascending instance indices
    std::vector<std::size_t> fold_of; // fold id per instance
    std::vector<std::vector<std::size_t>> bootstraps; // each of size train.size(), drawn from train
    std::vector<std::string> warnings;
};

/// Fold count actually used: min(requested, smaller class size), never below 2.
std::size_t effective_folds(std::size_t positives, std::size_t negatives, std::size_t requested);

/// Stratified assignment of `labels` (+1 / -1) to `k` folds: each class is
/// shuffled and dealt round-robin, the fold counter carrying over from the
/// vulnerable class to the benign one.
std::vector<std::size_t> stratified_folds(std::span<const double> labels, std::size_t k, std::uint64_t seed);

/// Throws ModelError for an empty or single-class dataset.
SplitPlan make_split_plan(const Dataset& d, std::uint64_t seed, std::size_t folds = 10, std::size_t bootstraps = 100);

struct RfeEntry {
    std::string feature;
    std::size_t rank = 0;  // 1 = most important
    double abs_weight = 0; // |w| in the standardized space when the feature was ranked
};

struct RfePoint {
    std::size_t size = 0;
    std::optional<double> accuracy; // pooled inner-CV accuracy; empty if no fold was usable
};

struct RfeTrace {
    std::vector<RfeEntry> ranking;    // every feature in elimination order; the last survivor comes last
    std::vector<RfeEntry> eliminated; // prefix of `ranking` removed before the selected size
    FeatureMask selected;
    std::vector<std::string> selected_features;
    std::vector<RfePoint> curve; // one point per visited size, largest first
};

/// RFE on table rows `rows` with fold ids `fold_of_row` (aligned with rows).
/// `weights` is indexed by table row and may be empty for unit weights.
RfeTrace rfe_on_rows(const FeatureTable& table, std::span<const std::size_t> rows, std::span<const double> weights,
                     std::span<const std::size_t> fold_of_row, std::size_t k, ModelKind kind,
                     const LearnerOptions& learner, std::size_t step, const FeatureMask& start);

/// RFE over the plan's training portion, scoring each size by CV over the
/// plan's folds restricted to that portion. Starts from all features.
RfeTrace run_rfe(const Dataset& d, ModelKind kind, const SplitPlan& plan, std::size_t step = 1,
                 const EvalParams& params = {});

/// Everything fitted on one training set.
struct FittedPipeline {
    SubsetKind subset = SubsetKind::All;
    FeatureMask mask;
    TrainedModel model;
    std::optional<RfeTrace> rfe;
};

/// Fits mask, imputation, standardizer and model using `train` alone. The
/// RFE subset draws its inner folds from `seed`.
FittedPipeline fit_pipeline(const Dataset& train, ModelKind kind, SubsetKind subset, const EvalParams& params,
                            std::uint64_t seed);

/// Same as fit_pipeline on the instances `rows` of `d`, in that order.
FittedPipeline fit_pipeline_rows(const Dataset& d, std::span<const std::size_t> rows, ModelKind kind,
                                 SubsetKind subset, const EvalParams& params, std::uint64_t seed);

/// Copy of the instances at `rows`, sharing the dictionary.
Dataset subset_dataset(const Dataset& d, std::span<const std::size_t> rows);

struct FoldModel {
    std::vector<std::size_t> train_rows;
    FittedPipeline pipeline;
};

struct CellResult {
    ModelKind model = ModelKind::Fda;
    SubsetKind subset = SubsetKind::All;
    std::optional<double> mean_acc; // mean CV accuracy over usable folds
    double fold_std = 0.0;          // sample std of the fold accuracies
    std::vector<double> fold_accs;
    std::optional<double> holdout_acc;              // trained on plan.train, scored on plan.test
    std::optional<std::pair<double, double>> ci;    // bootstrap 2.5 / 97.5 percentiles
    std::size_t bootstraps_used = 0;
    std::vector<std::string> selected_features;     // RFE only, fitted on plan.train
    std::vector<std::string> warnings;
    std::vector<FoldModel> fold_models;             // only when requested
};

/// Seeds for the fold-internal pipelines (derived from plan.seed).
std::uint64_t fold_pipeline_seed(std::uint64_t plan_seed, std::size_t fold);
std::uint64_t holdout_pipeline_seed(std::uint64_t plan_seed);

CellResult evaluate_cell(const Dataset& d, ModelKind kind, SubsetKind subset, const SplitPlan& plan,
                         const EvalParams& params = {}, bool keep_fold_models = false);

struct ExperimentReport {
    std::uint64_t seed = 0;
    EvalParams params;
    std::size_t instances = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t folds = 0;
    std::vector<CellResult> cells; // FDA then SVM; L1+L2, all, RFE within each
    std::vector<std::string> warnings;
};

ExperimentReport run_table1_grid(const Dataset& d, std::uint64_t seed, const EvalParams& params = {});

nlohmann::ordered_json report_to_json(const ExperimentReport& report);

/// Accuracy as ".63"; "1.00" for a perfect score; "-" when absent.
std::string format_accuracy(std::optional<double> acc);

/// Two-row text table (FDA, SVM) by (L1+L2, all, RFE) for CV and holdout accuracy.
std::string render_table(const ExperimentReport& report);

} // namespace vulnscore
