#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vulnscore/features.hpp"

namespace vulnscore {

enum class ModelKind { Fda, Svm };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Selects active features by dictionary position.
class FeatureMask {
public:
    FeatureMask() = default;
    explicit FeatureMask(std::vector<bool> bits) : bits_(std::move(bits)) {}

    static FeatureMask all(const FeatureDictionary& dictionary);
    static FeatureMask none(const FeatureDictionary& dictionary);
    static FeatureMask layers(const FeatureDictionary& dictionary, std::initializer_list<Layer> layers);
    /// Throws UnknownFeatureError for a name missing from the dictionary.
    static FeatureMask from_names(const FeatureDictionary& dictionary, std::span<const std::string> names);

    std::size_t size() const noexcept { return bits_.size(); }
    std::size_t count() const noexcept;
    bool test(std::size_t i) const { return bits_[i]; }
    void set(std::size_t i, bool on = true) { bits_[i] = on; }
    std::vector<std::size_t> indices() const;
    std::vector<std::string> names(const FeatureDictionary& dictionary) const;

    bool operator==(const FeatureMask&) const = default;

private:
    std::vector<bool> bits_;
};

/// Dense view of a dataset in dictionary column order. NaN marks a missing value.
struct FeatureTable {
    std::vector<std::string> names;
    std::vector<Layer> layers;
    Eigen::MatrixXd values;
    Eigen::VectorXd labels; // +1 vulnerable, -1 benign_flaw

    static FeatureTable from_dataset(const Dataset& dataset);
    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

/// Training input: imputed raw values for the active features.
struct DesignMatrix {
    std::vector<std::string> features;
    std::vector<std::size_t> columns; // dictionary positions of `features`
    Eigen::MatrixXd x;
    Eigen::VectorXd y;       // +1 vulnerable, -1 benign_flaw
    Eigen::VectorXd weights; // positive instance weights
    std::vector<double> imputation; // per-feature mean of the observed training values

    std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
};

/// All instances, unit weights. Throws ModelError on an empty mask or a
/// single-class dataset.
DesignMatrix build_design_matrix(const Dataset& dataset, const FeatureMask& mask);

/// Rows of `table` in the given order. `weights`, when non-empty, is indexed
/// by table row. Imputation means are computed over `rows` only.
DesignMatrix build_design_matrix(const FeatureTable& table, const FeatureMask& mask,
                                 std::span<const std::size_t> rows, std::span<const double> weights = {});

/// weight_i = 1 + beta * (nonzero L3 features of instance i) / (L3 features in dictionary).
/// Throws std::invalid_argument for negative beta.
std::vector<double> layer3_instance_weights(const Dataset& dataset, double beta = 1.0);
std::vector<double> layer3_instance_weights(const FeatureTable& table, double beta = 1.0);

/// Per-column z-scoring fit on training rows (population standard deviation).
/// Columns without spread are flagged and map to 0.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<bool> zero_var;

    static Standardizer fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
    double transform_value(std::size_t column, double raw) const;
    /// Inverse of transform_value on non-flagged columns.
    double inverse_value(std::size_t column, double z) const;

    bool operator==(const Standardizer&) const = default;
};

struct FdaOptions {
    double ridge = 1e-6;
};

struct SvmOptions {
    double c = 1.0;
    double tol = 1e-6;
    long max_epochs = 10000;
};

struct TrainingInfo {
    bool converged = true;
    long epochs = 0;
    // SVM only: dual objective sum(alpha) - |w_aug|^2 / 2, final maximal
    // projected-gradient violation and the dual coefficients (not serialized).
    double dual_objective = 0.0;
    double max_violation = 0.0;
    std::vector<double> dual_coefficients;
};

/// decision(x) = w . standardize(impute(x)) + b; vulnerable iff decision >= 0.
struct TrainedModel {
    ModelKind kind = ModelKind::Fda;
    std::vector<std::string> features;
    std::vector<double> w;
    double b = 0.0;
    Standardizer standardizer;
    std::vector<double> imputation;
    std::map<std::string, double> hyperparams;
    TrainingInfo training;

    /// Missing or absent features take the imputation value.
    double decision_value(const FeatureVector& x) const;
    /// `raw` is aligned with `features`; NaN entries take the imputation value.
    double decision_value(std::span<const double> raw) const;
    Label predict(const FeatureVector& x) const;
    Label predict(std::span<const double> raw) const;

    /// Weights expressed on the raw feature scale (w_j / sd_j, 0 when flagged).
    std::vector<double> raw_weights() const;
};

Label label_for_decision(double decision);

/// Fisher discriminant on standardized data:
/// (S_W + ridge * trace(S_W) / p * I) w = mu+ - mu-, with instance-weighted
/// means and scatter; w has unit norm and the threshold sits at the midpoint
/// of the projected class means.
TrainedModel train_fda(const DesignMatrix& m, const FdaOptions& options = {});

struct SvmDualSolution {
    Eigen::VectorXd alpha;
    Eigen::VectorXd w; // length p + 1, last entry is the bias
    long epochs = 0;
    bool converged = false;
    double max_violation = 0.0;
    double objective = 0.0;
};

/// Dual coordinate ascent for the L1-loss linear SVM with a regularized
/// bias (each row of `z` is augmented with a constant 1) and box
/// constraints 0 <= alpha_i <= upper_i. Coordinates are visited in index
/// order; stops once the maximal projected-gradient violation is <= tol.
SvmDualSolution solve_svm_dual(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& upper, double tol, long max_epochs);

/// Weighted soft-margin linear SVM: upper_i = C * weight_i. Non-convergence
/// is reported through `training.converged`, not an exception.
TrainedModel train_svm(const DesignMatrix& m, const SvmOptions& options = {});

struct LearnerOptions {
    FdaOptions fda;
    SvmOptions svm;
};

TrainedModel train_model(ModelKind kind, const DesignMatrix& m, const LearnerOptions& options = {});

nlohmann::ordered_json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& doc);
TrainedModel load_model(const std::filesystem::path& path);
void save_model(const TrainedModel& model, const std::filesystem::path& path);

} // namespace vulnscore
