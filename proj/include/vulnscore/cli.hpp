#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace vulnscore::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes shared by every command.
enum ExitCode : int { kOk = 0, kModelError = 1, kIoError = 2, kValidationError = 3 };

/// Settings loadable through `--config FILE`; command-line flags override them.
struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::string model = "svm";
    std::string subset = "all";
    double beta = 1.0;
    double c = 1.0;
    double lambda = 1e-6;
    double tol = 1e-6;
    long max_iter = 10000;
    std::size_t rfe_step = 1;
    std::size_t folds = 10;
    std::size_t bootstraps = 100;
    bool binarize_l1 = false;
    std::string source;
    std::vector<std::string> findings;
    std::string manifest;
    std::string dataset;
    std::string model_file;
    std::string out;
    std::string table;
};

/// Accepts exactly the keys seed, model, subset, beta, C, lambda, tol,
/// max_iter, rfe_step, folds, bootstraps, binarize_l1, source, findings,
/// manifest, dataset, model_file, out, table. Throws UnknownKeyError or
/// ValidationError.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Throws ValidationError when a value is outside its documented range.
void validate_run_config(const RunConfig& config);

/// Full command-line entry point. JSON results go to `out`, warnings and
/// errors to `err`. Returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace vulnscore::cli
