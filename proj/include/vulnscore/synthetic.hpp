#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vulnscore/features.hpp"

namespace vulnscore {

/// Corpus over the default dictionary. Each feature is driven by a latent
/// z = delta * y + N(0, 1) (y = +1 vulnerable, -1 benign) and then mapped onto
/// the feature's kind. L1/L2 features get `weak_signal` as delta; the
/// informative L3 features get `strong_signal` when `informative_l3` is set.
struct SynthOptions {
    std::size_t instances = 75;
    double vulnerable_fraction = 2.0 / 3.0;
    bool informative_l3 = true;
    bool shuffle_labels = false; // permute labels after generation (chance-level control)
    double weak_signal = 0.15;
    double strong_signal = 1.0;
    double l3_missing_rate = 0.1;
};

/// Number of vulnerable instances: round(instances * vulnerable_fraction), half up.
std::size_t synth_vulnerable_count(const SynthOptions& options);

/// The L3 features that carry the strong signal.
const std::vector<std::string>& informative_l3_features();

/// Throws std::invalid_argument for fewer than 2 instances or a fraction
/// that leaves a class empty.
Dataset generate_corpus(std::uint64_t seed, const SynthOptions& options = {});

/// Planted linear signal: `informative + noise` continuous features
/// (`l2.f01`...), label = sign(sum of the informative features + 0.5 * noise).
/// Informative positions are drawn from the seed and recorded in provenance
/// under "informative_features".
struct PlantedOptions {
    std::size_t instances = 200;
    std::size_t informative = 5;
    std::size_t noise = 15;
    double label_noise = 0.5;
};

Dataset generate_planted_linear(std::uint64_t seed, const PlantedOptions& options = {});

/// Names of the informative features recorded by either generator.
std::vector<std::string> recorded_informative_features(const Dataset& d);

} // namespace vulnscore
