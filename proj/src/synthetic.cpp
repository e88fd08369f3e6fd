#include "vulnscore/synthetic.hpp"

#include "vulnscore/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace vulnscore {

namespace {

struct CountScale {
    const char* name;
    double center;
    double spread;
};

// Typical magnitudes for the count features; anything unlisted uses {1, 1.2}.
constexpr CountScale kCountScales[] = {
    {"l2.safe_lib_calls", 5, 4},     {"l2.branch_count", 120, 60}, {"l2.branch_max_depth", 4, 1.5},
    {"l2.loop_count", 40, 20},       {"l2.alloc_calls", 15, 8},    {"l2.sloc", 3000, 1500},
    {"l2.recursive_fns", 2, 1.5},    {"l2.unsafe_lib_calls", 10, 6}, {"l3.code_age_months", 90, 40},
    {"l3.committers", 12, 8},        {"l3.exploit_history", 2, 1.5},
};

CountScale count_scale(const std::string& name) {
    for (const auto& s : kCountScales)
        if (name == s.name)
            return s;
    return {"", 1.0, 1.2};
}

double map_latent(const FeatureDescriptor& d, double z) {
    switch (d.kind) {
    case FeatureKind::Binary:
        return z > 0.0 ? 1.0 : 0.0;
    case FeatureKind::Ordinal: {
        const double lo = d.ordinal_min, hi = d.ordinal_max;
        const double v = std::round((lo + hi) / 2.0 + z * (hi - lo) / 4.0);
        return std::clamp(v, lo, hi);
    }
    case FeatureKind::Count: {
        const auto s = count_scale(d.name);
        return std::max(0.0, std::round(s.center + s.spread * z));
    }
    case FeatureKind::Continuous:
        return z;
    }
    return z;
}

std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty())
            out += ',';
        out += n;
    }
    return out;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace

std::size_t synth_vulnerable_count(const SynthOptions& options) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(options.instances) * options.vulnerable_fraction + 0.5));
}

const std::vector<std::string>& informative_l3_features() {
    static const std::vector<std::string> names{"l3.popularity_program", "l3.popularity_platform",
                                                "l3.dev_reputation", "l3.security_related", "l3.exploit_history"};
    return names;
}

Dataset generate_corpus(std::uint64_t seed, const SynthOptions& options) {
    if (options.instances < 2)
        throw std::invalid_argument("a corpus needs at least 2 instances");
    if (!(options.l3_missing_rate >= 0.0 && options.l3_missing_rate < 1.0))
        throw std::invalid_argument("l3 missing rate must lie in [0, 1)");
    const std::size_t n = options.instances;
    const std::size_t vulnerable = synth_vulnerable_count(options);
    if (vulnerable == 0 || vulnerable >= n)
        throw std::invalid_argument("vulnerable fraction leaves one class empty");

    Dataset d;
    d.dictionary = default_dictionary();
    const auto& informative = informative_l3_features();

    std::vector<double> delta;
    for (const auto& f : d.dictionary) {
        if (f.layer != Layer::L3)
            delta.push_back(options.weak_signal);
        else if (options.informative_l3 &&
                 std::find(informative.begin(), informative.end(), f.name) != informative.end())
            delta.push_back(options.strong_signal);
        else
            delta.push_back(0.0);
    }

    std::vector<Label> labels(n, Label::BenignFlaw);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(vulnerable), Label::Vulnerable);
    Rng order(derive_seed(seed, 0));
    order.shuffle(std::span<Label>(labels));

    const std::string planted = options.informative_l3 ? join(informative) : "";
    const std::string signal = "l1=" + format_number(options.weak_signal) + ",l2=" +
                               format_number(options.weak_signal) +
                               ",l3=" + format_number(options.informative_l3 ? options.strong_signal : 0.0);

    Rng values(derive_seed(seed, 1));
    for (std::size_t i = 0; i < n; ++i) {
        Instance inst;
        char id[32];
        std::snprintf(id, sizeof id, "syn-%04zu", i + 1);
        inst.id = id;
        inst.label = labels[i];
        const double y = labels[i] == Label::Vulnerable ? 1.0 : -1.0;
        for (std::size_t j = 0; j < d.dictionary.size(); ++j) {
            const auto& f = d.dictionary[j];
            const double z = delta[j] * y + values.normal();
            const bool missing = f.layer == Layer::L3 && values.uniform() < options.l3_missing_rate;
            if (!missing)
                inst.features.set(f.name, map_latent(f, z));
        }
        inst.provenance["generator"] = "synthetic-corpus";
        inst.provenance["seed"] = std::to_string(seed);
        inst.provenance["informative_features"] = planted;
        inst.provenance["signal"] = signal;
        d.instances.push_back(std::move(inst));
    }

    if (options.shuffle_labels) {
        std::vector<Label> permuted;
        for (const auto& inst : d.instances)
            permuted.push_back(inst.label);
        Rng mix(derive_seed(seed, 2));
        mix.shuffle(std::span<Label>(permuted));
        for (std::size_t i = 0; i < n; ++i) {
            d.instances[i].label = permuted[i];
            d.instances[i].provenance["labels"] = "shuffled";
        }
    }
    return d;
}

Dataset generate_planted_linear(std::uint64_t seed, const PlantedOptions& options) {
    const std::size_t p = options.informative + options.noise;
    if (p == 0 || options.instances < 2)
        throw std::invalid_argument("planted corpus needs features and at least 2 instances");

    Dataset d;
    for (std::size_t j = 0; j < p; ++j) {
        char name[32];
        std::snprintf(name, sizeof name, "l2.f%02zu", j + 1);
        d.dictionary.append({name, Layer::L2, FeatureKind::Continuous, "planted feature", 0, 0});
    }
    Rng rng(derive_seed(seed, 0));
    std::vector<std::size_t> positions(p);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(positions));
    std::vector<bool> informative(p, false);
    for (std::size_t k = 0; k < options.informative; ++k)
        informative[positions[k]] = true;
    std::vector<std::string> planted;
    for (std::size_t j = 0; j < p; ++j)
        if (informative[j])
            planted.push_back(d.dictionary[j].name);
    const std::string planted_list = join(planted);

    Rng values(derive_seed(seed, 1));
    for (std::size_t i = 0; i < options.instances; ++i) {
        Instance inst;
        char id[32];
        std::snprintf(id, sizeof id, "pl-%04zu", i + 1);
        inst.id = id;
        double score = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double x = values.normal();
            inst.features.set(d.dictionary[j].name, x);
            if (informative[j])
                score += x;
        }
        score += options.label_noise * values.normal();
        inst.label = score >= 0.0 ? Label::Vulnerable : Label::BenignFlaw;
        inst.provenance["generator"] = "planted-linear";
        inst.provenance["seed"] = std::to_string(seed);
        inst.provenance["informative_features"] = planted_list;
        d.instances.push_back(std::move(inst));
    }
    return d;
}

std::vector<std::string> recorded_informative_features(const Dataset& d) {
    std::vector<std::string> out;
    if (d.instances.empty())
        return out;
    const auto it = d.instances.front().provenance.find("informative_features");
    if (it == d.instances.front().provenance.end())
        return out;
    std::string current;
    for (char c : it->second) {
        if (c == ',') {
            if (!current.empty())
                out.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    if (!current.empty())
        out.push_back(current);
    return out;
}

} // namespace vulnscore
