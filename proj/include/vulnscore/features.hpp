#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace vulnscore {

enum class Layer { L1, L2, L3 };
enum class FeatureKind { Count, Binary, Ordinal, Continuous };
enum class Label { Vulnerable, BenignFlaw };

std::string_view to_string(Layer layer);
std::string_view to_string(FeatureKind kind);
std::string_view to_string(Label label);
Layer parse_layer(std::string_view text);
FeatureKind parse_feature_kind(std::string_view text);
Label parse_label(std::string_view text);

struct FeatureDescriptor {
    std::string name;
    Layer layer = Layer::L1;
    FeatureKind kind = FeatureKind::Count;
    std::string description;
    // Inclusive bounds, meaningful for ordinal features only.
    int ordinal_min = 0;
    int ordinal_max = 0;

    bool operator==(const FeatureDescriptor&) const = default;
};

/// Ordered, name-unique list of feature descriptors.
///
/// Names follow `l[123].[a-z0-9_]+` and their prefix must agree with the
/// declared layer. Appending never reorders existing entries.
class FeatureDictionary {
public:
    FeatureDictionary() = default;
    explicit FeatureDictionary(std::vector<FeatureDescriptor> descriptors);

    /// Throws SchemaError on a malformed or duplicate name.
    void append(FeatureDescriptor descriptor);

    std::size_t size() const noexcept { return descriptors_.size(); }
    bool empty() const noexcept { return descriptors_.empty(); }
    const FeatureDescriptor& operator[](std::size_t i) const { return descriptors_[i]; }
    std::optional<std::size_t> index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return index_of(name).has_value(); }
    const FeatureDescriptor* find(std::string_view name) const;

    auto begin() const noexcept { return descriptors_.begin(); }
    auto end() const noexcept { return descriptors_.end(); }

    std::vector<std::string> names() const;
    std::size_t count_in_layer(Layer layer) const;

    bool operator==(const FeatureDictionary& other) const {
        return descriptors_ == other.descriptors_;
    }

private:
    std::vector<FeatureDescriptor> descriptors_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// True when `name` matches `l[123].[a-z0-9_]+`.
bool is_valid_feature_name(std::string_view name);

/// The canonical 25-feature dictionary: 6 L1, then 9 L2, then 10 L3.
FeatureDictionary default_dictionary();

/// Sparse feature values keyed by name. Absent keys mean "missing".
class FeatureVector {
public:
    using Map = std::map<std::string, double, std::less<>>;

    FeatureVector() = default;
    FeatureVector(std::initializer_list<Map::value_type> init) : values_(init) {}

    void set(std::string name, double value) { values_[std::move(name)] = value; }
    std::optional<double> get(std::string_view name) const;
    bool contains(std::string_view name) const { return values_.find(name) != values_.end(); }
    void erase(std::string_view name);
    /// Copies every entry of `other`, overwriting duplicates.
    void merge(const FeatureVector& other);

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

    bool operator==(const FeatureVector&) const = default;

private:
    Map values_;
};

struct Instance {
    std::string id;
    Label label = Label::Vulnerable;
    FeatureVector features;
    std::map<std::string, std::string> provenance;

    bool operator==(const Instance&) const = default;
};

struct Dataset {
    FeatureDictionary dictionary;
    std::vector<Instance> instances;

    std::size_t count(Label label) const;
    bool operator==(const Dataset&) const = default;
};

struct Violation {
    std::string instance_id;
    std::string feature; // empty for instance-level rules
    std::string rule;

    bool operator==(const Violation&) const = default;
};

/// Checks every instance against the dictionary's kind rules and id uniqueness.
std::vector<Violation> validate_dataset(const Dataset& dataset);

/// Checks a single feature value against its descriptor; empty when valid.
std::optional<std::string> check_feature_value(const FeatureDescriptor& descriptor, double value);

nlohmann::ordered_json dataset_to_json(const Dataset& dataset);
/// Throws SchemaVersionError, UnknownFeatureError or SchemaError.
Dataset dataset_from_json(const nlohmann::json& document);

/// Throws IoError, FormatError (malformed JSON) or a SchemaError subtype.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Parses JSON text, converting parser failures into FormatError.
nlohmann::json parse_json_text(std::string_view text);

} // namespace vulnscore
