#include "vulnscore/features.hpp"

#include "vulnscore/error.hpp"
#include "vulnscore/file_io.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vulnscore {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Layer layer) {
    switch (layer) {
    case Layer::L1: return "L1";
    case Layer::L2: return "L2";
    case Layer::L3: return "L3";
    }
    return "L1";
}

std::string_view to_string(FeatureKind kind) {
    switch (kind) {
    case FeatureKind::Count: return "count";
    case FeatureKind::Binary: return "binary";
    case FeatureKind::Ordinal: return "ordinal";
    case FeatureKind::Continuous: return "continuous";
    }
    return "count";
}

std::string_view to_string(Label label) {
    return label == Label::Vulnerable ? "vulnerable" : "benign_flaw";
}

Layer parse_layer(std::string_view text) {
    if (text == "L1") return Layer::L1;
    if (text == "L2") return Layer::L2;
    if (text == "L3") return Layer::L3;
    throw SchemaError("invalid layer '" + std::string(text) + "'");
}

FeatureKind parse_feature_kind(std::string_view text) {
    if (text == "count") return FeatureKind::Count;
    if (text == "binary") return FeatureKind::Binary;
    if (text == "ordinal") return FeatureKind::Ordinal;
    if (text == "continuous") return FeatureKind::Continuous;
    throw SchemaError("invalid feature kind '" + std::string(text) + "'");
}

Label parse_label(std::string_view text) {
    if (text == "vulnerable") return Label::Vulnerable;
    if (text == "benign_flaw") return Label::BenignFlaw;
    throw SchemaError("invalid label '" + std::string(text) + "'");
}

bool is_valid_feature_name(std::string_view name) {
    if (name.size() < 4 || name[0] != 'l' || name[2] != '.')
        return false;
    if (name[1] < '1' || name[1] > '3')
        return false;
    return std::all_of(name.begin() + 3, name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

FeatureDictionary::FeatureDictionary(std::vector<FeatureDescriptor> descriptors) {
    descriptors_.reserve(descriptors.size());
    for (auto& d : descriptors)
        append(std::move(d));
}

void FeatureDictionary::append(FeatureDescriptor descriptor) {
    if (!is_valid_feature_name(descriptor.name))
        throw SchemaError("invalid feature name '" + descriptor.name + "'");
    const auto expected = static_cast<Layer>(descriptor.name[1] - '1');
    if (expected != descriptor.layer)
        throw SchemaError("feature '" + descriptor.name + "' declares layer " +
                          std::string(to_string(descriptor.layer)) +
                          " but its prefix says " + std::string(to_string(expected)));
    if (descriptor.kind == FeatureKind::Ordinal && descriptor.ordinal_min > descriptor.ordinal_max)
        throw SchemaError("feature '" + descriptor.name + "' has an empty ordinal range");
    if (index_.count(descriptor.name))
        throw SchemaError("duplicate feature '" + descriptor.name + "'");
    index_.emplace(descriptor.name, descriptors_.size());
    descriptors_.push_back(std::move(descriptor));
}

std::optional<std::size_t> FeatureDictionary::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

const FeatureDescriptor* FeatureDictionary::find(std::string_view name) const {
    auto idx = index_of(name);
    return idx ? &descriptors_[*idx] : nullptr;
}

std::vector<std::string> FeatureDictionary::names() const {
    std::vector<std::string> out;
    out.reserve(descriptors_.size());
    for (const auto& d : descriptors_)
        out.push_back(d.name);
    return out;
}

std::size_t FeatureDictionary::count_in_layer(Layer layer) const {
    return static_cast<std::size_t>(std::count_if(
        descriptors_.begin(), descriptors_.end(),
        [layer](const FeatureDescriptor& d) { return d.layer == layer; }));
}

FeatureDictionary default_dictionary() {
    using K = FeatureKind;
    auto count = [](const char* name, Layer layer, const char* text) {
        return FeatureDescriptor{name, layer, K::Count, text, 0, 0};
    };
    auto binary = [](const char* name, Layer layer, const char* text) {
        return FeatureDescriptor{name, layer, K::Binary, text, 0, 1};
    };
    auto ordinal = [](const char* name, int hi, const char* text) {
        return FeatureDescriptor{name, Layer::L3, K::Ordinal, text, 0, hi};
    };
    static const FeatureDictionary canonical({
        count("l1.buffer_write", Layer::L1, "analyzer findings: write operations on buffers"),
        count("l1.null_deref", Layer::L1, "analyzer findings: NULL pointer dereferences"),
        count("l1.use_after_free", Layer::L1, "analyzer findings: access to possibly deallocated storage"),
        count("l1.memory_leak", Layer::L1, "analyzer findings: memory leaks"),
        count("l1.stack_return", Layer::L1, "analyzer findings: pointer to stack storage returned"),
        count("l1.use_before_def", Layer::L1, "analyzer findings: value used before definition"),
        count("l2.safe_lib_calls", Layer::L2, "calls to bounds-checking string routines"),
        count("l2.branch_count", Layer::L2, "if, case and ternary branch points"),
        count("l2.branch_max_depth", Layer::L2, "deepest if nesting"),
        count("l2.loop_count", Layer::L2, "for, while and do loops"),
        binary("l2.is_server", Layer::L2, "server (1) or client (0) application"),
        count("l2.alloc_calls", Layer::L2, "calls to malloc, calloc and realloc"),
        count("l2.sloc", Layer::L2, "source lines containing code"),
        count("l2.recursive_fns", Layer::L2, "functions on a call-graph cycle"),
        count("l2.unsafe_lib_calls", Layer::L2, "calls to unchecked string routines"),
        count("l3.code_age_months", Layer::L3, "whole months since first release"),
        count("l3.committers", Layer::L3, "number of committers"),
        ordinal("l3.popularity_program", 4, "popularity of the program (0-4)"),
        ordinal("l3.popularity_platform", 4, "popularity of the platform (0-4)"),
        ordinal("l3.platform_kind", 3, "other=0, embedded=1, desktop=2, server=3"),
        ordinal("l3.dev_reputation", 4, "reputation of the developers (0-4)"),
        binary("l3.security_related", Layer::L3, "related to security applications"),
        ordinal("l3.code_status", 2, "abandoned=0, maintenance=1, active=2"),
        binary("l3.is_legacy", Layer::L3, "legacy (1) or under development (0)"),
        count("l3.exploit_history", Layer::L3, "prior published advisories"),
    });
    return canonical;
}

std::optional<double> FeatureVector::get(std::string_view name) const {
    auto it = values_.find(name);
    if (it == values_.end())
        return std::nullopt;
    return it->second;
}

void FeatureVector::erase(std::string_view name) {
    auto it = values_.find(name);
    if (it != values_.end())
        values_.erase(it);
}

void FeatureVector::merge(const FeatureVector& other) {
    for (const auto& [k, v] : other)
        values_[k] = v;
}

std::size_t Dataset::count(Label label) const {
    return static_cast<std::size_t>(std::count_if(
        instances.begin(), instances.end(),
        [label](const Instance& i) { return i.label == label; }));
}

std::optional<std::string> check_feature_value(const FeatureDescriptor& d, double value) {
    if (!std::isfinite(value))
        return "value must be finite";
    const bool integral = std::floor(value) == value;
    switch (d.kind) {
    case FeatureKind::Count:
        if (value < 0)
            return "count must be non-negative";
        if (!integral)
            return "count must be an integer";
        break;
    case FeatureKind::Binary:
        if (value != 0.0 && value != 1.0)
            return "binary must be 0 or 1";
        break;
    case FeatureKind::Ordinal:
        if (!integral)
            return "ordinal must be an integer";
        if (value < d.ordinal_min || value > d.ordinal_max)
            return "ordinal out of range [" + std::to_string(d.ordinal_min) + ", " +
                   std::to_string(d.ordinal_max) + "]";
        break;
    case FeatureKind::Continuous:
        break;
    }
    return std::nullopt;
}

std::vector<Violation> validate_dataset(const Dataset& dataset) {
    std::vector<Violation> out;
    std::set<std::string> seen;
    for (const auto& inst : dataset.instances) {
        if (inst.id.empty())
            out.push_back({inst.id, "", "instance id must not be empty"});
        else if (!seen.insert(inst.id).second)
            out.push_back({inst.id, "", "duplicate instance id"});
        for (const auto& [name, value] : inst.features) {
            const auto* d = dataset.dictionary.find(name);
            if (!d) {
                out.push_back({inst.id, name, "unknown feature"});
                continue;
            }
            if (auto rule = check_feature_value(*d, value))
                out.push_back({inst.id, name, *rule});
        }
    }
    return out;
}

json parse_json_text(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        // e.byte is 1-based; translate to line/column for the message.
        std::size_t line = 1, column = 1;
        const std::size_t limit = std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < limit; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw FormatError("malformed JSON", line, column);
    }
}

namespace {

const json& require(const json& obj, const char* key, const char* where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw SchemaError(std::string(where) + ": missing '" + key + "'");
    return *it;
}

std::string require_string(const json& obj, const char* key, const char* where) {
    const auto& v = require(obj, key, where);
    if (!v.is_string())
        throw SchemaError(std::string(where) + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

FeatureDescriptor descriptor_from_json(const json& j) {
    if (!j.is_object())
        throw SchemaError("dictionary entry must be an object");
    FeatureDescriptor d;
    d.name = require_string(j, "name", "dictionary entry");
    d.layer = parse_layer(require_string(j, "layer", "dictionary entry"));
    d.kind = parse_feature_kind(require_string(j, "kind", "dictionary entry"));
    if (auto it = j.find("description"); it != j.end()) {
        if (!it->is_string())
            throw SchemaError("dictionary entry: 'description' must be a string");
        d.description = it->get<std::string>();
    }
    if (d.kind == FeatureKind::Binary)
        d.ordinal_max = 1;
    if (d.kind == FeatureKind::Ordinal) {
        const auto& r = require(j, "range", "ordinal dictionary entry");
        if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer())
            throw SchemaError("feature '" + d.name + "': 'range' must be [lo, hi] integers");
        d.ordinal_min = r[0].get<int>();
        d.ordinal_max = r[1].get<int>();
    }
    return d;
}

} // namespace

ordered_json dataset_to_json(const Dataset& dataset) {
    ordered_json doc;
    doc["schema_version"] = "1";
    ordered_json dict = ordered_json::array();
    for (const auto& d : dataset.dictionary) {
        ordered_json e;
        e["name"] = d.name;
        e["layer"] = to_string(d.layer);
        e["kind"] = to_string(d.kind);
        e["description"] = d.description;
        if (d.kind == FeatureKind::Ordinal)
            e["range"] = {d.ordinal_min, d.ordinal_max};
        dict.push_back(std::move(e));
    }
    doc["dictionary"] = std::move(dict);
    ordered_json insts = ordered_json::array();
    for (const auto& inst : dataset.instances) {
        ordered_json e;
        e["id"] = inst.id;
        e["label"] = to_string(inst.label);
        ordered_json feats = ordered_json::object();
        // Dictionary order keeps files readable; order is not significant on load.
        for (const auto& d : dataset.dictionary)
            if (auto v = inst.features.get(d.name))
                feats[d.name] = *v;
        for (const auto& [k, v] : inst.features)
            if (!dataset.dictionary.contains(k))
                feats[k] = v;
        e["features"] = std::move(feats);
        e["provenance"] = inst.provenance;
        insts.push_back(std::move(e));
    }
    doc["instances"] = std::move(insts);
    return doc;
}

Dataset dataset_from_json(const json& doc) {
    if (!doc.is_object())
        throw SchemaError("dataset document must be a JSON object");
    const auto& version = require(doc, "schema_version", "dataset");
    if (!version.is_string())
        throw SchemaVersionError(version.dump());
    if (version.get<std::string>() != "1")
        throw SchemaVersionError(version.get<std::string>());

    Dataset out;
    const auto& dict = require(doc, "dictionary", "dataset");
    if (!dict.is_array())
        throw SchemaError("dataset: 'dictionary' must be an array");
    for (const auto& entry : dict)
        out.dictionary.append(descriptor_from_json(entry));

    const auto& insts = require(doc, "instances", "dataset");
    if (!insts.is_array())
        throw SchemaError("dataset: 'instances' must be an array");
    out.instances.reserve(insts.size());
    for (const auto& e : insts) {
        if (!e.is_object())
            throw SchemaError("instance must be an object");
        Instance inst;
        inst.id = require_string(e, "id", "instance");
        inst.label = parse_label(require_string(e, "label", "instance"));
        const auto& feats = require(e, "features", "instance");
        if (!feats.is_object())
            throw SchemaError("instance '" + inst.id + "': 'features' must be an object");
        for (const auto& [name, value] : feats.items()) {
            if (!out.dictionary.contains(name))
                throw UnknownFeatureError(name);
            if (!value.is_number())
                throw SchemaError("instance '" + inst.id + "': feature '" + name + "' must be a number");
            inst.features.set(name, value.get<double>());
        }
        if (auto it = e.find("provenance"); it != e.end()) {
            if (!it->is_object())
                throw SchemaError("instance '" + inst.id + "': 'provenance' must be an object");
            for (const auto& [k, v] : it->items()) {
                if (!v.is_string())
                    throw SchemaError("instance '" + inst.id + "': provenance values must be strings");
                inst.provenance[k] = v.get<std::string>();
            }
        }
        out.instances.push_back(std::move(inst));
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
    return dataset_from_json(parse_json_text(read_text_file(path)));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    write_file_atomic(path, dataset_to_json(dataset).dump(2) + "\n");
}

} // namespace vulnscore
