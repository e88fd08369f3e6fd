#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "vulnscore/features.hpp"

namespace vulnscore {

enum class PlatformKind { Other = 0, Embedded = 1, Desktop = 2, Server = 3 };
enum class CodeStatus { Abandoned = 0, Maintenance = 1, Active = 2 };

std::string_view to_string(PlatformKind kind);
std::string_view to_string(CodeStatus status);

/// Hand-curated project metadata. Ordinal judgments use a 0-4 scale.
struct ProjectManifest {
    std::string project_name;
    std::chrono::year_month_day first_release_date{};
    std::chrono::year_month_day snapshot_date{};
    long long committers = 0;
    int popularity_program = 0;
    int popularity_platform = 0;
    PlatformKind platform_kind = PlatformKind::Other;
    int dev_reputation = 0;
    bool security_related = false;
    CodeStatus code_status = CodeStatus::Active;
    bool is_legacy = false;
    long long exploit_history = 0;
    bool is_server_app = false;

    bool operator==(const ProjectManifest&) const = default;
};

/// Parses a strict `YYYY-MM-DD` calendar date; throws ValidationError.
std::chrono::year_month_day parse_iso_date(std::string_view text);
std::string format_iso_date(std::chrono::year_month_day date);

/// Whole months from `from` to `to` (a partial month does not count).
long long whole_months_between(std::chrono::year_month_day from, std::chrono::year_month_day to);

/// Validates and converts a manifest document. Throws MissingFieldError,
/// UnknownKeyError, RangeError, DateInversionError, SchemaVersionError or
/// ValidationError for type mismatches.
ProjectManifest manifest_from_json(const nlohmann::json& doc);
nlohmann::ordered_json manifest_to_json(const ProjectManifest& manifest);

/// Also throws IoError and FormatError.
ProjectManifest load_manifest(const std::filesystem::path& path);

/// All ten l3.* features plus l2.is_server.
FeatureVector encode_layer3(const ProjectManifest& manifest);

} // namespace vulnscore
