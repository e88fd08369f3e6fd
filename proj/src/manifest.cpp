#include "vulnscore/manifest.hpp"

#include "vulnscore/error.hpp"
#include "vulnscore/file_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

namespace vulnscore {

using nlohmann::json;
namespace chr = std::chrono;

namespace {

constexpr std::array<std::string_view, 14> kRequired{
    "schema_version", "project_name",   "first_release_date", "snapshot_date", "committers",
    "popularity_program", "popularity_platform", "platform_kind", "dev_reputation", "security_related",
    "code_status",    "is_legacy",      "exploit_history",    "is_server_app"};

const json& field(const json& doc, std::string_view key) { return doc.at(std::string(key)); }

long long non_negative_int(const json& doc, std::string_view key) {
    const auto& v = field(doc, key);
    if (!v.is_number_integer())
        throw ValidationError("'" + std::string(key) + "' must be an integer");
    const auto n = v.get<long long>();
    if (n < 0)
        throw RangeError("'" + std::string(key) + "' must be non-negative, got " + std::to_string(n));
    return n;
}

int ordinal(const json& doc, std::string_view key, int hi) {
    const auto& v = field(doc, key);
    if (!v.is_number_integer())
        throw ValidationError("'" + std::string(key) + "' must be an integer");
    const auto n = v.get<long long>();
    if (n < 0 || n > hi)
        throw RangeError("'" + std::string(key) + "' must be within 0-" + std::to_string(hi) + ", got " +
                         std::to_string(n));
    return static_cast<int>(n);
}

bool boolean(const json& doc, std::string_view key) {
    const auto& v = field(doc, key);
    if (!v.is_boolean())
        throw ValidationError("'" + std::string(key) + "' must be a boolean");
    return v.get<bool>();
}

std::string string_field(const json& doc, std::string_view key) {
    const auto& v = field(doc, key);
    if (!v.is_string())
        throw ValidationError("'" + std::string(key) + "' must be a string");
    return v.get<std::string>();
}

} // namespace

std::string_view to_string(PlatformKind kind) {
    switch (kind) {
    case PlatformKind::Other: return "other";
    case PlatformKind::Embedded: return "embedded";
    case PlatformKind::Desktop: return "desktop";
    case PlatformKind::Server: return "server";
    }
    return "other";
}

std::string_view to_string(CodeStatus status) {
    switch (status) {
    case CodeStatus::Abandoned: return "abandoned";
    case CodeStatus::Maintenance: return "maintenance";
    case CodeStatus::Active: return "active";
    }
    return "active";
}

chr::year_month_day parse_iso_date(std::string_view text) {
    auto digits = [&](std::size_t from, std::size_t n) {
        int v = 0;
        for (std::size_t i = from; i < from + n; ++i) {
            if (text[i] < '0' || text[i] > '9')
                return -1;
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ValidationError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    const int y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
    const chr::year_month_day date{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                                   chr::day{static_cast<unsigned>(d)}};
    if (y < 0 || m < 0 || d < 0 || !date.ok())
        throw ValidationError("invalid date '" + std::string(text) + "'");
    return date;
}

std::string format_iso_date(chr::year_month_day date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

long long whole_months_between(chr::year_month_day from, chr::year_month_day to) {
    long long months = (static_cast<int>(to.year()) - static_cast<int>(from.year())) * 12LL +
                       (static_cast<long long>(static_cast<unsigned>(to.month())) -
                        static_cast<long long>(static_cast<unsigned>(from.month())));
    if (static_cast<unsigned>(to.day()) < static_cast<unsigned>(from.day()))
        --months;
    return months;
}

ProjectManifest manifest_from_json(const json& doc) {
    if (!doc.is_object())
        throw ValidationError("manifest must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (std::find(kRequired.begin(), kRequired.end(), key) == kRequired.end())
            throw UnknownKeyError(key);
    }
    for (auto key : kRequired)
        if (!doc.contains(std::string(key)))
            throw MissingFieldError(std::string(key));

    const auto& version = field(doc, "schema_version");
    if (!version.is_string() || version.get<std::string>() != "1")
        throw SchemaVersionError(version.is_string() ? version.get<std::string>() : version.dump());

    ProjectManifest m;
    m.project_name = string_field(doc, "project_name");
    m.first_release_date = parse_iso_date(string_field(doc, "first_release_date"));
    m.snapshot_date = parse_iso_date(string_field(doc, "snapshot_date"));
    if (chr::sys_days(m.snapshot_date) < chr::sys_days(m.first_release_date))
        throw DateInversionError("snapshot_date " + format_iso_date(m.snapshot_date) +
                                 " precedes first_release_date " + format_iso_date(m.first_release_date));
    m.committers = non_negative_int(doc, "committers");
    m.popularity_program = ordinal(doc, "popularity_program", 4);
    m.popularity_platform = ordinal(doc, "popularity_platform", 4);
    m.dev_reputation = ordinal(doc, "dev_reputation", 4);

    const auto platform = string_field(doc, "platform_kind");
    if (platform == "other") m.platform_kind = PlatformKind::Other;
    else if (platform == "embedded") m.platform_kind = PlatformKind::Embedded;
    else if (platform == "desktop") m.platform_kind = PlatformKind::Desktop;
    else if (platform == "server") m.platform_kind = PlatformKind::Server;
    else throw RangeError("'platform_kind' must be one of other|embedded|desktop|server, got '" + platform + "'");

    const auto status = string_field(doc, "code_status");
    if (status == "abandoned") m.code_status = CodeStatus::Abandoned;
    else if (status == "maintenance") m.code_status = CodeStatus::Maintenance;
    else if (status == "active") m.code_status = CodeStatus::Active;
    else throw RangeError("'code_status' must be one of abandoned|maintenance|active, got '" + status + "'");

    m.security_related = boolean(doc, "security_related");
    m.is_legacy = boolean(doc, "is_legacy");
    m.exploit_history = non_negative_int(doc, "exploit_history");
    m.is_server_app = boolean(doc, "is_server_app");
    return m;
}

nlohmann::ordered_json manifest_to_json(const ProjectManifest& m) {
    nlohmann::ordered_json j;
    j["schema_version"] = "1";
    j["project_name"] = m.project_name;
    j["first_release_date"] = format_iso_date(m.first_release_date);
    j["snapshot_date"] = format_iso_date(m.snapshot_date);
    j["committers"] = m.committers;
    j["popularity_program"] = m.popularity_program;
    j["popularity_platform"] = m.popularity_platform;
    j["platform_kind"] = to_string(m.platform_kind);
    j["dev_reputation"] = m.dev_reputation;
    j["security_related"] = m.security_related;
    j["code_status"] = to_string(m.code_status);
    j["is_legacy"] = m.is_legacy;
    j["exploit_history"] = m.exploit_history;
    j["is_server_app"] = m.is_server_app;
    return j;
}

ProjectManifest load_manifest(const std::filesystem::path& path) {
    return manifest_from_json(parse_json_text(read_text_file(path)));
}

FeatureVector encode_layer3(const ProjectManifest& m) {
    FeatureVector v;
    v.set("l3.code_age_months", static_cast<double>(whole_months_between(m.first_release_date, m.snapshot_date)));
    v.set("l3.committers", static_cast<double>(m.committers));
    v.set("l3.popularity_program", m.popularity_program);
    v.set("l3.popularity_platform", m.popularity_platform);
    v.set("l3.platform_kind", static_cast<double>(static_cast<int>(m.platform_kind)));
    v.set("l3.dev_reputation", m.dev_reputation);
    v.set("l3.security_related", m.security_related ? 1.0 : 0.0);
    v.set("l3.code_status", static_cast<double>(static_cast<int>(m.code_status)));
    v.set("l3.is_legacy", m.is_legacy ? 1.0 : 0.0);
    v.set("l3.exploit_history", static_cast<double>(m.exploit_history));
    v.set("l2.is_server", m.is_server_app ? 1.0 : 0.0);
    return v;
}

} // namespace vulnscore
