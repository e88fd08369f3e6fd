#include "vulnscore/findings.hpp"

#include "vulnscore/error.hpp"
#include "vulnscore/file_io.hpp"
#include "xml_reader.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <tuple>

namespace vulnscore {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct CategoryName {
    FindingCategory category;
    std::string_view name;
    std::string_view feature;
};

constexpr std::array<CategoryName, 7> kCategories{{
    {FindingCategory::BufferWrite, "BufferWrite", "l1.buffer_write"},
    {FindingCategory::NullDeref, "NullDeref", "l1.null_deref"},
    {FindingCategory::UseAfterFree, "UseAfterFree", "l1.use_after_free"},
    {FindingCategory::MemoryLeak, "MemoryLeak", "l1.memory_leak"},
    {FindingCategory::StackReturn, "StackReturn", "l1.stack_return"},
    {FindingCategory::UseBeforeDef, "UseBeforeDef", "l1.use_before_def"},
    {FindingCategory::Other, "Other", ""},
}};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

// Accepts 1..9 decimal digits; returns 0 on anything else.
std::size_t parse_line_number(std::string_view s) {
    if (s.empty() || s.size() > 9)
        return 0;
    std::size_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9')
            return 0;
        v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    return v;
}

} // namespace

std::string_view to_string(FindingCategory category) {
    for (const auto& c : kCategories)
        if (c.category == category)
            return c.name;
    return "Other";
}

FindingCategory parse_finding_category(std::string_view text) {
    for (const auto& c : kCategories)
        if (c.name == text)
            return c.category;
    throw SchemaError("unknown finding category '" + std::string(text) + "'");
}

std::string_view layer1_feature(FindingCategory category) {
    for (const auto& c : kCategories)
        if (c.category == category)
            return c.feature;
    return "";
}

// ---------------------------------------------------------------------------
// Mapping tables

const CppcheckIdMap& CppcheckIdMap::builtin() {
    using C = FindingCategory;
    static const CppcheckIdMap table({
        {"arrayIndexOutOfBounds", C::BufferWrite},
        {"arrayIndexOutOfBoundsCond", C::BufferWrite},
        {"autoVariables", C::StackReturn},
        {"bufferAccessOutOfBounds", C::BufferWrite},
        {"ctunullpointer", C::NullDeref},
        {"deallocret", C::UseAfterFree},
        {"deallocuse", C::UseAfterFree},
        {"doubleFree", C::UseAfterFree},
        {"insecureCmdLineArgs", C::BufferWrite},
        {"leakNoVarFunctionCall", C::MemoryLeak},
        {"leakReturnValNotUsed", C::MemoryLeak},
        {"memleak", C::MemoryLeak},
        {"memleakOnRealloc", C::MemoryLeak},
        {"negativeIndex", C::BufferWrite},
        {"nullPointer", C::NullDeref},
        {"nullPointerArithmetic", C::NullDeref},
        {"nullPointerDefaultArg", C::NullDeref},
        {"nullPointerRedundantCheck", C::NullDeref},
        {"outOfBounds", C::BufferWrite},
        {"pointerOutOfBounds", C::BufferWrite},
        {"returnAddressOfAutoVariable", C::StackReturn},
        {"returnDanglingLifetime", C::StackReturn},
        {"returnLocalVariable", C::StackReturn},
        {"returnReference", C::StackReturn},
        {"returnTempReference", C::StackReturn},
        {"uninitdata", C::UseBeforeDef},
        {"uninitStructMember", C::UseBeforeDef},
        {"uninitstring", C::UseBeforeDef},
        {"uninitvar", C::UseBeforeDef},
    });
    return table;
}

CppcheckIdMap CppcheckIdMap::from_json(const json& doc) {
    if (!doc.is_object())
        throw SchemaError("cppcheck id map must be a JSON object");
    std::map<std::string, FindingCategory> ids;
    for (const auto& [id, cat] : doc.items()) {
        if (!cat.is_string())
            throw SchemaError("cppcheck id map: value for '" + id + "' must be a string");
        ids[id] = parse_finding_category(cat.get<std::string>());
    }
    return CppcheckIdMap(std::move(ids));
}

CppcheckIdMap CppcheckIdMap::load(const std::filesystem::path& path) {
    return from_json(parse_json_text(read_text_file(path)));
}

ordered_json CppcheckIdMap::to_json() const {
    ordered_json out = ordered_json::object();
    for (const auto& [id, cat] : ids_)
        out[id] = to_string(cat);
    return out;
}

FindingCategory CppcheckIdMap::category_for(std::string_view id) const {
    auto it = ids_.find(std::string(id));
    return it == ids_.end() ? FindingCategory::Other : it->second;
}

SplintRules::SplintRules(std::vector<SplintRule> rules) : rules_(std::move(rules)) {
    for (auto& r : rules_) {
        if (r.all_of.empty())
            throw SchemaError("splint rule with empty 'all_of'");
        for (auto& s : r.all_of)
            s = lower(s);
    }
}

const SplintRules& SplintRules::builtin() {
    using C = FindingCategory;
    static const SplintRules rules({
        {{"after being released"}, C::UseAfterFree},
        {{"released storage"}, C::UseAfterFree},
        {{"dead storage"}, C::UseAfterFree},
        {{"fresh storage", "not released"}, C::MemoryLeak},
        {{"only storage", "not released"}, C::MemoryLeak},
        {{"memory leak"}, C::MemoryLeak},
        {{"stack-allocated storage", "reachable"}, C::StackReturn},
        {{"stack-allocated storage", "return"}, C::StackReturn},
        {{"null", "dereference"}, C::NullDeref},
        {{"arrow access from", "null"}, C::NullDeref},
        {{"field access from", "null"}, C::NullDeref},
        {{"used before definition"}, C::UseBeforeDef},
        {{"not completely defined"}, C::UseBeforeDef},
        {{"out-of-bounds read"}, C::Other},
        {{"may overflow"}, C::BufferWrite},
        {{"out-of-bounds store"}, C::BufferWrite},
        {{"buffer"}, C::BufferWrite},
    });
    return rules;
}

SplintRules SplintRules::from_json(const json& doc) {
    if (!doc.is_array())
        throw SchemaError("splint rules must be a JSON array");
    std::vector<SplintRule> rules;
    for (const auto& r : doc) {
        if (!r.is_object() || !r.contains("all_of") || !r.contains("category"))
            throw SchemaError("splint rule needs 'all_of' and 'category'");
        const auto& all_of = r.at("all_of");
        if (!all_of.is_array() || !r.at("category").is_string())
            throw SchemaError("splint rule: 'all_of' must be an array, 'category' a string");
        SplintRule rule;
        for (const auto& s : all_of) {
            if (!s.is_string())
                throw SchemaError("splint rule: 'all_of' entries must be strings");
            rule.all_of.push_back(s.get<std::string>());
        }
        rule.category = parse_finding_category(r.at("category").get<std::string>());
        rules.push_back(std::move(rule));
    }
    return SplintRules(std::move(rules));
}

SplintRules SplintRules::load(const std::filesystem::path& path) {
    return from_json(parse_json_text(read_text_file(path)));
}

ordered_json SplintRules::to_json() const {
    ordered_json out = ordered_json::array();
    for (const auto& r : rules_) {
        ordered_json e;
        e["all_of"] = r.all_of;
        e["category"] = to_string(r.category);
        out.push_back(std::move(e));
    }
    return out;
}

FindingCategory SplintRules::classify(std::string_view message) const {
    const std::string text = lower(message);
    for (const auto& r : rules_) {
        const bool hit = std::all_of(r.all_of.begin(), r.all_of.end(), [&](const std::string& needle) {
            return text.find(needle) != std::string::npos;
        });
        if (hit)
            return r.category;
    }
    return FindingCategory::Other;
}

// ---------------------------------------------------------------------------
// Parsers

FindingsReport parse_cppcheck_xml(std::string_view text, const CppcheckIdMap& ids) {
    const xml::Element root = xml::parse(text);
    if (root.name != "results")
        throw FormatError("expected <results> root element, found <" + root.name + ">", root.line,
                          root.column);

    FindingsReport report;
    report.tool = "cppcheck";

    // Version 1 puts <error> directly under <results>; version 2 nests them in <errors>.
    std::vector<const xml::Element*> errors;
    for (const auto& child : root.children) {
        if (child.name == "error")
            errors.push_back(&child);
        else if (child.name == "errors")
            for (const auto& e : child.children)
                if (e.name == "error")
                    errors.push_back(&e);
    }

    for (const auto* e : errors) {
        const std::string* id = e->attribute("id");
        const std::string* file = e->attribute("file");
        const std::string* line = e->attribute("line");
        if (!file || !line) {
            for (const auto& loc : e->children) {
                if (loc.name == "location") {
                    file = loc.attribute("file");
                    line = loc.attribute("line");
                    break;
                }
            }
        }
        auto reject = [&](const std::string& why) { report.errors.push_back({e->line, why}); };
        if (!id) {
            reject("<error> without 'id' attribute");
            continue;
        }
        if (!file) {
            reject("<error id=\"" + *id + "\"> without 'file' attribute");
            continue;
        }
        if (!line) {
            reject("<error id=\"" + *id + "\"> without 'line' attribute");
            continue;
        }
        const std::size_t line_no = parse_line_number(*line);
        if (line_no == 0) {
            reject("<error id=\"" + *id + "\"> has invalid line '" + *line + "'");
            continue;
        }
        Finding f;
        f.category = ids.category_for(*id);
        f.file = *file;
        f.line = line_no;
        f.tool = "cppcheck";
        if (const auto* msg = e->attribute("msg"))
            f.raw_message = *msg;
        else if (const auto* verbose = e->attribute("verbose"))
            f.raw_message = *verbose;
        report.findings.push_back(std::move(f));
    }
    return report;
}

namespace {

struct SplintHeader {
    std::string file;
    std::size_t line = 0;
    std::string_view message;
};

// Matches `FILE:LINE[:COL]: MESSAGE`, taking the first colon that is
// followed by a line number so Windows drive letters survive.
bool match_splint_header(std::string_view s, SplintHeader& out) {
    for (std::size_t colon = s.find(':'); colon != std::string_view::npos && colon > 0;
         colon = s.find(':', colon + 1)) {
        std::size_t p = colon + 1;
        std::size_t q = p;
        while (q < s.size() && std::isdigit(static_cast<unsigned char>(s[q])))
            ++q;
        if (q == p || q >= s.size() || s[q] != ':')
            continue;
        const std::size_t line = parse_line_number(s.substr(p, q - p));
        std::size_t r = q + 1;
        std::size_t t = r;
        while (t < s.size() && std::isdigit(static_cast<unsigned char>(s[t])))
            ++t;
        if (t > r && t < s.size() && s[t] == ':')
            r = t + 1;
        if (line == 0)
            return false;
        out.file = std::string(s.substr(0, colon));
        out.line = line;
        out.message = trim(s.substr(r));
        return true;
    }
    return false;
}

} // namespace

FindingsReport parse_splint_text(std::string_view text, const SplintRules& rules) {
    FindingsReport report;
    report.tool = "splint";
    Finding* current = nullptr;

    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        start = end + 1;

        if (trim(line).empty()) {
            if (end == text.size())
                break;
            continue;
        }
        const bool indented = line.front() == ' ' || line.front() == '\t';
        if (indented) {
            if (current) {
                current->raw_message += '\n';
                current->raw_message += trim(line);
            } else {
                ++report.unmatched_lines;
            }
        } else if (SplintHeader h; match_splint_header(line, h)) {
            Finding f;
            f.category = rules.classify(h.message);
            f.file = std::move(h.file);
            f.line = h.line;
            f.tool = "splint";
            f.raw_message = std::string(h.message);
            report.findings.push_back(std::move(f));
            current = &report.findings.back();
        } else {
            ++report.unmatched_lines;
            current = nullptr;
        }
        if (end == text.size())
            break;
    }
    return report;
}

FindingsReport parse_findings_file(const std::filesystem::path& path, const CppcheckIdMap& ids,
                                   const SplintRules& rules) {
    const std::string text = read_text_file(path);
    std::string_view body = text;
    if (body.substr(0, 3) == "\xEF\xBB\xBF")
        body.remove_prefix(3);
    if (!trim(body).empty() && trim(body).front() == '<')
        return parse_cppcheck_xml(text, ids);
    return parse_splint_text(body, rules);
}

// ---------------------------------------------------------------------------
// Aggregation

FeatureVector aggregate_layer1(std::span<const FindingsReport> reports) {
    std::set<std::tuple<std::string, FindingCategory, std::string, std::size_t>> seen;
    std::map<FindingCategory, double> counts;
    for (const auto& report : reports) {
        for (const auto& f : report.findings) {
            if (f.category == FindingCategory::Other)
                continue;
            if (seen.emplace(f.tool, f.category, f.file, f.line).second)
                counts[f.category] += 1.0;
        }
    }
    FeatureVector out;
    for (const auto& c : kCategories)
        if (c.category != FindingCategory::Other)
            out.set(std::string(c.feature), counts[c.category]);
    return out;
}

FeatureVector aggregate_layer1(const FindingsReport& report) {
    return aggregate_layer1(std::span<const FindingsReport>(&report, 1));
}

FeatureVector binarize_layer1(FeatureVector features) {
    for (const auto& c : kCategories) {
        if (c.category == FindingCategory::Other)
            continue;
        if (auto v = features.get(c.feature))
            features.set(std::string(c.feature), *v > 0 ? 1.0 : 0.0);
    }
    return features;
}

} // namespace vulnscore
