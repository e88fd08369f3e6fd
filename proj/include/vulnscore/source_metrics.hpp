#pragma once

// Layer-2 code metrics computed from raw C/C++ text. There is no
// preprocessing: directives are opaque tokens and macros are not expanded.

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vulnscore/features.hpp"

namespace vulnscore {

struct ProjectManifest;

enum class TokenKind { Identifier, Number, StringLiteral, CharLiteral, Punct, Directive };

struct Token {
    TokenKind kind = TokenKind::Punct;
    // Literal tokens carry only their quotes, never their contents.
    std::string text;
    std::size_t line = 1;
    std::size_t end_line = 1;

    bool operator==(const Token&) const = default;
};

struct SourceWarning {
    std::size_t line = 0;
    std::string message;

    bool operator==(const SourceWarning&) const = default;
};

struct SourceUnit {
    std::string path;
    std::vector<Token> tokens;
    std::vector<SourceWarning> warnings;
};

/// Splits source text into tokens. Comments vanish, literals become empty
/// placeholders, each preprocessor line becomes one Directive token.
/// Unterminated comments/literals produce a warning, never an exception.
SourceUnit tokenize(std::string_view text, std::string path = {});

struct BranchMetrics {
    std::size_t count = 0;
    std::size_t max_depth = 0;
};

/// `if` + `case` + `?` tokens, and the deepest `if` nesting. A braceless
/// body counts one level; `else if` stays at the level of its chain.
BranchMetrics branch_metrics(const SourceUnit& unit, std::vector<SourceWarning>* warnings = nullptr);

/// `for` + `while` + `do`, where the `while` closing a do-while is not counted.
std::size_t loop_count(const SourceUnit& unit, std::vector<SourceWarning>* warnings = nullptr);

/// Call-position occurrences of malloc, calloc and realloc.
std::size_t alloc_count(const SourceUnit& unit);

struct LibSafetyCounts {
    std::size_t safe = 0;
    std::size_t unsafe = 0;
};

/// Call-position occurrences of bounds-checking vs. unchecked string routines.
LibSafetyCounts lib_safety_counts(const SourceUnit& unit);

/// Number of distinct lines covered by at least one token.
std::size_t sloc(const SourceUnit& unit);

struct CallGraph {
    std::set<std::string> nodes;                           // defined functions
    std::set<std::pair<std::string, std::string>> edges;   // (caller, callee)
};

/// Function definitions outside any function body (namespace, extern "C" and
/// class scopes are transparent) and the calls lexically inside them.
/// Calls through function pointers are not resolved.
CallGraph build_call_graph(std::span<const SourceUnit> units);

/// Defined functions on a call-graph cycle, sorted by name.
std::vector<std::string> recursive_functions(const CallGraph& graph);
std::size_t recursive_count(const CallGraph& graph);

struct FileMetrics {
    std::string path;
    FeatureVector metrics;
    std::vector<SourceWarning> warnings;
};

/// Every layer-2 metric of a single unit except l2.is_server.
FileMetrics measure_unit(const SourceUnit& unit);

struct Layer2Extraction {
    FeatureVector features;
    std::vector<FileMetrics> files;
    std::vector<std::string> warnings;
};

/// True for .c .h .cc .cpp .hpp.
bool is_source_file(const std::filesystem::path& path);

/// Walks `source_dir` in sorted path order. Counts are summed over files,
/// branch depth is the maximum, recursion is measured on the joint call
/// graph. l2.is_server comes from the manifest; without one it is left
/// absent and a warning is recorded.
Layer2Extraction extract_layer2(const std::filesystem::path& source_dir, const ProjectManifest* manifest);

/// `[ { "path", "metrics": {...}, "warnings": [...] }, ... ]`
nlohmann::ordered_json per_file_json(const Layer2Extraction& extraction);

} // namespace vulnscore
