#include "vulnscore/source_metrics.hpp"

#include "vulnscore/error.hpp"
#include "vulnscore/file_io.hpp"
#include "vulnscore/manifest.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

namespace vulnscore {

namespace fs = std::filesystem;

namespace {

// Tokens that take part in statement structure (directives are opaque).
std::vector<const Token*> code_tokens(const SourceUnit& unit) {
    std::vector<const Token*> out;
    out.reserve(unit.tokens.size());
    for (const auto& t : unit.tokens)
        if (t.kind != TokenKind::Directive)
            out.push_back(&t);
    return out;
}

bool is_word(const Token* t, std::string_view w) { return t->kind == TokenKind::Identifier && t->text == w; }
bool is_punct(const Token* t, std::string_view p) { return t->kind == TokenKind::Punct && t->text == p; }

bool starts_statement(const Token* t) {
    return t->kind == TokenKind::Identifier &&
           (t->text == "if" || t->text == "for" || t->text == "while" || t->text == "do" ||
            t->text == "switch" || t->text == "else");
}

// Recursive-descent skim over statements, just deep enough to know the
// nesting of `if` bodies and which `while` closes a `do`.
class StructureScanner {
public:
    explicit StructureScanner(const SourceUnit& unit) : toks_(code_tokens(unit)) {}

    void run() {
        while (pos_ < toks_.size() && !halted_) {
            if (is_punct(toks_[pos_], "}")) {
                warn(toks_[pos_]->line, "unbalanced '}'; nesting analysis stopped here");
                halted_ = true;
                break;
            }
            statement(0);
        }
    }

    std::size_t max_if_depth = 0;
    std::unordered_set<const Token*> do_closers;
    std::vector<SourceWarning> warnings;

private:
    static constexpr int kMaxNesting = 1000;

    std::vector<const Token*> toks_;
    std::size_t pos_ = 0;
    int nesting_ = 0;
    bool halted_ = false;
    bool reported_eof_ = false;

    bool at(std::string_view p) const { return pos_ < toks_.size() && is_punct(toks_[pos_], p); }
    bool at_word(std::string_view w) const { return pos_ < toks_.size() && is_word(toks_[pos_], w); }
    std::size_t last_line() const { return toks_.empty() ? 0 : toks_.back()->end_line; }

    void warn(std::size_t line, std::string message) { warnings.push_back({line, std::move(message)}); }

    void statement(std::size_t depth) {
        if (pos_ >= toks_.size() || halted_)
            return;
        if (++nesting_ > kMaxNesting) {
            warn(toks_[pos_]->line, "nesting too deep; analysis stopped here");
            halted_ = true;
            --nesting_;
            return;
        }
        const Token* t = toks_[pos_];
        if (is_punct(t, "{")) {
            block(depth);
        } else if (is_punct(t, ";")) {
            ++pos_;
        } else if (is_punct(t, "}")) {
            // Closing brace of the enclosing block; the caller consumes it.
        } else if (is_word(t, "if")) {
            if_statement(depth);
        } else if (is_word(t, "for") || is_word(t, "while") || is_word(t, "switch")) {
            ++pos_;
            if (at("("))
                group(depth);
            statement(depth);
        } else if (is_word(t, "do")) {
            ++pos_;
            statement(depth);
            if (at_word("while")) {
                do_closers.insert(toks_[pos_]);
                ++pos_;
                if (at("("))
                    group(depth);
                if (at(";"))
                    ++pos_;
            } else if (!halted_) {
                warn(t->line, "'do' without matching 'while'");
            }
        } else if (is_word(t, "else")) {
            warn(t->line, "'else' without 'if'");
            ++pos_;
            statement(depth);
        } else {
            simple_statement(depth);
        }
        --nesting_;
    }

    void if_statement(std::size_t depth) {
        ++pos_;
        while (at_word("constexpr") || at_word("consteval") || at("!"))
            ++pos_;
        if (at("("))
            group(depth);
        max_if_depth = std::max(max_if_depth, depth + 1);
        statement(depth + 1);
        if (at_word("else")) {
            ++pos_;
            // `else if` continues the chain at the same level.
            statement(at_word("if") ? depth : depth + 1);
        }
    }

    void block(std::size_t depth) {
        const std::size_t open_line = toks_[pos_]->line;
        ++pos_;
        while (pos_ < toks_.size() && !halted_) {
            if (at("}")) {
                ++pos_;
                return;
            }
            statement(depth);
        }
        if (!halted_ && !reported_eof_) {
            reported_eof_ = true;
            warn(open_line, "unbalanced '{' (block not closed before end of file at line " +
                                std::to_string(last_line()) + ")");
        }
    }

    // Parenthesized or bracketed group; braces inside (lambdas, statement
    // expressions, compound literals) are scanned as blocks.
    void group(std::size_t depth) {
        const std::string_view close = is_punct(toks_[pos_], "(") ? ")" : "]";
        const std::size_t open_line = toks_[pos_]->line;
        ++pos_;
        while (pos_ < toks_.size() && !halted_) {
            const Token* t = toks_[pos_];
            if (is_punct(t, close)) {
                ++pos_;
                return;
            }
            if (is_punct(t, "(") || is_punct(t, "[")) {
                group(depth);
            } else if (is_punct(t, "{")) {
                block(depth);
            } else if (is_punct(t, "}")) {
                warn(t->line, "unbalanced '}' inside parentheses; nesting analysis stopped here");
                halted_ = true;
                return;
            } else {
                ++pos_;
            }
        }
        if (!halted_ && !reported_eof_) {
            reported_eof_ = true;
            warn(open_line, "unbalanced '" + std::string(close == ")" ? "(" : "[") + "'");
        }
    }

    void simple_statement(std::size_t depth) {
        const std::size_t start = pos_;
        while (pos_ < toks_.size() && !halted_) {
            const Token* t = toks_[pos_];
            if (is_punct(t, ";")) {
                ++pos_;
                return;
            }
            if (is_punct(t, "}"))
                return;
            if (pos_ != start && starts_statement(t))
                return;
            if (is_punct(t, "{")) {
                block(depth);
            } else if (is_punct(t, "(") || is_punct(t, "[")) {
                group(depth);
            } else {
                if (is_punct(t, ")") || is_punct(t, "]"))
                    warn(t->line, "unbalanced '" + t->text + "'");
                ++pos_;
            }
        }
    }
};

bool followed_by_paren(const std::vector<Token>& toks, std::size_t i) {
    return i + 1 < toks.size() && toks[i + 1].kind == TokenKind::Punct && toks[i + 1].text == "(";
}

std::size_t count_calls(const SourceUnit& unit, std::initializer_list<std::string_view> names) {
    std::size_t n = 0;
    const auto& toks = unit.tokens;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].kind != TokenKind::Identifier || !followed_by_paren(toks, i))
            continue;
        if (std::find(names.begin(), names.end(), toks[i].text) != names.end())
            ++n;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Function definitions and calls

const std::unordered_set<std::string_view>& non_call_words() {
    static const std::unordered_set<std::string_view> words{
        "if", "for", "while", "switch", "return", "sizeof", "alignof", "_Alignof", "decltype",
        "typeof", "__typeof__", "catch", "static_assert", "_Static_assert", "defined", "noexcept",
        "throw", "case", "do", "else", "alignas", "_Alignas", "__attribute__", "__declspec", "asm",
        "__asm__", "typeid", "new", "delete", "operator", "requires", "__extension__"};
    return words;
}

struct FunctionDef {
    std::string name;
    std::size_t body_open = 0;  // index of '{'
    std::size_t body_close = 0; // index of matching '}' (or end)
};

class DefinitionScanner {
public:
    explicit DefinitionScanner(const SourceUnit& unit) : toks_(code_tokens(unit)) {}

    std::vector<FunctionDef> run() {
        std::size_t i = 0;
        while (i < toks_.size())
            scope(i, true);
        return std::move(defs_);
    }

    const std::vector<const Token*>& tokens() const { return toks_; }

private:
    std::vector<const Token*> toks_;
    std::vector<FunctionDef> defs_;
    int nesting_ = 0;

    bool punct(std::size_t i, std::string_view p) const { return i < toks_.size() && is_punct(toks_[i], p); }
    bool word(std::size_t i, std::string_view w) const { return i < toks_.size() && is_word(toks_[i], w); }
    bool ident(std::size_t i) const { return i < toks_.size() && toks_[i]->kind == TokenKind::Identifier; }

    // Index one past the group that opens at i ("(", "[" or "{").
    std::size_t skip_group(std::size_t i) const {
        int depth = 0;
        for (; i < toks_.size(); ++i) {
            const Token* t = toks_[i];
            if (t->kind != TokenKind::Punct)
                continue;
            if (t->text == "(" || t->text == "[" || t->text == "{")
                ++depth;
            else if (t->text == ")" || t->text == "]" || t->text == "}") {
                if (--depth == 0)
                    return i + 1;
            }
        }
        return toks_.size();
    }

    // Index of the first token in `stops` at group depth 0, or size().
    std::size_t find_at_depth0(std::size_t i, std::initializer_list<std::string_view> stops) const {
        while (i < toks_.size()) {
            const Token* t = toks_[i];
            if (t->kind == TokenKind::Punct) {
                if (std::find(stops.begin(), stops.end(), t->text) != stops.end())
                    return i;
                if (t->text == "(" || t->text == "[") {
                    i = skip_group(i);
                    continue;
                }
                if (t->text == ")" || t->text == "]" || t->text == "}")
                    return i;
            }
            ++i;
        }
        return i;
    }

    void scope(std::size_t& i, bool top) {
        if (++nesting_ > 256) {
            i = toks_.size();
            return;
        }
        while (i < toks_.size()) {
            const Token* t = toks_[i];
            if (is_punct(t, "}")) {
                ++i;
                if (!top)
                    break;
                continue;
            }
            if (is_word(t, "namespace")) {
                const std::size_t j = find_at_depth0(i + 1, {"{", ";"});
                i = j + 1;
                if (punct(j, "{"))
                    scope(i, false);
            } else if (is_word(t, "extern") && i + 2 < toks_.size() &&
                       toks_[i + 1]->kind == TokenKind::StringLiteral && punct(i + 2, "{")) {
                i += 3;
                scope(i, false);
            } else if (is_word(t, "class") || is_word(t, "struct") || is_word(t, "union")) {
                const std::size_t j = find_at_depth0(i + 1, {"{", ";", "=", "("});
                if (punct(j, "{")) {
                    i = j + 1;
                    scope(i, false);
                } else {
                    ++i;
                }
            } else if (is_word(t, "enum")) {
                const std::size_t j = find_at_depth0(i + 1, {"{", ";"});
                i = punct(j, "{") ? skip_group(j) : j + 1;
            } else if (is_punct(t, "=")) {
                i = find_at_depth0(i + 1, {";", "{"});
                if (punct(i, "{"))
                    i = skip_group(i);
            } else if (t->kind == TokenKind::Identifier && punct(i + 1, "(") &&
                       !non_call_words().count(t->text)) {
                i = try_function(i);
            } else if (is_punct(t, "(") || is_punct(t, "[") || is_punct(t, "{")) {
                i = skip_group(i);
            } else {
                ++i;
            }
        }
        --nesting_;
    }

    std::size_t skip_qualifiers(std::size_t j) const {
        for (;;) {
            if (word(j, "const") || word(j, "volatile") || word(j, "override") || word(j, "final") ||
                word(j, "mutable") || punct(j, "&") || punct(j, "&&")) {
                ++j;
            } else if (word(j, "noexcept") || word(j, "throw") || word(j, "__attribute__")) {
                ++j;
                if (punct(j, "("))
                    j = skip_group(j);
            } else {
                return j;
            }
        }
    }

    // K&R parameter declarations: `int f(a, b) int a; char *b; {`
    std::size_t skip_knr_declarations(std::size_t j) const {
        std::size_t k = j;
        bool saw_semicolon = false;
        while (k < toks_.size()) {
            const Token* t = toks_[k];
            if (is_punct(t, "{"))
                return saw_semicolon ? k : j;
            if (is_punct(t, ";"))
                saw_semicolon = true;
            else if (!(t->kind == TokenKind::Identifier || t->kind == TokenKind::Number || is_punct(t, "*") ||
                       is_punct(t, ",") || is_punct(t, "[") || is_punct(t, "]")))
                return j;
            ++k;
        }
        return j;
    }

    std::size_t try_function(std::size_t name_idx) {
        const std::size_t close = skip_group(name_idx + 1); // one past ')'
        std::size_t j = skip_qualifiers(close);
        if (punct(j, "->"))
            j = find_at_depth0(j + 1, {"{", ";", "="});
        if (punct(j, ":")) {
            // Constructor initializer list: item(...) or item{...}, comma separated.
            std::size_t k = j + 1;
            for (;;) {
                while (k < toks_.size() && (ident(k) || punct(k, "::") || punct(k, "<") || punct(k, ">") ||
                                            punct(k, ",") || punct(k, "...")))
                    ++k;
                if (punct(k, "(")) {
                    k = skip_group(k);
                } else if (punct(k, "{")) {
                    // Either a brace initializer followed by more items/the body, or the body itself.
                    const std::size_t after = skip_group(k);
                    if (punct(after, "{") || punct(after, ",")) {
                        k = after;
                    } else {
                        break;
                    }
                } else {
                    break;
                }
                if (punct(k, ","))
                    ++k;
                else if (punct(k, "{"))
                    break;
            }
            j = k;
        } else if (ident(j)) {
            j = skip_knr_declarations(j);
        }
        if (!punct(j, "{"))
            return close;
        const std::size_t end = skip_group(j);
        defs_.push_back({toks_[name_idx]->text, j, end == 0 ? 0 : end - 1});
        return end;
    }
};

void add_unit_to_graph(const SourceUnit& unit, CallGraph& graph) {
    DefinitionScanner scanner(unit);
    const auto defs = scanner.run();
    const auto& toks = scanner.tokens();
    for (const auto& def : defs) {
        graph.nodes.insert(def.name);
        for (std::size_t i = def.body_open + 1; i < def.body_close && i + 1 < toks.size(); ++i) {
            if (toks[i]->kind == TokenKind::Identifier && is_punct(toks[i + 1], "(") &&
                !non_call_words().count(toks[i]->text))
                graph.edges.emplace(def.name, toks[i]->text);
        }
    }
}

} // namespace

BranchMetrics branch_metrics(const SourceUnit& unit, std::vector<SourceWarning>* warnings) {
    BranchMetrics m;
    for (const auto& t : unit.tokens) {
        if ((t.kind == TokenKind::Identifier && (t.text == "if" || t.text == "case")) ||
            (t.kind == TokenKind::Punct && t.text == "?"))
            ++m.count;
    }
    StructureScanner scan(unit);
    scan.run();
    m.max_depth = scan.max_if_depth;
    if (warnings)
        warnings->insert(warnings->end(), scan.warnings.begin(), scan.warnings.end());
    return m;
}

std::size_t loop_count(const SourceUnit& unit, std::vector<SourceWarning>* warnings) {
    StructureScanner scan(unit);
    scan.run();
    std::size_t n = 0;
    for (const auto& t : unit.tokens) {
        if (t.kind != TokenKind::Identifier)
            continue;
        if (t.text == "for" || t.text == "do" || (t.text == "while" && !scan.do_closers.count(&t)))
            ++n;
    }
    if (warnings)
        warnings->insert(warnings->end(), scan.warnings.begin(), scan.warnings.end());
    return n;
}

std::size_t alloc_count(const SourceUnit& unit) {
    return count_calls(unit, {"malloc", "calloc", "realloc"});
}

LibSafetyCounts lib_safety_counts(const SourceUnit& unit) {
    return {count_calls(unit, {"strncpy", "strncat", "snprintf", "vsnprintf", "fgets", "strlcpy", "strlcat"}),
            count_calls(unit, {"strcpy", "strcat", "sprintf", "vsprintf", "gets", "scanf"})};
}

std::size_t sloc(const SourceUnit& unit) {
    std::set<std::size_t> lines;
    for (const auto& t : unit.tokens)
        for (std::size_t l = t.line; l <= t.end_line; ++l)
            lines.insert(l);
    return lines.size();
}

CallGraph build_call_graph(std::span<const SourceUnit> units) {
    CallGraph graph;
    for (const auto& u : units)
        add_unit_to_graph(u, graph);
    return graph;
}

std::vector<std::string> recursive_functions(const CallGraph& graph) {
    // Iterative Tarjan SCC over defined functions only.
    std::vector<std::string> names(graph.nodes.begin(), graph.nodes.end());
    std::map<std::string, std::size_t> id;
    for (std::size_t i = 0; i < names.size(); ++i)
        id[names[i]] = i;
    const std::size_t n = names.size();
    std::vector<std::vector<std::size_t>> adj(n);
    std::vector<bool> self_loop(n, false);
    for (const auto& [from, to] : graph.edges) {
        auto a = id.find(from);
        auto b = id.find(to);
        if (a == id.end() || b == id.end())
            continue;
        adj[a->second].push_back(b->second);
        if (a->second == b->second)
            self_loop[a->second] = true;
    }

    constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::pair<std::size_t, std::size_t>> work; // (node, next edge)
    std::size_t counter = 0;
    std::vector<bool> recursive(n, false);

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != kUnvisited)
            continue;
        work.emplace_back(root, 0);
        while (!work.empty()) {
            auto& [v, e] = work.back();
            if (e == 0 && index[v] == kUnvisited) {
                index[v] = low[v] = counter++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            if (e < adj[v].size()) {
                const std::size_t w = adj[v][e++];
                if (index[w] == kUnvisited)
                    work.emplace_back(w, 0);
                else if (on_stack[w])
                    low[v] = std::min(low[v], index[w]);
                continue;
            }
            if (low[v] == index[v]) {
                std::vector<std::size_t> component;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    component.push_back(w);
                } while (w != v);
                if (component.size() > 1 || self_loop[v])
                    for (auto c : component)
                        recursive[c] = true;
            }
            const std::size_t finished = v;
            work.pop_back();
            if (!work.empty())
                low[work.back().first] = std::min(low[work.back().first], low[finished]);
        }
    }

    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i)
        if (recursive[i])
            out.push_back(names[i]);
    return out;
}

std::size_t recursive_count(const CallGraph& graph) {
    return recursive_functions(graph).size();
}

FileMetrics measure_unit(const SourceUnit& unit) {
    FileMetrics fm;
    fm.path = unit.path;
    fm.warnings = unit.warnings;

    StructureScanner scan(unit);
    scan.run();
    fm.warnings.insert(fm.warnings.end(), scan.warnings.begin(), scan.warnings.end());

    std::size_t branches = 0, loops = 0;
    for (const auto& t : unit.tokens) {
        if (t.kind == TokenKind::Identifier) {
            if (t.text == "if" || t.text == "case")
                ++branches;
            else if (t.text == "for" || t.text == "do" || (t.text == "while" && !scan.do_closers.count(&t)))
                ++loops;
        } else if (t.kind == TokenKind::Punct && t.text == "?") {
            ++branches;
        }
    }
    const auto lib = lib_safety_counts(unit);
    const auto graph = build_call_graph(std::span<const SourceUnit>(&unit, 1));

    auto& m = fm.metrics;
    m.set("l2.safe_lib_calls", static_cast<double>(lib.safe));
    m.set("l2.branch_count", static_cast<double>(branches));
    m.set("l2.branch_max_depth", static_cast<double>(scan.max_if_depth));
    m.set("l2.loop_count", static_cast<double>(loops));
    m.set("l2.alloc_calls", static_cast<double>(alloc_count(unit)));
    m.set("l2.sloc", static_cast<double>(sloc(unit)));
    m.set("l2.recursive_fns", static_cast<double>(recursive_count(graph)));
    m.set("l2.unsafe_lib_calls", static_cast<double>(lib.unsafe));
    return fm;
}

bool is_source_file(const fs::path& path) {
    const auto ext = path.extension().string();
    return ext == ".c" || ext == ".h" || ext == ".cc" || ext == ".cpp" || ext == ".hpp";
}

Layer2Extraction extract_layer2(const fs::path& source_dir, const ProjectManifest* manifest) {
    std::error_code ec;
    if (!fs::is_directory(source_dir, ec))
        throw IoError(source_dir.string(), "not a readable directory");

    std::vector<fs::path> files;
    for (fs::recursive_directory_iterator it(source_dir, ec), end; !ec && it != end; it.increment(ec)) {
        if (it->is_regular_file(ec) && is_source_file(it->path()))
            files.push_back(it->path());
    }
    if (ec)
        throw IoError(source_dir.string(), "directory traversal failed: " + ec.message());
    std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
        return a.lexically_relative(source_dir).generic_string() <
               b.lexically_relative(source_dir).generic_string();
    });

    Layer2Extraction out;
    std::vector<SourceUnit> units;
    units.reserve(files.size());
    for (const auto& f : files)
        units.push_back(tokenize(read_text_file(f), f.lexically_relative(source_dir).generic_string()));

    double depth = 0;
    std::map<std::string, double> sums;
    for (const auto& u : units) {
        auto fm = measure_unit(u);
        for (const auto& [k, v] : fm.metrics) {
            if (k == "l2.branch_max_depth")
                depth = std::max(depth, v);
            else if (k != "l2.recursive_fns")
                sums[k] += v;
        }
        for (const auto& w : fm.warnings)
            out.warnings.push_back(fm.path + ":" + std::to_string(w.line) + ": " + w.message);
        out.files.push_back(std::move(fm));
    }
    for (const char* key : {"l2.safe_lib_calls", "l2.branch_count", "l2.loop_count", "l2.alloc_calls",
                            "l2.sloc", "l2.unsafe_lib_calls"})
        out.features.set(key, sums[key]);
    out.features.set("l2.branch_max_depth", depth);
    out.features.set("l2.recursive_fns", static_cast<double>(recursive_count(build_call_graph(units))));

    if (manifest)
        out.features.set("l2.is_server", manifest->is_server_app ? 1.0 : 0.0);
    else
        out.warnings.push_back("no manifest: l2.is_server left missing");
    return out;
}

nlohmann::ordered_json per_file_json(const Layer2Extraction& extraction) {
    auto out = nlohmann::ordered_json::array();
    for (const auto& f : extraction.files) {
        nlohmann::ordered_json e;
        e["path"] = f.path;
        auto metrics = nlohmann::ordered_json::object();
        for (const auto& [k, v] : f.metrics)
            metrics[k] = v;
        e["metrics"] = std::move(metrics);
        auto warnings = nlohmann::ordered_json::array();
        for (const auto& w : f.warnings)
            warnings.push_back(std::to_string(w.line) + ": " + w.message);
        e["warnings"] = std::move(warnings);
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace vulnscore
