#include "vulnscore/source_metrics.hpp"

#include <array>
#include <cctype>

namespace vulnscore {

namespace {

constexpr std::array<std::string_view, 5> kPunct3{"<<=", ">>=", "...", "->*", "<=>"};
constexpr std::array<std::string_view, 22> kPunct2{"->", "++", "--", "<<", ">>", "<=", ">=", "==",
                                                   "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=",
                                                   "&=", "|=", "^=", "::", "##", ".*"};

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
           static_cast<unsigned char>(c) >= 0x80;
}
bool is_ident_char(char c) { return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

bool is_string_prefix(std::string_view id) {
    return id == "L" || id == "u" || id == "U" || id == "u8" || id == "R" || id == "LR" || id == "uR" ||
           id == "UR" || id == "u8R";
}

class Lexer {
public:
    Lexer(std::string_view text, SourceUnit& unit) : s_(text), unit_(unit) {}

    void run() {
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if (c == '\n') {
                ++line_;
                ++pos_;
                line_start_ = true;
            } else if (splice_at(pos_)) {
                skip_splice();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                ++pos_;
            } else if (c == '/' && peek(1) == '/') {
                skip_line_comment();
            } else if (c == '/' && peek(1) == '*') {
                skip_block_comment();
            } else if (c == '#' && line_start_) {
                directive();
            } else if (is_ident_start(c)) {
                identifier();
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                number();
            } else if (c == '"') {
                quoted('"', TokenKind::StringLiteral, line_);
            } else if (c == '\'') {
                quoted('\'', TokenKind::CharLiteral, line_);
            } else {
                punct();
            }
        }
    }

private:
    std::string_view s_;
    SourceUnit& unit_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    bool line_start_ = true;

    char peek(std::size_t ahead) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }

    // Backslash-newline (LF or CRLF) joins physical lines.
    bool splice_at(std::size_t p) const {
        if (p >= s_.size() || s_[p] != '\\')
            return false;
        if (p + 1 < s_.size() && s_[p + 1] == '\n')
            return true;
        return p + 2 < s_.size() && s_[p + 1] == '\r' && s_[p + 2] == '\n';
    }
    void skip_splice() {
        pos_ += s_[pos_ + 1] == '\r' ? 3 : 2;
        ++line_;
    }

    void warn(std::size_t line, std::string message) { unit_.warnings.push_back({line, std::move(message)}); }

    void emit(TokenKind kind, std::string text, std::size_t start_line) {
        unit_.tokens.push_back({kind, std::move(text), start_line, line_});
        line_start_ = false;
    }

    void skip_line_comment() {
        while (pos_ < s_.size() && s_[pos_] != '\n') {
            if (splice_at(pos_))
                skip_splice();
            else
                ++pos_;
        }
    }

    void skip_block_comment() {
        const std::size_t start_line = line_;
        pos_ += 2;
        while (pos_ < s_.size()) {
            if (s_[pos_] == '*' && peek(1) == '/') {
                pos_ += 2;
                return;
            }
            if (s_[pos_] == '\n')
                ++line_;
            ++pos_;
        }
        warn(start_line, "unterminated block comment");
    }

    // Consumes a quoted literal starting at pos_ (the opening quote).
    // Unescaped newlines end it early with a warning.
    void quoted(char quote, TokenKind kind, std::size_t start_line) {
        ++pos_;
        for (;;) {
            if (pos_ >= s_.size()) {
                warn(start_line, kind == TokenKind::StringLiteral ? "unterminated string literal"
                                                                  : "unterminated character literal");
                break;
            }
            const char c = s_[pos_];
            if (splice_at(pos_)) {
                skip_splice();
            } else if (c == '\\') {
                pos_ += 2;
            } else if (c == quote) {
                ++pos_;
                break;
            } else if (c == '\n') {
                warn(start_line, kind == TokenKind::StringLiteral ? "unterminated string literal"
                                                                  : "unterminated character literal");
                break;
            } else {
                ++pos_;
            }
        }
        if (pos_ > s_.size())
            pos_ = s_.size();
        emit(kind, kind == TokenKind::StringLiteral ? "\"\"" : "''", start_line);
    }

    // R"delim( ... )delim"
    void raw_string(std::size_t start_line) {
        ++pos_; // opening quote
        const std::size_t open = s_.find('(', pos_);
        if (open == std::string_view::npos || open - pos_ > 16) {
            // Not a well-formed raw string; fall back to an ordinary literal.
            --pos_;
            quoted('"', TokenKind::StringLiteral, start_line);
            return;
        }
        const std::string terminator = ")" + std::string(s_.substr(pos_, open - pos_)) + "\"";
        std::size_t close = s_.find(terminator, open + 1);
        if (close == std::string_view::npos) {
            warn(start_line, "unterminated raw string literal");
            close = s_.size();
        } else {
            close += terminator.size();
        }
        for (std::size_t p = pos_; p < close; ++p)
            if (s_[p] == '\n')
                ++line_;
        pos_ = close;
        emit(TokenKind::StringLiteral, "\"\"", start_line);
    }

    void identifier() {
        const std::size_t start = pos_;
        const std::size_t start_line = line_;
        while (pos_ < s_.size() && is_ident_char(s_[pos_]))
            ++pos_;
        std::string_view id = s_.substr(start, pos_ - start);
        if (pos_ < s_.size() && is_string_prefix(id)) {
            if (s_[pos_] == '"') {
                if (id.back() == 'R')
                    raw_string(start_line);
                else
                    quoted('"', TokenKind::StringLiteral, start_line);
                return;
            }
            if (s_[pos_] == '\'' && id.back() != 'R') {
                quoted('\'', TokenKind::CharLiteral, start_line);
                return;
            }
        }
        emit(TokenKind::Identifier, std::string(id), start_line);
    }

    void number() {
        const std::size_t start = pos_;
        const std::size_t start_line = line_;
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if ((c == 'e' || c == 'E' || c == 'p' || c == 'P') && (peek(1) == '+' || peek(1) == '-')) {
                pos_ += 2;
            } else if (c == '\'' && std::isalnum(static_cast<unsigned char>(peek(1)))) {
                pos_ += 2; // digit separator
            } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
                ++pos_;
            } else {
                break;
            }
        }
        emit(TokenKind::Number, std::string(s_.substr(start, pos_ - start)), start_line);
    }

    void punct() {
        const std::size_t start_line = line_;
        for (auto p : kPunct3) {
            if (s_.substr(pos_, 3) == p) {
                pos_ += 3;
                emit(TokenKind::Punct, std::string(p), start_line);
                return;
            }
        }
        for (auto p : kPunct2) {
            if (s_.substr(pos_, 2) == p) {
                pos_ += 2;
                emit(TokenKind::Punct, std::string(p), start_line);
                return;
            }
        }
        emit(TokenKind::Punct, std::string(1, s_[pos_]), start_line);
        ++pos_;
    }

    // One token per logical preprocessor line. Comments inside are dropped;
    // a block comment may carry the directive onto later lines.
    void directive() {
        const std::size_t start_line = line_;
        std::string text;
        while (pos_ < s_.size() && s_[pos_] != '\n') {
            const char c = s_[pos_];
            if (splice_at(pos_)) {
                skip_splice();
                text += ' ';
            } else if (c == '/' && peek(1) == '/') {
                skip_line_comment();
            } else if (c == '/' && peek(1) == '*') {
                skip_block_comment();
                text += ' ';
            } else if (c == '"' || c == '\'') {
                const std::size_t before = unit_.tokens.size();
                quoted(c, c == '"' ? TokenKind::StringLiteral : TokenKind::CharLiteral, line_);
                unit_.tokens.resize(before);
                text += c == '"' ? "\"\"" : "''";
            } else {
                if (c != '\r')
                    text += c;
                ++pos_;
            }
        }
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
            text.pop_back();
        emit(TokenKind::Directive, std::move(text), start_line);
    }
};

} // namespace

SourceUnit tokenize(std::string_view text, std::string path) {
    SourceUnit unit;
    unit.path = std::move(path);
    Lexer(text, unit).run();
    return unit;
}

} // namespace vulnscore
