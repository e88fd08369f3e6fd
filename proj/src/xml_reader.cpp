#include "xml_reader.hpp"

#include "vulnscore/error.hpp"

#include <cstdint>

namespace vulnscore::xml {

namespace {

constexpr int kMaxDepth = 256;

class Reader {
public:
    explicit Reader(std::string_view text) : s_(text) {
        if (s_.substr(0, 3) == "\xEF\xBB\xBF")
            pos_ = 3;
    }

    Element document() {
        skip_misc();
        if (eof() || peek() != '<')
            fail("expected root element");
        Element root = element(0);
        skip_misc();
        if (!eof())
            fail("unexpected content after root element");
        return root;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;

    [[noreturn]] void fail(const std::string& what) const { throw FormatError("malformed XML: " + what, line_, col_); }

    bool eof() const { return pos_ >= s_.size(); }
    char peek(std::size_t ahead = 0) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }
    bool starts_with(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }

    char advance() {
        char c = s_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else if (c != '\r') {
            ++col_;
        }
        return c;
    }

    void advance(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i)
            advance();
    }

    void expect(std::string_view p) {
        if (!starts_with(p))
            fail("expected '" + std::string(p) + "'");
        advance(p.size());
    }

    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
    static bool is_name_start(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':' ||
               static_cast<unsigned char>(c) >= 0x80;
    }
    static bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.'; }

    void skip_space() {
        while (!eof() && is_space(peek()))
            advance();
    }

    void skip_until(std::string_view terminator, const char* what) {
        while (!eof() && !starts_with(terminator))
            advance();
        if (eof())
            fail(std::string("unterminated ") + what);
        advance(terminator.size());
    }

    void skip_doctype() {
        expect("<!DOCTYPE");
        int bracket = 0;
        while (!eof()) {
            char c = peek();
            if (c == '[')
                ++bracket;
            else if (c == ']')
                --bracket;
            else if (c == '>' && bracket <= 0) {
                advance();
                return;
            }
            advance();
        }
        fail("unterminated DOCTYPE");
    }

    void skip_misc() {
        for (;;) {
            skip_space();
            if (starts_with("<?"))
                skip_until("?>", "processing instruction");
            else if (starts_with("<!--"))
                skip_until("-->", "comment");
            else if (starts_with("<!DOCTYPE"))
                skip_doctype();
            else
                return;
        }
    }

    std::string name() {
        if (eof() || !is_name_start(peek()))
            fail("expected a name");
        std::size_t start = pos_;
        while (!eof() && is_name_char(peek()))
            advance();
        return std::string(s_.substr(start, pos_ - start));
    }

    static void append_utf8(std::string& out, std::uint32_t cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    void entity(std::string& out) {
        expect("&");
        std::size_t start = pos_;
        while (!eof() && peek() != ';' && pos_ - start < 12)
            advance();
        if (eof() || peek() != ';')
            fail("unterminated entity reference");
        std::string_view ref = s_.substr(start, pos_ - start);
        advance();
        if (ref == "lt") out += '<';
        else if (ref == "gt") out += '>';
        else if (ref == "amp") out += '&';
        else if (ref == "quot") out += '"';
        else if (ref == "apos") out += '\'';
        else if (ref.size() > 1 && ref[0] == '#') {
            std::uint32_t cp = 0;
            const bool hex = ref[1] == 'x';
            std::string_view digits = ref.substr(hex ? 2 : 1);
            if (digits.empty())
                fail("empty character reference");
            for (char c : digits) {
                int d;
                if (c >= '0' && c <= '9') d = c - '0';
                else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
                else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
                else fail("bad character reference");
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
                if (cp > 0x10FFFF)
                    fail("character reference out of range");
            }
            append_utf8(out, cp);
        } else {
            fail("unknown entity '&" + std::string(ref) + ";'");
        }
    }

    std::string attribute_value() {
        char quote = peek();
        if (quote != '"' && quote != '\'')
            fail("expected quoted attribute value");
        advance();
        std::string out;
        while (!eof() && peek() != quote) {
            if (peek() == '<')
                fail("'<' in attribute value");
            if (peek() == '&')
                entity(out);
            else
                out += advance();
        }
        if (eof())
            fail("unterminated attribute value");
        advance();
        return out;
    }

    Element element(int depth) {
        if (depth > kMaxDepth)
            fail("nesting too deep");
        Element el;
        el.line = line_;
        el.column = col_;
        expect("<");
        el.name = name();
        for (;;) {
            const bool had_space = !eof() && is_space(peek());
            skip_space();
            if (starts_with("/>")) {
                advance(2);
                return el;
            }
            if (starts_with(">")) {
                advance();
                break;
            }
            if (!had_space)
                fail("expected whitespace before attribute");
            std::string key = name();
            skip_space();
            expect("=");
            skip_space();
            std::string value = attribute_value();
            if (el.attribute(key))
                fail("duplicate attribute '" + key + "'");
            el.attributes.emplace_back(std::move(key), std::move(value));
        }
        content(el, depth);
        return el;
    }

    void content(Element& el, int depth) {
        for (;;) {
            if (eof())
                fail("unexpected end of input inside <" + el.name + ">");
            if (starts_with("</")) {
                advance(2);
                std::string closing = name();
                if (closing != el.name)
                    fail("mismatched closing tag </" + closing + "> for <" + el.name + ">");
                skip_space();
                expect(">");
                return;
            }
            if (starts_with("<!--")) {
                skip_until("-->", "comment");
            } else if (starts_with("<![CDATA[")) {
                advance(9);
                std::size_t start = pos_;
                while (!eof() && !starts_with("]]>"))
                    advance();
                if (eof())
                    fail("unterminated CDATA section");
                el.text.append(s_.substr(start, pos_ - start));
                advance(3);
            } else if (starts_with("<?")) {
                skip_until("?>", "processing instruction");
            } else if (peek() == '<') {
                el.children.push_back(element(depth + 1));
            } else if (peek() == '&') {
                entity(el.text);
            } else {
                el.text += advance();
            }
        }
    }
};

} // namespace

Element parse(std::string_view text) {
    return Reader(text).document();
}

} // namespace vulnscore::xml
