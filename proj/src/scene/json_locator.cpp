#include "flowgen/scene/json_locator.hpp"

#include <cctype>

namespace flowgen::scene {

TextPosition position_of(std::string_view text, std::size_t offset) {
    TextPosition pos;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++pos.line;
            pos.column = 1;
        } else {
            ++pos.column;
        }
    }
    return pos;
}

namespace {

// Minimal recursive walk over already-validated JSON; it only needs to find
// value boundaries and object keys.
class Walker {
public:
    Walker(std::string_view text, std::map<std::string, TextPosition>& out) : text_(text), out_(out) {}

    void run() {
        skip_ws();
        value("");
    }

private:
    void skip_ws() {
        while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) advance();
    }

    void advance() {
        if (text_[i_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++i_;
    }

    std::string string_body() {
        std::string s;
        advance(); // opening quote
        while (i_ < text_.size() && text_[i_] != '"') {
            if (text_[i_] == '\\' && i_ + 1 < text_.size()) {
                advance();
                const char esc = text_[i_];
                s.push_back(esc == 'n' ? '\n' : esc == 't' ? '\t' : esc);
                advance();
                continue;
            }
            s.push_back(text_[i_]);
            advance();
        }
        if (i_ < text_.size()) advance();
        return s;
    }

    static std::string escape_token(const std::string& key) {
        std::string out;
        for (char c : key) {
            if (c == '~') out += "~0";
            else if (c == '/') out += "~1";
            else out.push_back(c);
        }
        return out;
    }

    void value(const std::string& pointer) {
        if (i_ >= text_.size()) return;
        out_[pointer] = {line_, col_};
        const char c = text_[i_];
        if (c == '{') {
            advance();
            skip_ws();
            while (i_ < text_.size() && text_[i_] != '}') {
                const std::string key = string_body();
                skip_ws();
                if (i_ < text_.size() && text_[i_] == ':') advance();
                skip_ws();
                value(pointer + "/" + escape_token(key));
                skip_ws();
                if (i_ < text_.size() && text_[i_] == ',') advance();
                skip_ws();
            }
            if (i_ < text_.size()) advance();
        } else if (c == '[') {
            advance();
            skip_ws();
            int index = 0;
            while (i_ < text_.size() && text_[i_] != ']') {
                value(pointer + "/" + std::to_string(index++));
                skip_ws();
                if (i_ < text_.size() && text_[i_] == ',') advance();
                skip_ws();
            }
            if (i_ < text_.size()) advance();
        } else if (c == '"') {
            string_body();
        } else {
            while (i_ < text_.size() && text_[i_] != ',' && text_[i_] != '}' && text_[i_] != ']' &&
                   !std::isspace(static_cast<unsigned char>(text_[i_]))) {
                advance();
            }
        }
    }

    std::string_view text_;
    std::map<std::string, TextPosition>& out_;
    std::size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;
};

} // namespace

JsonLocator::JsonLocator(std::string_view text) { Walker(text, positions_).run(); }

TextPosition JsonLocator::locate(const std::string& pointer) const {
    std::string p = pointer;
    while (true) {
        const auto it = positions_.find(p);
        if (it != positions_.end()) return it->second;
        const auto slash = p.rfind('/');
        if (slash == std::string::npos) return {};
        p.erase(slash);
    }
}

} // namespace flowgen::scene
