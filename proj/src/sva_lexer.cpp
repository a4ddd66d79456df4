#include <array>
#include <cctype>

#include "svarefine/sva.hpp"

namespace svarefine::sva {

char const * to_string(TokenKind kind)
{
    switch (kind) {
    case TokenKind::identifier: return "identifier";
    case TokenKind::system_identifier: return "system_identifier";
    case TokenKind::keyword: return "keyword";
    case TokenKind::number: return "number";
    case TokenKind::string: return "string";
    case TokenKind::op: return "operator";
    case TokenKind::punctuation: return "punctuation";
    case TokenKind::error: return "error";
    case TokenKind::end_of_input: return "end_of_input";
    }
    return "?";
}

namespace {

constexpr std::array<std::string_view, 19> kKeywords = {
    "property", "endproperty", "assert", "assume", "cover", "disable", "iff",
    "posedge", "negedge", "edge", "not", "and", "or", "intersect", "within",
    "throughout", "else", "sequence", "endsequence",
};

// Longest first so that maximal munch falls out of a linear scan.
constexpr std::array<std::string_view, 31> kOperators = {
    "<<<", ">>>", "===", "!==", "|->", "|=>",
    "##", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "**", "~&", "~|", "~^", "^~", "+:", "-:", "->",
    "!", "~", "&", "|", "^", "+", "-", "*",
};
constexpr std::string_view kSingleOperators = "/%<>?=";
constexpr std::string_view kPunctuation = "()[]{};,.@:$#";

bool is_ident_start(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_based_digit(char c)
{
    return std::isxdigit(static_cast<unsigned char>(c)) || c == '_' || c == 'x' || c == 'X' || c == 'z'
        || c == 'Z' || c == '?';
}

class Lexer
{
public:
    explicit Lexer(std::string_view src)
    : src_(src)
    {}

    std::vector<Token> run()
    {
        std::vector<Token> out;
        while (true) {
            skip_trivia(out);
            if (pos_ >= src_.size()) {
                break;
            }
            out.push_back(next());
        }
        Token end;
        end.kind = TokenKind::end_of_input;
        end.line = line_;
        end.column = column_;
        end.offset = pos_;
        out.push_back(end);
        return out;
    }

private:
    char peek(std::size_t ahead = 0) const
    {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void advance(std::size_t n = 1)
    {
        for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
            if (src_[pos_] == '\n') {
                ++line_;
                column_ = 1;
            } else {
                ++column_;
            }
            ++pos_;
        }
    }

    Token start(TokenKind kind) const
    {
        Token t;
        t.kind = kind;
        t.line = line_;
        t.column = column_;
        t.offset = pos_;
        return t;
    }

    Token finish(Token t)
    {
        t.lexeme = std::string(src_.substr(t.offset, pos_ - t.offset));
        return t;
    }

    void skip_trivia(std::vector<Token> & out)
    {
        while (pos_ < src_.size()) {
            char const c = peek();
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && peek() != '\n') {
                    advance();
                }
            } else if (c == '/' && peek(1) == '*') {
                Token t = start(TokenKind::error);
                advance(2);
                bool closed = false;
                while (pos_ < src_.size()) {
                    if (peek() == '*' && peek(1) == '/') {
                        advance(2);
                        closed = true;
                        break;
                    }
                    advance();
                }
                if (!closed) {
                    out.push_back(finish(t));
                }
            } else {
                return;
            }
        }
    }

    Token next()
    {
        char const c = peek();
        if (is_ident_start(c)) {
            Token t = start(TokenKind::identifier);
            while (is_ident_char(peek())) {
                advance();
            }
            t = finish(t);
            for (auto kw : kKeywords) {
                if (t.lexeme == kw) {
                    t.kind = TokenKind::keyword;
                }
            }
            return t;
        }
        if (c == '\\') {
            // Escaped identifier runs to the next whitespace.
            Token t = start(TokenKind::identifier);
            advance();
            while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(peek()))) {
                advance();
            }
            t = finish(t);
            if (t.lexeme.size() == 1) {
                t.kind = TokenKind::error;
            }
            return t;
        }
        if (c == '$' && is_ident_start(peek(1))) {
            Token t = start(TokenKind::system_identifier);
            advance();
            while (is_ident_char(peek())) {
                advance();
            }
            return finish(t);
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '\'' && based_literal_follows(1))) {
            return number();
        }
        if (c == '"') {
            Token t = start(TokenKind::string);
            advance();
            while (pos_ < src_.size() && peek() != '"' && peek() != '\n') {
                if (peek() == '\\') {
                    advance();
                }
                advance();
            }
            if (peek() == '"') {
                advance();
            } else {
                t.kind = TokenKind::error;
            }
            return finish(t);
        }
        for (auto op : kOperators) {
            if (src_.substr(pos_, op.size()) == op) {
                Token t = start(TokenKind::op);
                advance(op.size());
                return finish(t);
            }
        }
        if (kSingleOperators.find(c) != std::string_view::npos) {
            Token t = start(TokenKind::op);
            advance();
            return finish(t);
        }
        if (kPunctuation.find(c) != std::string_view::npos) {
            Token t = start(TokenKind::punctuation);
            advance();
            return finish(t);
        }
        Token t = start(TokenKind::error);
        advance();
        return finish(t);
    }

    bool based_literal_follows(std::size_t ahead) const
    {
        char c = peek(ahead);
        if (c == 's' || c == 'S') {
            c = peek(ahead + 1);
        }
        return c == 'b' || c == 'B' || c == 'o' || c == 'O' || c == 'd' || c == 'D' || c == 'h' || c == 'H'
            || c == '0' || c == '1' || c == 'x' || c == 'X' || c == 'z' || c == 'Z';
    }

    Token number()
    {
        Token t = start(TokenKind::number);
        while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '_') {
            advance();
        }
        if (peek() == '\'' && based_literal_follows(1)) {
            advance();
            if (peek() == 's' || peek() == 'S') {
                advance();
            }
            char const base = peek();
            bool const has_base = std::string_view("bBoOdDhH").find(base) != std::string_view::npos;
            advance();
            if (has_base) {
                std::size_t digits = 0;
                while (is_based_digit(peek())) {
                    advance();
                    ++digits;
                }
                if (digits == 0) {
                    t.kind = TokenKind::error;
                }
            }
        }
        return finish(t);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::uint32_t line_ = 1;
    std::uint32_t column_ = 1;
};

} // namespace

std::vector<Token> tokenize(std::string_view source)
{
    return Lexer(source).run();
}

} // namespace svarefine::sva
