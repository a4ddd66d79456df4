#include <algorithm>
#include <array>
#include <functional>
#include <map>

#include "svarefine/sva.hpp"

namespace svarefine::sva {

char const * to_string(SyntaxKind kind)
{
    switch (kind) {
    case SyntaxKind::unit: return "unit";
    case SyntaxKind::property_decl: return "property_decl";
    case SyntaxKind::port_list: return "port_list";
    case SyntaxKind::assert_stmt: return "assert_stmt";
    case SyntaxKind::action_block: return "action_block";
    case SyntaxKind::clocking_event: return "clocking_event";
    case SyntaxKind::disable_iff: return "disable_iff";
    case SyntaxKind::implication: return "implication";
    case SyntaxKind::property_not: return "property_not";
    case SyntaxKind::sequence_binary: return "sequence_binary";
    case SyntaxKind::sequence_concat: return "sequence_concat";
    case SyntaxKind::cycle_delay: return "cycle_delay";
    case SyntaxKind::repetition: return "repetition";
    case SyntaxKind::conditional: return "conditional";
    case SyntaxKind::binary: return "binary";
    case SyntaxKind::unary: return "unary";
    case SyntaxKind::paren: return "paren";
    case SyntaxKind::identifier: return "identifier";
    case SyntaxKind::number: return "number";
    case SyntaxKind::string: return "string";
    case SyntaxKind::system_call: return "system_call";
    case SyntaxKind::call: return "call";
    case SyntaxKind::index: return "index";
    case SyntaxKind::member: return "member";
    case SyntaxKind::concatenation: return "concatenation";
    case SyntaxKind::replication: return "replication";
    case SyntaxKind::unbounded: return "unbounded";
    case SyntaxKind::argument_list: return "argument_list";
    }
    return "?";
}

std::vector<SyntaxPtr> SyntaxNode::children() const
{
    std::vector<SyntaxPtr> out;
    for (auto const & p : parts) {
        if (auto const * child = std::get_if<SyntaxPtr>(&p)) {
            out.push_back(*child);
        }
    }
    return out;
}

std::vector<Token> SyntaxNode::tokens() const
{
    std::vector<Token> out;
    std::function<void(SyntaxNode const &)> walk = [&](SyntaxNode const & n) {
        for (auto const & p : n.parts) {
            if (auto const * tok = std::get_if<Token>(&p)) {
                out.push_back(*tok);
            } else {
                walk(*std::get<SyntaxPtr>(p));
            }
        }
    };
    walk(*this);
    return out;
}

std::string SyntaxNode::text() const
{
    std::string out;
    for (auto const & t : tokens()) {
        if (!out.empty()) {
            out += ' ';
        }
        out += t.lexeme;
    }
    return out;
}

bool has_errors(std::vector<Diagnostic> const & diagnostics)
{
    return std::any_of(diagnostics.begin(), diagnostics.end(), [](Diagnostic const & d) {
        return d.severity == Severity::error;
    });
}

namespace {

constexpr std::array<std::string_view, 24> kKnownSystemFunctions = {
    "$rose", "$fell", "$stable", "$changed", "$past", "$sampled", "$onehot", "$onehot0",
    "$isunknown", "$countones", "$bits", "$clog2", "$signed", "$unsigned", "$error", "$fatal",
    "$warning", "$info", "$display", "$time", "$realtime", "$countbits", "$future_gclk", "$global_clock",
};

constexpr std::array<std::string_view, 10> kNeedsArgument = {
    "$rose", "$fell", "$stable", "$changed", "$past", "$sampled", "$onehot", "$onehot0", "$isunknown", "$countones",
};

struct ParseFailure
{
    Diagnostic diagnostic;
};

using MutableNode = std::shared_ptr<SyntaxNode>;

MutableNode make(SyntaxKind kind, std::string op = {})
{
    auto n = std::make_shared<SyntaxNode>();
    n->kind = kind;
    n->op = std::move(op);
    return n;
}

class Parser
{
public:
    Parser(std::vector<Token> tokens, ParseOptions const & options)
    : toks_(std::move(tokens))
    , options_(options)
    {}

    ParseResult run()
    {
        ParseResult result;
        for (auto const & t : toks_) {
            if (t.kind == TokenKind::error) {
                result.diagnostics.push_back(lex_error(t));
                return result;
            }
        }
        try {
            SvaAst ast = unit();
            result.diagnostics = std::move(warnings_);
            lint(ast, result.diagnostics);
            result.ast = std::move(ast);
        } catch (ParseFailure const & f) {
            result.diagnostics.push_back(f.diagnostic);
        }
        return result;
    }

private:
    // -- token helpers ------------------------------------------------------

    Token const & peek(std::size_t ahead = 0) const
    {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }

    bool at_end() const { return peek().kind == TokenKind::end_of_input; }

    Token take()
    {
        Token t = peek();
        if (!at_end()) {
            ++pos_;
        }
        return t;
    }

    static std::string describe(Token const & t)
    {
        if (t.kind == TokenKind::end_of_input) {
            return "end of input";
        }
        return "'" + t.lexeme + "'";
    }

    [[noreturn]] void fail(Token const & at, std::string code, std::string message) const
    {
        throw ParseFailure{Diagnostic{Severity::error, at.line, at.column, std::move(code), std::move(message)}};
    }

    Token expect_punct(std::string_view p)
    {
        if (!peek().is_punct(p)) {
            fail(peek(), "expected-token", "expected '" + std::string(p) + "' but found " + describe(peek()));
        }
        return take();
    }

    Token expect_keyword(std::string_view k)
    {
        if (!peek().is_keyword(k)) {
            fail(peek(), "expected-token", "expected '" + std::string(k) + "' but found " + describe(peek()));
        }
        return take();
    }

    Token expect_identifier(char const * what)
    {
        if (peek().kind != TokenKind::identifier) {
            fail(peek(), "expected-identifier", std::string("expected ") + what + " but found " + describe(peek()));
        }
        return take();
    }

    Diagnostic lex_error(Token const & t) const
    {
        std::string message;
        if (t.lexeme.rfind("/*", 0) == 0) {
            message = "unterminated block comment";
        } else if (!t.lexeme.empty() && t.lexeme.front() == '"') {
            message = "unterminated string literal";
        } else if (!t.lexeme.empty() && std::isdigit(static_cast<unsigned char>(t.lexeme.front()))) {
            message = "malformed number '" + t.lexeme + "'";
        } else {
            message = "unexpected character '" + t.lexeme + "'";
        }
        return Diagnostic{Severity::error, t.line, t.column, "lex-error", message};
    }

    // -- units ----------------------------------------------------------------

    SvaAst unit()
    {
        auto root = make(SyntaxKind::unit);
        SvaAst ast;
        if (at_end()) {
            fail(peek(), "empty-input", "expected 'property' or 'assert' but found end of input");
        }
        if (peek().is_keyword("property")) {
            ast.kind = AstKind::property_decl;
            auto decl = property_decl(ast);
            root->parts.emplace_back(decl);
            if (!at_end()) {
                if (!starts_assert_stmt()) {
                    fail(peek(), "unexpected-token", "expected assert statement after endproperty but found "
                                                         + describe(peek()));
                }
                SvaAst inner;
                auto stmt = assert_stmt(inner);
                ast.assert_stmt = stmt;
                root->parts.emplace_back(std::move(stmt));
                reference_ = inner.body;
            }
        } else if (starts_assert_stmt()) {
            ast.kind = AstKind::assert_stmt;
            auto stmt = assert_stmt(ast);
            ast.assert_stmt = stmt;
            root->parts.emplace_back(std::move(stmt));
            reference_ = ast.body;
        } else {
            fail(peek(), "unexpected-token", "expected 'property' or 'assert' but found " + describe(peek()));
        }
        if (!at_end()) {
            fail(peek(), "trailing-input", "unexpected " + describe(peek()) + " after end of assertion");
        }
        ast.root = root;
        return ast;
    }

    bool starts_assert_stmt() const
    {
        auto is_verb = [](Token const & t) {
            return t.is_keyword("assert") || t.is_keyword("assume") || t.is_keyword("cover");
        };
        return is_verb(peek())
            || (peek().kind == TokenKind::identifier && peek(1).is_punct(":") && is_verb(peek(2)));
    }

    SyntaxPtr property_decl(SvaAst & ast)
    {
        auto decl = make(SyntaxKind::property_decl);
        decl->parts.emplace_back(expect_keyword("property"));
        Token name = expect_identifier("property name");
        ast.name = name.lexeme;
        decl->op = name.lexeme;
        decl->parts.emplace_back(name);
        if (peek().is_punct("(")) {
            decl->parts.emplace_back(port_list());
        }
        decl->parts.emplace_back(expect_punct(";"));
        property_spec(*decl, ast);
        decl->parts.emplace_back(expect_punct(";"));
        decl->parts.emplace_back(expect_keyword("endproperty"));
        if (peek().is_punct(":")) {
            decl->parts.emplace_back(take());
            Token end_name = expect_identifier("property name after endproperty :");
            if (end_name.lexeme != name.lexeme) {
                fail(end_name, "label-mismatch",
                     "end label '" + end_name.lexeme + "' does not match property '" + name.lexeme + "'");
            }
            decl->parts.emplace_back(end_name);
        }
        return decl;
    }

    SyntaxPtr port_list()
    {
        auto ports = make(SyntaxKind::port_list);
        ports->parts.emplace_back(expect_punct("("));
        if (!peek().is_punct(")")) {
            while (true) {
                // Optional type words followed by the formal name.
                ports->parts.emplace_back(expect_identifier("formal argument"));
                while (peek().kind == TokenKind::identifier) {
                    ports->parts.emplace_back(take());
                }
                if (!peek().is_punct(",")) {
                    break;
                }
                ports->parts.emplace_back(take());
            }
        }
        ports->parts.emplace_back(expect_punct(")"));
        return ports;
    }

    /// [clocking_event] [disable iff (expr)] property_expr, appended to `into`.
    void property_spec(SyntaxNode & into, SvaAst & ast)
    {
        if (peek().is_punct("@")) {
            auto clk = clocking_event();
            ast.clocking = clk;
            into.parts.emplace_back(std::move(clk));
        }
        if (peek().is_keyword("disable")) {
            auto dis = make(SyntaxKind::disable_iff);
            dis->parts.emplace_back(take());
            dis->parts.emplace_back(expect_keyword("iff"));
            dis->parts.emplace_back(expect_punct("("));
            auto e = expression_required();
            ast.disable_expr = e;
            dis->parts.emplace_back(std::move(e));
            dis->parts.emplace_back(expect_punct(")"));
            into.parts.emplace_back(SyntaxPtr(dis));
        }
        auto body = property_expr_required();
        ast.body = body;
        into.parts.emplace_back(std::move(body));
    }

    SyntaxPtr clocking_event()
    {
        auto clk = make(SyntaxKind::clocking_event);
        clk->parts.emplace_back(expect_punct("@"));
        if (peek().kind == TokenKind::identifier) {
            clk->parts.emplace_back(take());
            return clk;
        }
        clk->parts.emplace_back(expect_punct("("));
        while (true) {
            if (peek().is_keyword("posedge") || peek().is_keyword("negedge") || peek().is_keyword("edge")) {
                clk->parts.emplace_back(take());
            }
            clk->parts.emplace_back(expression_required());
            if (peek().is_keyword("or") || peek().is_punct(",")) {
                clk->parts.emplace_back(take());
                continue;
            }
            break;
        }
        clk->parts.emplace_back(expect_punct(")"));
        return clk;
    }

    SyntaxPtr assert_stmt(SvaAst & ast)
    {
        auto stmt = make(SyntaxKind::assert_stmt);
        if (peek().kind == TokenKind::identifier) {
            Token label = take();
            if (!ast.name) {
                ast.name = label.lexeme;
            }
            stmt->parts.emplace_back(label);
            stmt->parts.emplace_back(expect_punct(":"));
        }
        Token verb = take();
        stmt->op = verb.lexeme;
        stmt->parts.emplace_back(verb);
        stmt->parts.emplace_back(expect_keyword("property"));
        stmt->parts.emplace_back(expect_punct("("));
        property_spec(*stmt, ast);
        stmt->parts.emplace_back(expect_punct(")"));
        if (peek().kind == TokenKind::system_identifier || peek().is_keyword("else")) {
            stmt->parts.emplace_back(action_block());
        } else {
            stmt->parts.emplace_back(expect_punct(";"));
        }
        return stmt;
    }

    // Pass and/or fail statements. Each statement is a system task call
    // terminated by ';'.
    SyntaxPtr action_block()
    {
        auto block = make(SyntaxKind::action_block);
        if (peek().kind == TokenKind::system_identifier) {
            block->parts.emplace_back(system_call());
            block->parts.emplace_back(expect_punct(";"));
        }
        if (peek().is_keyword("else")) {
            block->parts.emplace_back(take());
            if (peek().kind != TokenKind::system_identifier) {
                fail(peek(), "expected-token", "expected system task after 'else' but found " + describe(peek()));
            }
            block->parts.emplace_back(system_call());
            block->parts.emplace_back(expect_punct(";"));
        }
        return block;
    }

    // -- property and sequence expressions ----------------------------------

    bool starts_expression() const
    {
        Token const & t = peek();
        switch (t.kind) {
        case TokenKind::identifier:
        case TokenKind::system_identifier:
        case TokenKind::number:
        case TokenKind::string:
            return true;
        case TokenKind::punctuation:
            return t.lexeme == "(" || t.lexeme == "{";
        case TokenKind::op:
            return is_unary_op(t.lexeme);
        default:
            return false;
        }
    }

    bool starts_sequence() const
    {
        return starts_expression() || peek().is_op("##") || peek().is_keyword("not");
    }

    static bool is_unary_op(std::string_view op)
    {
        static constexpr std::array<std::string_view, 11> ops = {
            "!", "~", "&", "|", "^", "~&", "~|", "~^", "^~", "+", "-"};
        return std::find(ops.begin(), ops.end(), op) != ops.end();
    }

    std::string previous_lexeme() const
    {
        return pos_ == 0 ? std::string("start of input") : toks_[pos_ - 1].lexeme;
    }

    [[noreturn]] void fail_expected_expression() const
    {
        fail(peek(), "expected-expression", "expected expression after " + previous_lexeme());
    }

    SyntaxPtr property_expr_required()
    {
        if (!starts_sequence()) {
            fail_expected_expression();
        }
        return property_expr();
    }

    SyntaxPtr property_expr()
    {
        auto lhs = sequence_or();
        if (peek().is_op("|->") || peek().is_op("|=>")) {
            Token op = take();
            auto node = make(SyntaxKind::implication, op.lexeme);
            node->parts.emplace_back(std::move(lhs));
            node->parts.emplace_back(op);
            node->parts.emplace_back(property_expr_required());
            return node;
        }
        return lhs;
    }

    SyntaxPtr sequence_binary_level(std::string_view keyword, SyntaxPtr (Parser::*next)())
    {
        auto lhs = (this->*next)();
        while (peek().is_keyword(keyword)) {
            Token op = take();
            if (!starts_sequence()) {
                fail_expected_expression();
            }
            auto node = make(SyntaxKind::sequence_binary, op.lexeme);
            node->parts.emplace_back(std::move(lhs));
            node->parts.emplace_back(op);
            node->parts.emplace_back((this->*next)());
            lhs = node;
        }
        return lhs;
    }

    SyntaxPtr sequence_or() { return sequence_binary_level("or", &Parser::sequence_and); }
    SyntaxPtr sequence_and() { return sequence_binary_level("and", &Parser::sequence_intersect); }
    SyntaxPtr sequence_intersect() { return sequence_binary_level("intersect", &Parser::sequence_within); }
    SyntaxPtr sequence_within() { return sequence_binary_level("within", &Parser::sequence_throughout); }

    SyntaxPtr sequence_throughout()
    {
        auto lhs = sequence_concat();
        if (peek().is_keyword("throughout")) {
            Token op = take();
            if (!starts_sequence()) {
                fail_expected_expression();
            }
            auto node = make(SyntaxKind::sequence_binary, op.lexeme);
            node->parts.emplace_back(std::move(lhs));
            node->parts.emplace_back(op);
            node->parts.emplace_back(sequence_throughout());
            return node;
        }
        return lhs;
    }

    SyntaxPtr sequence_concat()
    {
        if (!peek().is_op("##")) {
            auto first = sequence_unit();
            if (!peek().is_op("##")) {
                return first;
            }
            auto node = make(SyntaxKind::sequence_concat);
            node->parts.emplace_back(std::move(first));
            concat_tail(*node);
            return node;
        }
        auto node = make(SyntaxKind::sequence_concat);
        concat_tail(*node);
        return node;
    }

    void concat_tail(SyntaxNode & node)
    {
        while (peek().is_op("##")) {
            node.parts.emplace_back(cycle_delay());
            if (!starts_expression() && !peek().is_keyword("not")) {
                fail_expected_expression();
            }
            node.parts.emplace_back(sequence_unit());
        }
    }

    SyntaxPtr cycle_delay()
    {
        auto delay = make(SyntaxKind::cycle_delay);
        delay->parts.emplace_back(take()); // ##
        Token const & t = peek();
        if (t.kind == TokenKind::number || t.kind == TokenKind::identifier) {
            delay->parts.emplace_back(take());
        } else if (t.is_punct("(")) {
            delay->parts.emplace_back(take());
            delay->parts.emplace_back(expression_required());
            delay->parts.emplace_back(expect_punct(")"));
        } else if (t.is_punct("[")) {
            delay->parts.emplace_back(take());
            if (peek().is_op("*") || peek().is_op("+")) {
                delay->parts.emplace_back(take());
            } else {
                range(*delay);
            }
            delay->parts.emplace_back(expect_punct("]"));
        } else {
            fail(t, "expected-delay", "expected delay value after ## but found " + describe(t));
        }
        return delay;
    }

    /// lo ':' (hi | '$')
    void range(SyntaxNode & into)
    {
        into.parts.emplace_back(expression_required());
        into.parts.emplace_back(expect_punct(":"));
        if (peek().is_punct("$")) {
            auto unbounded = make(SyntaxKind::unbounded);
            unbounded->parts.emplace_back(take());
            into.parts.emplace_back(SyntaxPtr(unbounded));
        } else {
            into.parts.emplace_back(expression_required());
        }
    }

    SyntaxPtr sequence_unit()
    {
        if (peek().is_keyword("not")) {
            Token op = take();
            auto node = make(SyntaxKind::property_not, op.lexeme);
            node->parts.emplace_back(op);
            if (!starts_expression() && !peek().is_keyword("not")) {
                fail_expected_expression();
            }
            node->parts.emplace_back(sequence_unit());
            return node;
        }
        auto primary = expression_required();
        if (repetition_follows()) {
            auto rep = make(SyntaxKind::repetition);
            rep->parts.emplace_back(std::move(primary));
            rep->parts.emplace_back(take()); // [
            Token kind = take();
            rep->op = kind.lexeme;
            rep->parts.emplace_back(kind);
            if (!peek().is_punct("]")) {
                if (kind.lexeme == "+") {
                    fail(peek(), "expected-token", "expected ']' but found " + describe(peek()));
                }
                auto lo = expression_required();
                rep->parts.emplace_back(std::move(lo));
                if (peek().is_punct(":")) {
                    rep->parts.emplace_back(take());
                    if (peek().is_punct("$")) {
                        auto unbounded = make(SyntaxKind::unbounded);
                        unbounded->parts.emplace_back(take());
                        rep->parts.emplace_back(SyntaxPtr(unbounded));
                    } else {
                        rep->parts.emplace_back(expression_required());
                    }
                }
            } else if (kind.lexeme != "*" && kind.lexeme != "+") {
                fail(peek(), "expected-expression", "expected repetition count after " + kind.lexeme);
            }
            rep->parts.emplace_back(expect_punct("]"));
            return rep;
        }
        return primary;
    }

    bool repetition_follows() const
    {
        if (!peek().is_punct("[")) {
            return false;
        }
        Token const & k = peek(1);
        return k.is_op("*") || k.is_op("=") || k.is_op("->") || (k.is_op("+") && peek(2).is_punct("]"));
    }

    // -- plain expressions ----------------------------------------------------

    SyntaxPtr expression_required()
    {
        if (!starts_expression()) {
            fail_expected_expression();
        }
        return conditional();
    }

    SyntaxPtr conditional()
    {
        auto cond = binary_level(0);
        if (peek().is_op("?")) {
            auto node = make(SyntaxKind::conditional, "?");
            node->parts.emplace_back(std::move(cond));
            node->parts.emplace_back(take());
            node->parts.emplace_back(expression_required_after_conditional());
            node->parts.emplace_back(expect_punct(":"));
            node->parts.emplace_back(expression_required_after_conditional());
            return node;
        }
        return cond;
    }

    SyntaxPtr expression_required_after_conditional()
    {
        if (!starts_expression()) {
            fail_expected_expression();
        }
        return conditional();
    }

    // Binary precedence table, loosest first.
    static std::vector<std::vector<std::string_view>> const & levels()
    {
        static std::vector<std::vector<std::string_view>> const table = {
            {"||"},
            {"&&"},
            {"|"},
            {"^", "~^", "^~"},
            {"&"},
            {"==", "!=", "===", "!=="},
            {"<", "<=", ">", ">="},
            {"<<", ">>", "<<<", ">>>"},
            {"+", "-"},
            {"*", "/", "%"},
            {"**"},
        };
        return table;
    }

    bool binary_op_at(std::size_t level) const
    {
        if (peek().kind != TokenKind::op) {
            return false;
        }
        auto const & ops = levels()[level];
        if (std::find(ops.begin(), ops.end(), peek().lexeme) == ops.end()) {
            return false;
        }
        // `a [*3]` style repetition never reaches here; guard `*` followed by `]`.
        return true;
    }

    SyntaxPtr binary_level(std::size_t level)
    {
        if (level == levels().size()) {
            return unary();
        }
        auto lhs = binary_level(level + 1);
        while (binary_op_at(level)) {
            Token op = take();
            if (!starts_expression()) {
                fail_expected_expression();
            }
            auto node = make(SyntaxKind::binary, op.lexeme);
            node->parts.emplace_back(std::move(lhs));
            node->parts.emplace_back(op);
            node->parts.emplace_back(binary_level(level + 1));
            lhs = node;
        }
        return lhs;
    }

    SyntaxPtr unary()
    {
        if (peek().kind == TokenKind::op && is_unary_op(peek().lexeme)) {
            Token op = take();
            if (!starts_expression()) {
                fail_expected_expression();
            }
            auto node = make(SyntaxKind::unary, op.lexeme);
            node->parts.emplace_back(op);
            node->parts.emplace_back(unary());
            return node;
        }
        return postfix();
    }

    SyntaxPtr postfix()
    {
        auto base = primary();
        while (true) {
            if (peek().is_punct("[") && !repetition_follows()) {
                auto idx = make(SyntaxKind::index);
                idx->parts.emplace_back(std::move(base));
                idx->parts.emplace_back(take());
                idx->parts.emplace_back(expression_required());
                if (peek().is_punct(":") || peek().is_op("+:") || peek().is_op("-:")) {
                    idx->parts.emplace_back(take());
                    idx->parts.emplace_back(expression_required());
                }
                idx->parts.emplace_back(expect_punct("]"));
                base = idx;
            } else if (peek().is_punct(".")) {
                auto mem = make(SyntaxKind::member);
                mem->parts.emplace_back(std::move(base));
                mem->parts.emplace_back(take());
                Token field = expect_identifier("member name after '.'");
                mem->op = field.lexeme;
                mem->parts.emplace_back(field);
                base = mem;
            } else {
                return base;
            }
        }
    }

    SyntaxPtr argument_list()
    {
        auto args = make(SyntaxKind::argument_list);
        args->parts.emplace_back(expect_punct("("));
        if (!peek().is_punct(")")) {
            while (true) {
                // Sequence-valued arguments ($past(a ##1 b) is rare, but
                // sequence instances take sequences) are allowed.
                if (!starts_sequence()) {
                    fail_expected_expression();
                }
                args->parts.emplace_back(property_expr());
                if (!peek().is_punct(",")) {
                    break;
                }
                args->parts.emplace_back(take());
            }
        }
        args->parts.emplace_back(expect_punct(")"));
        return args;
    }

    SyntaxPtr system_call()
    {
        Token name = take();
        auto call = make(SyntaxKind::system_call, name.lexeme);
        call->parts.emplace_back(name);
        bool const needs_argument = std::find(kNeedsArgument.begin(), kNeedsArgument.end(), name.lexeme)
            != kNeedsArgument.end();
        if (peek().is_punct("(")) {
            if (needs_argument && peek(1).is_punct(")")) {
                fail(peek(1), "missing-argument", name.lexeme + " requires an argument");
            }
            call->parts.emplace_back(argument_list());
        } else if (needs_argument) {
            fail(peek(), "missing-argument", name.lexeme + " requires an argument");
        }
        return call;
    }

    SyntaxPtr primary()
    {
        Token const & t = peek();
        switch (t.kind) {
        case TokenKind::number: {
            auto n = make(SyntaxKind::number, t.lexeme);
            n->parts.emplace_back(take());
            return n;
        }
        case TokenKind::string: {
            auto n = make(SyntaxKind::string, t.lexeme);
            n->parts.emplace_back(take());
            return n;
        }
        case TokenKind::identifier: {
            Token name = take();
            if (peek().is_punct("(")) {
                auto call = make(SyntaxKind::call, name.lexeme);
                call->parts.emplace_back(name);
                call->parts.emplace_back(argument_list());
                return call;
            }
            auto n = make(SyntaxKind::identifier, name.lexeme);
            n->parts.emplace_back(name);
            return n;
        }
        case TokenKind::system_identifier:
            return system_call();
        case TokenKind::punctuation:
            if (t.lexeme == "(") {
                auto paren = make(SyntaxKind::paren);
                paren->parts.emplace_back(take());
                paren->parts.emplace_back(property_expr_required());
                paren->parts.emplace_back(expect_punct(")"));
                return paren;
            }
            if (t.lexeme == "{") {
                return concatenation();
            }
            break;
        default:
            break;
        }
        fail_expected_expression();
    }

    SyntaxPtr concatenation()
    {
        Token open = take();
        auto first = expression_required();
        if (peek().is_punct("{")) {
            auto rep = make(SyntaxKind::replication);
            rep->parts.emplace_back(open);
            rep->parts.emplace_back(std::move(first));
            rep->parts.emplace_back(concatenation());
            rep->parts.emplace_back(expect_punct("}"));
            return rep;
        }
        auto cat = make(SyntaxKind::concatenation);
        cat->parts.emplace_back(open);
        cat->parts.emplace_back(std::move(first));
        while (peek().is_punct(",")) {
            cat->parts.emplace_back(take());
            cat->parts.emplace_back(expression_required());
        }
        cat->parts.emplace_back(expect_punct("}"));
        return cat;
    }

    // -- lint -----------------------------------------------------------------

    void lint(SvaAst const & ast, std::vector<Diagnostic> & out) const
    {
        // A bare reference `assert property (p)` must name the declared property.
        std::string referenced;
        if (reference_ && reference_->kind == SyntaxKind::identifier) {
            referenced = reference_->op;
            bool const resolved = ast.kind == AstKind::property_decl && ast.name == referenced;
            if (!resolved) {
                auto tok = reference_->tokens().front();
                out.push_back(Diagnostic{Severity::warning, tok.line, tok.column, "unresolved-property",
                                         "unresolved property reference " + referenced});
            }
        }

        std::function<void(SyntaxNode const &)> walk = [&](SyntaxNode const & n) {
            if (n.kind == SyntaxKind::system_call) {
                auto const known = std::find(kKnownSystemFunctions.begin(), kKnownSystemFunctions.end(), n.op);
                if (known == kKnownSystemFunctions.end()) {
                    auto tok = n.tokens().front();
                    out.push_back(Diagnostic{Severity::warning, tok.line, tok.column, "unknown-system-function",
                                             "unknown system function " + n.op});
                }
            }
            if (n.kind == SyntaxKind::identifier && options_.known_identifiers && n.op != referenced
                && !options_.known_identifiers->contains(n.op)) {
                auto tok = n.tokens().front();
                out.push_back(Diagnostic{Severity::warning, tok.line, tok.column, "unknown-identifier",
                                         "unknown identifier " + n.op});
            }
            for (auto const & c : n.children()) {
                walk(*c);
            }
        };
        walk(*ast.root);
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    ParseOptions const & options_;
    std::vector<Diagnostic> warnings_;
    SyntaxPtr reference_; // body of the assert statement, if any
};

} // namespace

ParseResult parse_assertion(std::string_view source, ParseOptions const & options)
{
    return Parser(tokenize(source), options).run();
}

// ---------------------------------------------------------------------------
// Unit splitting and normalization

namespace {

bool is_verb(Token const & t)
{
    return t.is_keyword("assert") || t.is_keyword("assume") || t.is_keyword("cover");
}

struct Span
{
    std::size_t begin = 0;
    std::size_t end = 0;
};

std::size_t token_end(Token const & t)
{
    return t.offset + t.lexeme.size();
}

} // namespace

std::vector<std::string> split_units(std::string_view source)
{
    auto const toks = tokenize(source);
    std::size_t const last = toks.size() - 1; // end_of_input

    struct Unit
    {
        Span decl;
        std::optional<Span> stmt;
        std::string name;
        bool is_decl = false;
    };
    std::vector<Unit> units;
    std::map<std::string, std::size_t> unpaired; // property name -> unit index

    std::size_t i = 0;
    while (i < last) {
        Token const & t = toks[i];
        if (t.is_keyword("property")) {
            Unit u;
            u.is_decl = true;
            u.decl.begin = t.offset;
            if (i + 1 < last && toks[i + 1].kind == TokenKind::identifier) {
                u.name = toks[i + 1].lexeme;
            }
            std::size_t j = i + 1;
            while (j < last && !toks[j].is_keyword("endproperty") && !toks[j].is_keyword("property")) {
                ++j;
            }
            if (j < last && toks[j].is_keyword("endproperty")) {
                if (j + 2 < last && toks[j + 1].is_punct(":") && toks[j + 2].kind == TokenKind::identifier) {
                    j += 2;
                }
                u.decl.end = token_end(toks[j]);
                i = j + 1;
            } else {
                // Unterminated declaration; keep it so the checker reports it.
                u.decl.end = j > i + 1 ? token_end(toks[j - 1]) : token_end(t);
                i = j;
            }
            if (!u.name.empty()) {
                unpaired[u.name] = units.size();
            }
            units.push_back(std::move(u));
            continue;
        }
        bool const labelled = t.kind == TokenKind::identifier && i + 2 < last && toks[i + 1].is_punct(":")
            && is_verb(toks[i + 2]);
        if (is_verb(t) || labelled) {
            std::size_t const verb = labelled ? i + 2 : i;
            Span span{t.offset, 0};
            int depth = 0;
            std::size_t j = i;
            bool next_decl = false;
            while (j < last) {
                Token const & k = toks[j];
                if (k.is_punct("(") || k.is_punct("[") || k.is_punct("{")) {
                    ++depth;
                } else if (k.is_punct(")") || k.is_punct("]") || k.is_punct("}")) {
                    --depth;
                } else if (depth <= 0 && k.is_keyword("property") && !is_verb(toks[j - 1])) {
                    next_decl = true;
                    break;
                }
                if (k.is_punct(";") && depth <= 0) {
                    if (j + 1 < last && toks[j + 1].is_keyword("else")) {
                        ++j;
                        continue;
                    }
                    break;
                }
                ++j;
            }
            if (next_decl) {
                span.end = token_end(toks[j - 1]);
                i = j;
            } else {
                span.end = token_end(toks[std::min(j, last - 1)]);
                i = j + 1;
            }

            // assert property ( name ) ... pairs with a declared property.
            std::string ref;
            if (verb + 4 < toks.size() && toks[verb + 1].is_keyword("property") && toks[verb + 2].is_punct("(")
                && toks[verb + 3].kind == TokenKind::identifier && toks[verb + 4].is_punct(")")) {
                ref = toks[verb + 3].lexeme;
            }
            if (auto it = unpaired.find(ref); !ref.empty() && it != unpaired.end()) {
                units[it->second].stmt = span;
                unpaired.erase(it);
            } else {
                Unit u;
                u.decl = span;
                units.push_back(std::move(u));
            }
            continue;
        }
        ++i;
    }

    std::vector<std::string> out;
    out.reserve(units.size());
    for (auto const & u : units) {
        std::string text(source.substr(u.decl.begin, u.decl.end - u.decl.begin));
        if (u.stmt) {
            text += '\n';
            text += source.substr(u.stmt->begin, u.stmt->end - u.stmt->begin);
        }
        out.push_back(std::move(text));
    }
    return out;
}

std::string normalize(std::string_view text)
{
    std::string stripped;
    stripped.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        char const c = text[i];
        if (c == '"') {
            std::size_t j = i + 1;
            while (j < text.size() && text[j] != '"' && text[j] != '\n') {
                j += text[j] == '\\' ? 2 : 1;
            }
            j = std::min(j, text.size() - 1);
            stripped.append(text.substr(i, j - i + 1));
            i = j;
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            while (i < text.size() && text[i] != '\n') {
                ++i;
            }
            stripped += ' ';
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
            auto const close = text.find("*/", i + 2);
            i = close == std::string_view::npos ? text.size() : close + 1;
            stripped += ' ';
        } else {
            stripped += c;
        }
    }

    std::string out;
    out.reserve(stripped.size());
    bool pending_space = false;
    for (char c : stripped) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (c == ';') {
            // Fold "; ;" runs into a single semicolon.
            std::size_t k = out.size();
            if (k > 0 && out[k - 1] == ';') {
                pending_space = false;
                continue;
            }
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += c;
    }
    return out;
}

} // namespace svarefine::sva
