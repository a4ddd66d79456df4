#pragma once

// Tokenizer and recursive-descent parser for the SystemVerilog assertion
// subset the generator works with: property declarations, clocking events,
// `disable iff`, implication, cycle delays, repetition, boolean and bit
// expressions, and system functions such as $rose/$fell/$stable/$past.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace svarefine::sva {

enum class TokenKind
{
    identifier,
    system_identifier, // $rose, $past, ...
    keyword,
    number,
    string,
    op,
    punctuation,
    error,
    end_of_input,
};

[[nodiscard]] char const * to_string(TokenKind kind);

struct Token
{
    TokenKind kind = TokenKind::end_of_input;
    std::string lexeme;
    std::uint32_t line = 1;   // 1-based
    std::uint32_t column = 1; // 1-based, in bytes
    std::size_t offset = 0;   // byte offset into the source

    [[nodiscard]] bool is(TokenKind k, std::string_view text) const { return kind == k && lexeme == text; }
    [[nodiscard]] bool is_op(std::string_view text) const { return is(TokenKind::op, text); }
    [[nodiscard]] bool is_punct(std::string_view text) const { return is(TokenKind::punctuation, text); }
    [[nodiscard]] bool is_keyword(std::string_view text) const { return is(TokenKind::keyword, text); }
};

/// Splits `source` into tokens, skipping whitespace and comments. The last
/// token is always end_of_input. Malformed input (unterminated block comment
/// or string, stray characters) yields error tokens; lexing never throws.
[[nodiscard]] std::vector<Token> tokenize(std::string_view source);

enum class Severity
{
    error,
    warning,
};

struct Diagnostic
{
    Severity severity = Severity::error;
    std::uint32_t line = 1;
    std::uint32_t column = 1;
    std::string code;
    std::string message;

    friend bool operator==(Diagnostic const &, Diagnostic const &) = default;
};

[[nodiscard]] bool has_errors(std::vector<Diagnostic> const & diagnostics);

// ---------------------------------------------------------------------------
// Syntax tree

enum class SyntaxKind
{
    unit,
    property_decl,
    port_list,
    assert_stmt,
    action_block,
    clocking_event,
    disable_iff,
    implication,     // a |-> b, a |=> b
    property_not,    // not p
    sequence_binary, // and / or / intersect / within / throughout
    sequence_concat, // a ##1 b, leading ##1 a
    cycle_delay,     // ##N, ##[m:n], ##(expr)
    repetition,      // a[*3], a[*1:$], a[=2], a[->1]
    conditional,     // c ? a : b
    binary,
    unary,
    paren,
    identifier,
    number,
    string,
    system_call,
    call,
    index,  // a[3], a[7:0], a[i+:4]
    member, // a.b
    concatenation,
    replication,
    unbounded, // `$` as a range bound
    argument_list,
};

[[nodiscard]] char const * to_string(SyntaxKind kind);

struct SyntaxNode;
using SyntaxPtr = std::shared_ptr<SyntaxNode const>;

/// Concrete syntax node. `parts` holds tokens and child nodes in source
/// order, so flattening a tree reproduces the parsed token stream exactly.
struct SyntaxNode
{
    SyntaxKind kind = SyntaxKind::unit;
    std::string op; // operator lexeme for operator nodes, name for leaves
    std::vector<std::variant<Token, SyntaxPtr>> parts;

    [[nodiscard]] std::vector<SyntaxPtr> children() const;
    /// Tokens of this subtree in source order.
    [[nodiscard]] std::vector<Token> tokens() const;
    /// Lexemes joined by single spaces.
    [[nodiscard]] std::string text() const;
};

enum class AstKind
{
    property_decl,
    assert_stmt,
};

struct SvaAst
{
    AstKind kind = AstKind::assert_stmt;
    /// Property name for declarations, label for labelled assert statements.
    std::optional<std::string> name;
    SyntaxPtr clocking;      // clocking_event node
    SyntaxPtr disable_expr;  // the expression inside disable iff (...)
    SyntaxPtr body;          // property expression
    SyntaxPtr assert_stmt;   // set when an assert statement is present
    SyntaxPtr root;          // whole unit, for round-tripping

    /// Tokens of the whole unit.
    [[nodiscard]] std::vector<Token> tokens() const { return root->tokens(); }
};

struct ParseResult
{
    std::optional<SvaAst> ast;
    std::vector<Diagnostic> diagnostics; // errors imply !ast; warnings may accompany an ast

    [[nodiscard]] bool ok() const { return ast.has_value(); }
};

struct ParseOptions
{
    /// When set, identifiers outside this set draw an "unknown identifier"
    /// warning. Without it, only property references are resolved.
    std::optional<std::set<std::string>> known_identifiers;
};

/// Parses one assertion unit: a property declaration optionally followed by
/// an assert statement, or a bare assert statement. Never throws on bad input.
[[nodiscard]] ParseResult parse_assertion(std::string_view source, ParseOptions const & options = {});

/// Splits free-form SVA text into assertion units. A unit is a
/// `property ... endproperty` block together with the assert statement that
/// references it by name, or a standalone assert/assume/cover statement.
/// Text outside any unit is ignored.
[[nodiscard]] std::vector<std::string> split_units(std::string_view source);

/// Strips comments, collapses whitespace runs, and folds repeated
/// semicolons. Used to merge textual duplicates.
[[nodiscard]] std::string normalize(std::string_view text);

} // namespace svarefine::sva
