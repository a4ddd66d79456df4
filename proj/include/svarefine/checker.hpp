#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "svarefine/errors.hpp"
#include "svarefine/sva.hpp"
#include "svarefine/tree.hpp"

namespace svarefine::sva {

/// Syntax verdict provider. Implementations must be pure in the input text.
class SyntaxChecker
{
public:
    virtual ~SyntaxChecker() = default;

    /// Empty result means the assertion passes. Throws CheckerUnavailable
    /// when the checker cannot run at all.
    [[nodiscard]] virtual std::vector<Diagnostic> check(std::string const & assertion_text) const = 0;
};

/// In-process checker backed by `parse_assertion`.
class BuiltinChecker final : public SyntaxChecker
{
public:
    BuiltinChecker() = default;
    explicit BuiltinChecker(std::set<std::string> known_identifiers);

    [[nodiscard]] std::vector<Diagnostic> check(std::string const & assertion_text) const override;

private:
    ParseOptions options_;
};

struct DiagnosticPattern
{
    std::string regex;
    Severity severity = Severity::error;
    std::size_t line_group = 0;    // 0 = not captured
    std::size_t column_group = 0;  // 0 = not captured
    std::size_t message_group = 0; // 0 = whole match
};

struct ExternalCheckerConfig
{
    /// Shell command; `{file}` is replaced by the quoted path of a temporary
    /// file holding the assertion.
    std::string command_template;
    std::vector<DiagnosticPattern> patterns;
    std::chrono::seconds timeout{60};
    std::string file_suffix = ".sv";

    /// Profile for tools that print lines like "ERROR (line 3): message".
    static ExternalCheckerConfig generic_profile(std::string command_template);
};

/// Runs an external tool on one assertion and maps its output to diagnostics.
/// A non-zero exit with no matching line yields a single generic error.
/// Throws CheckerUnavailable on spawn failure, exit status 126/127, or timeout.
[[nodiscard]] std::vector<Diagnostic> external_check(
    ExternalCheckerConfig const & config, std::string const & assertion_text);

class ExternalChecker final : public SyntaxChecker
{
public:
    explicit ExternalChecker(ExternalCheckerConfig config);

    [[nodiscard]] std::vector<Diagnostic> check(std::string const & assertion_text) const override;

private:
    ExternalCheckerConfig config_;
};

enum class CheckStatus
{
    unchecked,
    pass,
    fail,
};

[[nodiscard]] char const * to_string(CheckStatus status);

struct AssertionRecord
{
    std::string text;
    std::string signal;
    tree::NodeId node_id = 0;
    CheckStatus status = CheckStatus::unchecked;
    std::vector<Diagnostic> diagnostics;
};

struct Partition
{
    std::vector<AssertionRecord> passed; // A1
    std::vector<AssertionRecord> failed; // A2
};

/// Raised by `partition` when the checker could not run for some records.
class PartitionError : public CheckerUnavailable
{
public:
    PartitionError(std::vector<std::size_t> unchecked, std::vector<AssertionRecord> records, std::string detail);

    [[nodiscard]] std::vector<std::size_t> const & unchecked() const { return unchecked_; }
    [[nodiscard]] std::vector<AssertionRecord> const & records() const { return records_; }

private:
    std::vector<std::size_t> unchecked_;
    std::vector<AssertionRecord> records_;
};

/// Checks every record once and splits into pass/fail, preserving order.
[[nodiscard]] Partition partition(std::vector<AssertionRecord> records, SyntaxChecker const & checker);

/// Checks a single record in place.
void check_record(AssertionRecord & record, SyntaxChecker const & checker);

/// Tool-style log: one block per record with its 1-based index, verdict and
/// diagnostics as `line:column severity [code] message`.
[[nodiscard]] std::string format_log(std::vector<AssertionRecord> const & records);

} // namespace svarefine::sva
