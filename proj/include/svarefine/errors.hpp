#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace svarefine {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (unknown node id, ln(0), ...).
class PreconditionError : public Error
{
public:
    using Error::Error;
};

/// A numeric value fell outside its admissible range.
class RangeError : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Transport or replay failure inside a chat backend.
class BackendError : public Error
{
public:
    using Error::Error;
};

/// A template referenced a placeholder that the render context does not supply.
class RenderError : public Error
{
public:
    RenderError(std::string placeholder)
    : Error("missing placeholder '" + placeholder + "'")
    , placeholder_(std::move(placeholder))
    {}

    [[nodiscard]] std::string const & placeholder() const { return placeholder_; }

private:
    std::string placeholder_;
};

/// Critic output did not carry a usable score marker.
class ScoreParseError : public Error
{
public:
    ScoreParseError(std::string what, std::string raw_text)
    : Error(std::move(what))
    , raw_text_(std::move(raw_text))
    {}

    [[nodiscard]] std::string const & raw_text() const { return raw_text_; }

private:
    std::string raw_text_;
};

/// The syntax checker itself could not run (missing binary, timeout, ...).
/// Distinct from an assertion failing the check.
class CheckerUnavailable : public Error
{
public:
    using Error::Error;
};

class StageError : public Error
{
public:
    using Error::Error;
};

/// Schema violation while loading a persisted document. `path()` names the
/// offending field, e.g. "signals[0].verilog_name".
class LoadError : public Error
{
public:
    LoadError(std::string path, std::string const & reason)
    : Error(path + ": " + reason)
    , path_(std::move(path))
    {}

    [[nodiscard]] std::string const & path() const { return path_; }

private:
    std::string path_;
};

/// A document loaded fine but breaks a semantic invariant (duplicate keys, ...).
class ValidationError : public Error
{
public:
    using Error::Error;
};

class BudgetExceeded : public Error
{
public:
    using Error::Error;
};

} // namespace svarefine
