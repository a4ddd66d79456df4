#include "svarefine/checker.hpp"

#include <array>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char ** environ;

namespace svarefine::sva {

BuiltinChecker::BuiltinChecker(std::set<std::string> known_identifiers)
{
    options_.known_identifiers = std::move(known_identifiers);
}

std::vector<Diagnostic> BuiltinChecker::check(std::string const & assertion_text) const
{
    return parse_assertion(assertion_text, options_).diagnostics;
}

char const * to_string(CheckStatus status)
{
    switch (status) {
    case CheckStatus::unchecked: return "UNCHECKED";
    case CheckStatus::pass: return "PASS";
    case CheckStatus::fail: return "FAIL";
    }
    return "?";
}

void check_record(AssertionRecord & record, SyntaxChecker const & checker)
{
    record.diagnostics = checker.check(record.text);
    record.status = has_errors(record.diagnostics) ? CheckStatus::fail : CheckStatus::pass;
}

PartitionError::PartitionError(
    std::vector<std::size_t> unchecked, std::vector<AssertionRecord> records, std::string detail)
: CheckerUnavailable([&] {
    std::string msg = "checker unavailable for records";
    for (auto i : unchecked) {
        msg += " #" + std::to_string(i + 1);
    }
    return msg + ": " + detail;
}())
, unchecked_(std::move(unchecked))
, records_(std::move(records))
{}

Partition partition(std::vector<AssertionRecord> records, SyntaxChecker const & checker)
{
    std::vector<std::size_t> unchecked;
    std::string detail;
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            check_record(records[i], checker);
        } catch (CheckerUnavailable const & e) {
            records[i].status = CheckStatus::unchecked;
            records[i].diagnostics.clear();
            unchecked.push_back(i);
            if (detail.empty()) {
                detail = e.what();
            }
        }
    }
    if (!unchecked.empty()) {
        throw PartitionError(std::move(unchecked), std::move(records), detail);
    }
    Partition out;
    for (auto & r : records) {
        (r.status == CheckStatus::pass ? out.passed : out.failed).push_back(std::move(r));
    }
    return out;
}

std::string format_log(std::vector<AssertionRecord> const & records)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto const & r = records[i];
        os << "[" << (i + 1) << "] " << to_string(r.status) << "\n";
        for (auto const & d : r.diagnostics) {
            os << "  " << d.line << ":" << d.column << " "
               << (d.severity == Severity::error ? "error" : "warning") << " [" << d.code << "] " << d.message
               << "\n";
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// External tool adapter

ExternalCheckerConfig ExternalCheckerConfig::generic_profile(std::string command_template)
{
    ExternalCheckerConfig config;
    config.command_template = std::move(command_template);
    config.patterns = {
        {R"(ERROR \(line (\d+)(?:, col(?:umn)? (\d+))?\):\s*(.*))", Severity::error, 1, 2, 3},
        {R"(WARNING \(line (\d+)(?:, col(?:umn)? (\d+))?\):\s*(.*))", Severity::warning, 1, 2, 3},
    };
    return config;
}

namespace {

std::string shell_quote(std::string const & s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

class TempFile
{
public:
    TempFile(std::string const & contents, std::string const & suffix)
    {
        auto pattern = (std::filesystem::temp_directory_path() / "svarefine-XXXXXX").string() + suffix;
        std::vector<char> buf(pattern.begin(), pattern.end());
        buf.push_back('\0');
        int const fd = ::mkstemps(buf.data(), static_cast<int>(suffix.size()));
        if (fd < 0) {
            throw CheckerUnavailable(std::string("cannot create temporary file: ") + std::strerror(errno));
        }
        path_ = buf.data();
        std::size_t written = 0;
        while (written < contents.size()) {
            auto const n = ::write(fd, contents.data() + written, contents.size() - written);
            if (n <= 0) {
                ::close(fd);
                throw CheckerUnavailable("cannot write temporary file " + path_);
            }
            written += static_cast<std::size_t>(n);
        }
        ::close(fd);
    }

    ~TempFile()
    {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

    TempFile(TempFile const &) = delete;
    TempFile & operator=(TempFile const &) = delete;

    [[nodiscard]] std::string const & path() const { return path_; }

private:
    std::string path_;
};

struct ProcessResult
{
    int exit_status = 0;
    std::string output; // stdout and stderr interleaved
};

ProcessResult run_shell(std::string const & command, std::chrono::seconds timeout)
{
    int pipefd[2];
    if (::pipe2(pipefd, O_CLOEXEC) != 0) {
        throw CheckerUnavailable(std::string("pipe failed: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDERR_FILENO);
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);

    std::string const sh = "/bin/sh";
    std::string const flag = "-c";
    std::array<char *, 4> argv = {
        const_cast<char *>(sh.c_str()), const_cast<char *>(flag.c_str()), const_cast<char *>(command.c_str()),
        nullptr};
    pid_t pid = 0;
    int const rc = ::posix_spawn(&pid, sh.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(pipefd[1]);
    if (rc != 0) {
        ::close(pipefd[0]);
        throw CheckerUnavailable(std::string("cannot spawn checker: ") + std::strerror(rc));
    }

    ProcessResult result;
    auto const deadline = std::chrono::steady_clock::now() + timeout;
    std::array<char, 4096> buf{};
    bool timed_out = false;
    while (true) {
        auto const remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{pipefd[0], POLLIN, 0};
        int const ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (ready < 0 && errno == EINTR) {
            continue;
        }
        if (ready <= 0) {
            timed_out = ready == 0;
            break;
        }
        auto const n = ::read(pipefd[0], buf.data(), buf.size());
        if (n <= 0) {
            break;
        }
        result.output.append(buf.data(), static_cast<std::size_t>(n));
    }
    ::close(pipefd[0]);
    if (timed_out) {
        ::kill(pid, SIGKILL);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) {
        throw CheckerUnavailable("checker timed out after " + std::to_string(timeout.count()) + "s");
    }
    if (WIFEXITED(status)) {
        result.exit_status = WEXITSTATUS(status);
    } else {
        throw CheckerUnavailable("checker terminated by signal");
    }
    return result;
}

std::uint32_t to_position(std::smatch const & m, std::size_t group)
{
    if (group == 0 || group >= m.size() || !m[group].matched) {
        return 1;
    }
    try {
        return static_cast<std::uint32_t>(std::max(1UL, std::stoul(m[group].str())));
    } catch (std::exception const &) {
        return 1;
    }
}

} // namespace

std::vector<Diagnostic> external_check(ExternalCheckerConfig const & config, std::string const & assertion_text)
{
    auto const placeholder = config.command_template.find("{file}");
    if (placeholder == std::string::npos) {
        throw ConfigError("external checker command must contain {file}");
    }
    TempFile file(assertion_text, config.file_suffix);
    std::string command = config.command_template;
    command.replace(placeholder, 6, shell_quote(file.path()));

    auto const result = run_shell(command, config.timeout);
    if (result.exit_status == 126 || result.exit_status == 127) {
        throw CheckerUnavailable(
            "checker command could not be executed (exit " + std::to_string(result.exit_status) + ")");
    }

    std::vector<std::regex> compiled;
    compiled.reserve(config.patterns.size());
    for (auto const & p : config.patterns) {
        compiled.emplace_back(p.regex);
    }

    std::vector<Diagnostic> out;
    std::istringstream lines(result.output);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        for (std::size_t i = 0; i < compiled.size(); ++i) {
            std::smatch m;
            if (!std::regex_search(line, m, compiled[i])) {
                continue;
            }
            auto const & p = config.patterns[i];
            Diagnostic d;
            d.severity = p.severity;
            d.line = to_position(m, p.line_group);
            d.column = to_position(m, p.column_group);
            d.code = "external";
            d.message = (p.message_group > 0 && p.message_group < m.size()) ? m[p.message_group].str() : m[0].str();
            out.push_back(std::move(d));
            break;
        }
    }
    if (result.exit_status != 0 && !has_errors(out)) {
        out.push_back(Diagnostic{Severity::error, 1, 1, "external",
                                 "checker exited with status " + std::to_string(result.exit_status)});
    }
    return out;
}

ExternalChecker::ExternalChecker(ExternalCheckerConfig config)
: config_(std::move(config))
{
    if (config_.command_template.find("{file}") == std::string::npos) {
        throw ConfigError("external checker command must contain {file}");
    }
    for (auto const & p : config_.patterns) {
        try {
            std::regex probe(p.regex);
        } catch (std::regex_error const & e) {
            throw ConfigError("invalid diagnostic pattern '" + p.regex + "': " + e.what());
        }
    }
}

std::vector<Diagnostic> ExternalChecker::check(std::string const & assertion_text) const
{
    return external_check(config_, assertion_text);
}

} // namespace svarefine::sva
