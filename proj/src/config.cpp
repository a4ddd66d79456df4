#include <filesystem>
#include <fstream>
#include <set>

#include "svarefine/errors.hpp"
#include "svarefine/pipeline.hpp"

namespace svarefine::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint32_t RunConfig::call_budget() const
{
    return max_api_calls_per_signal.value_or(default_call_budget(search.n_rollouts));
}

void RunConfig::validate() const
{
    search.validate();
    if (call_budget() < 4) {
        throw ConfigError("max_api_calls_per_signal must be at least 4");
    }
    if (parallel == 0) {
        throw ConfigError("parallel must be at least 1");
    }
    if (backend.kind != "scripted" && backend.kind != "http") {
        throw ConfigError("backend.kind must be 'scripted' or 'http'");
    }
    if (checker.kind == CheckerKind::external && checker.external.command_template.find("{file}") == std::string::npos) {
        throw ConfigError("checker.command must contain {file}");
    }
    if (rag.chunking.k == 0) {
        throw ConfigError("rag.k must be at least 1");
    }
    if (rag.chunking.size == 0 || rag.chunking.overlap >= rag.chunking.size) {
        throw ConfigError("rag.overlap must be smaller than rag.chunk_size");
    }
    if (early_stop_score < search.score_min || early_stop_score > search.score_max) {
        throw ConfigError("early_stop_score outside the score range");
    }
}

namespace {

class Reader
{
public:
    Reader(json const & obj, std::string path, std::string base_dir)
    : obj_(obj)
    , path_(std::move(path))
    , base_(std::move(base_dir))
    {
        if (!obj_.is_object()) {
            throw ConfigError(where() + " must be an object");
        }
    }

    ~Reader() noexcept(false)
    {
        if (std::uncaught_exceptions() > 0) {
            return;
        }
        for (auto const & [key, value] : obj_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError("unknown config key '" + join(key) + "'");
            }
        }
    }

    Reader(Reader const &) = delete;
    Reader & operator=(Reader const &) = delete;

    [[nodiscard]] bool has(std::string const & key)
    {
        seen_.insert(key);
        return obj_.contains(key) && !obj_.at(key).is_null();
    }

    template <typename T>
    void get(std::string const & key, T & out)
    {
        if (!has(key)) {
            return;
        }
        try {
            out = obj_.at(key).get<T>();
        } catch (json::exception const &) {
            throw ConfigError("config key '" + join(key) + "' has the wrong type");
        }
    }

    void number(std::string const & key, double & out)
    {
        if (!has(key)) {
            return;
        }
        if (!obj_.at(key).is_number()) {
            throw ConfigError("config key '" + join(key) + "' must be a number");
        }
        out = obj_.at(key).get<double>();
    }

    template <typename T>
    void count(std::string const & key, T & out)
    {
        if (!has(key)) {
            return;
        }
        auto const & v = obj_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw ConfigError("config key '" + join(key) + "' must be a non-negative integer");
        }
        out = v.get<T>();
    }

    void path(std::string const & key, std::string & out)
    {
        std::string raw;
        get(key, raw);
        if (!raw.empty()) {
            out = resolve(raw);
        }
    }

    [[nodiscard]] std::string resolve(std::string const & raw) const
    {
        fs::path p(raw);
        return p.is_absolute() ? raw : (fs::path(base_) / p).lexically_normal().string();
    }

    [[nodiscard]] json const & at(std::string const & key) { return (seen_.insert(key), obj_.at(key)); }
    [[nodiscard]] std::string join(std::string const & key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] std::string const & base() const { return base_; }

private:
    [[nodiscard]] std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    json const & obj_;
    std::string path_;
    std::string base_;
    std::set<std::string> seen_;
};

sva::Severity parse_severity(std::string const & s)
{
    if (s == "error") {
        return sva::Severity::error;
    }
    if (s == "warning") {
        return sva::Severity::warning;
    }
    throw ConfigError("pattern severity must be 'error' or 'warning'");
}

} // namespace

RunConfig RunConfig::from_json(json const & doc, std::string const & base_dir)
{
    RunConfig c;
    Reader top(doc, "", base_dir);

    if (top.has("search")) {
        Reader r(top.at("search"), "search", base_dir);
        r.number("c", c.search.c);
        r.number("epsilon", c.search.epsilon);
        r.count("n_rollouts", c.search.n_rollouts);
        r.number("score_cap", c.search.score_cap);
    }
    if (top.has("backend")) {
        Reader r(top.at("backend"), "backend", base_dir);
        if (r.has("api_key")) {
            throw ConfigError("backend.api_key is not allowed; set the key in the environment variable named by "
                              "backend.api_key_env");
        }
        r.get("kind", c.backend.kind);
        r.path("script", c.backend.script_path);
        r.get("endpoint", c.backend.http.endpoint);
        r.get("path", c.backend.http.path);
        r.get("model", c.backend.http.model);
        r.get("api_key_env", c.backend.http.api_key_env);
        std::int64_t timeout = c.backend.http.timeout.count();
        r.count("timeout_s", timeout);
        c.backend.http.timeout = std::chrono::seconds(timeout);
        if (r.has("temperature")) {
            double t = 0;
            r.number("temperature", t);
            c.backend.http.temperature = t;
        }
    }
    if (top.has("checker")) {
        Reader r(top.at("checker"), "checker", base_dir);
        std::string kind = "builtin";
        r.get("kind", kind);
        if (kind == "builtin") {
            c.checker.kind = CheckerKind::builtin;
        } else if (kind == "external") {
            c.checker.kind = CheckerKind::external;
        } else {
            throw ConfigError("checker.kind must be 'builtin' or 'external'");
        }
        std::string command;
        r.get("command", command);
        c.checker.external = sva::ExternalCheckerConfig::generic_profile(command);
        std::int64_t timeout = c.checker.external.timeout.count();
        r.count("timeout_s", timeout);
        c.checker.external.timeout = std::chrono::seconds(timeout);
        r.get("file_suffix", c.checker.external.file_suffix);
        if (r.has("patterns")) {
            auto const & patterns = r.at("patterns");
            if (!patterns.is_array()) {
                throw ConfigError("checker.patterns must be an array");
            }
            c.checker.external.patterns.clear();
            for (std::size_t i = 0; i < patterns.size(); ++i) {
                Reader p(patterns[i], "checker.patterns[" + std::to_string(i) + "]", base_dir);
                sva::DiagnosticPattern pat;
                p.get("regex", pat.regex);
                std::string severity = "error";
                p.get("severity", severity);
                pat.severity = parse_severity(severity);
                p.count("line_group", pat.line_group);
                p.count("column_group", pat.column_group);
                p.count("message_group", pat.message_group);
                if (pat.regex.empty()) {
                    throw ConfigError("checker.patterns[" + std::to_string(i) + "].regex is required");
                }
                c.checker.external.patterns.push_back(std::move(pat));
            }
        }
    }
    if (top.has("rag")) {
        Reader r(top.at("rag"), "rag", base_dir);
        r.path("index", c.rag.index_path);
        r.count("k", c.rag.chunking.k);
        r.count("chunk_size", c.rag.chunking.size);
        r.count("overlap", c.rag.chunking.overlap);
        r.count("dimension", c.rag.dimension);
    }
    if (top.has("paths")) {
        Reader r(top.at("paths"), "paths", base_dir);
        r.path("spec", c.paths.spec);
        r.path("verilog", c.paths.verilog);
        r.path("design_summary", c.paths.design_summary);
        r.path("bank", c.paths.bank);
        r.path("output_dir", c.paths.output_dir);
        std::vector<std::string> waveforms;
        r.get("waveforms", waveforms);
        for (auto const & w : waveforms) {
            c.paths.waveforms.push_back(r.resolve(w));
        }
    }
    top.get("design_name", c.design_name);
    top.get("early_stop", c.early_stop);
    top.number("early_stop_score", c.early_stop_score);
    if (top.has("max_api_calls_per_signal")) {
        std::uint32_t budget = 0;
        top.count("max_api_calls_per_signal", budget);
        c.max_api_calls_per_signal = budget;
    }
    top.count("parallel", c.parallel);
    top.path("templates_dir", c.templates_dir);
    c.validate();
    return c;
}

RunConfig RunConfig::load(std::string const & path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file " + path);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (json::parse_error const & e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    auto base = fs::path(path).parent_path().string();
    return from_json(doc, base.empty() ? "." : base);
}

nlohmann::ordered_json RunConfig::to_json() const
{
    nlohmann::ordered_json doc;
    doc["search"] = {{"c", search.c}, {"epsilon", search.epsilon}, {"n_rollouts", search.n_rollouts},
        {"score_cap", search.score_cap}};
    nlohmann::ordered_json b;
    b["kind"] = backend.kind;
    if (backend.kind == "scripted") {
        b["script"] = backend.script_path;
    } else {
        b["endpoint"] = backend.http.endpoint;
        b["path"] = backend.http.path;
        b["model"] = backend.http.model;
        b["api_key_env"] = backend.http.api_key_env;
        b["timeout_s"] = backend.http.timeout.count();
    }
    doc["backend"] = b;
    nlohmann::ordered_json ch;
    ch["kind"] = checker.kind == CheckerKind::builtin ? "builtin" : "external";
    if (checker.kind == CheckerKind::external) {
        ch["command"] = checker.external.command_template;
        ch["timeout_s"] = checker.external.timeout.count();
    }
    doc["checker"] = ch;
    doc["rag"] = {{"index", rag.index_path}, {"k", rag.chunking.k}, {"chunk_size", rag.chunking.size},
        {"overlap", rag.chunking.overlap}, {"dimension", rag.dimension}};
    doc["paths"] = {{"spec", paths.spec}, {"verilog", paths.verilog}, {"waveforms", paths.waveforms},
        {"design_summary", paths.design_summary}, {"bank", paths.bank}, {"output_dir", paths.output_dir}};
    doc["design_name"] = design_name;
    doc["early_stop"] = early_stop;
    doc["early_stop_score"] = early_stop_score;
    doc["max_api_calls_per_signal"] = call_budget();
    doc["parallel"] = parallel;
    doc["templates_dir"] = templates_dir;
    return doc;
}

} // namespace svarefine::pipeline
