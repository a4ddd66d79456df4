#include "svarefine/bank.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "fsutil.hpp"
#include "svarefine/errors.hpp"
#include "svarefine/sva.hpp"

namespace svarefine::bank {

using agents::AgentRole;
using agents::ChatBackend;
using agents::PromptContext;
using agents::PromptLibrary;

SignalInfo const * InformationBank::find(std::string const & verilog_name) const
{
    for (auto const & s : signals) {
        if (s.verilog_name == verilog_name) {
            return &s;
        }
    }
    return nullptr;
}

namespace {

constexpr std::string_view arrow = "\xE2\x86\x92"; // U+2192
constexpr std::string_view bullet = "\xE2\x80\xA2"; // U+2022

bool is_blank(char c)
{
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
}

std::string trim(std::string_view s, std::string_view extra = "")
{
    auto strip = [&](char c) { return is_blank(c) || extra.find(c) != std::string_view::npos; };
    while (!s.empty() && strip(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && strip(s.back())) {
        s.remove_suffix(1);
    }
    return std::string(s);
}

// Lowercase, keep letters/digits/'/', single spaces.
std::string header_key(std::string_view s)
{
    std::string out;
    bool space = false;
    for (char c : s) {
        auto const u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '/') {
            if (space && !out.empty()) {
                out += ' ';
            }
            space = false;
            out += static_cast<char>(std::tolower(u));
        } else if (is_blank(c) || c == '_' || c == '-') {
            space = true;
        }
    }
    return out;
}

struct SectionSpec
{
    std::string key;
    std::vector<std::string> aliases; // in header_key form
};

struct HeaderHit
{
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string key;
};

std::string const * lookup(std::vector<SectionSpec> const & specs, std::string const & candidate)
{
    for (auto const & s : specs) {
        if (std::find(s.aliases.begin(), s.aliases.end(), candidate) != s.aliases.end()) {
            return &s.key;
        }
    }
    return nullptr;
}

std::vector<HeaderHit> find_headers(std::string const & text, std::vector<SectionSpec> const & specs)
{
    std::vector<HeaderHit> hits;
    // Bracketed headers anywhere.
    for (std::size_t i = text.find('['); i != std::string::npos; i = text.find('[', i + 1)) {
        auto const close = text.find(']', i + 1);
        if (close == std::string::npos || close - i > 64) {
            continue;
        }
        if (auto const * key = lookup(specs, header_key(std::string_view(text).substr(i + 1, close - i - 1)))) {
            hits.push_back({i, close + 1, *key});
        }
    }
    // "Header:" at the start of a line, after bullets and emphasis.
    std::size_t line = 0;
    while (line < text.size()) {
        auto line_end = text.find('\n', line);
        if (line_end == std::string::npos) {
            line_end = text.size();
        }
        std::size_t p = line;
        while (p < line_end) {
            if (is_blank(text[p]) || text[p] == '-' || text[p] == '*' || text[p] == '#') {
                ++p;
            } else if (text.compare(p, bullet.size(), bullet) == 0) {
                p += bullet.size();
            } else {
                break;
            }
        }
        auto const colon = text.find(':', p);
        if (p < line_end && text[p] != '[' && colon != std::string::npos && colon < line_end && colon - p <= 64) {
            if (auto const * key = lookup(specs, header_key(std::string_view(text).substr(p, colon - p)))) {
                hits.push_back({line, colon + 1, *key});
            }
        }
        line = line_end + 1;
    }
    std::sort(hits.begin(), hits.end(), [](auto const & a, auto const & b) { return a.begin < b.begin; });
    // Drop hits nested inside an earlier one.
    std::vector<HeaderHit> out;
    for (auto & h : hits) {
        if (out.empty() || h.begin >= out.back().end) {
            out.push_back(std::move(h));
        }
    }
    return out;
}

std::string clean_content(std::string_view s)
{
    std::string t = trim(s, ":*");
    for (bool changed = true; changed;) {
        changed = false;
        if (t.rfind(arrow, 0) == 0) {
            t = trim(std::string_view(t).substr(arrow.size()), ":*");
            changed = true;
        } else if (t.rfind("->", 0) == 0) {
            t = trim(std::string_view(t).substr(2), ":*");
            changed = true;
        }
    }
    // Trailing separators left behind by the next header's bullet.
    while (true) {
        auto const before = t.size();
        t = trim(t, ",;-*");
        if (t.size() >= bullet.size() && t.compare(t.size() - bullet.size(), bullet.size(), bullet) == 0) {
            t.resize(t.size() - bullet.size());
        }
        if (t.size() == before) {
            break;
        }
    }
    return t;
}

struct Sections
{
    std::map<std::string, std::string> values;
    std::size_t first_header = std::string::npos;

    [[nodiscard]] std::string get(std::string const & key) const
    {
        auto it = values.find(key);
        return it == values.end() ? std::string() : it->second;
    }
    [[nodiscard]] bool has(std::string const & key) const { return values.count(key) != 0; }
};

Sections parse_sections(std::string const & text, std::vector<SectionSpec> const & specs)
{
    Sections out;
    auto const hits = find_headers(text, specs);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        auto const end = i + 1 < hits.size() ? hits[i + 1].begin : text.size();
        auto content = clean_content(std::string_view(text).substr(hits[i].end, end - hits[i].end));
        auto & slot = out.values[hits[i].key];
        // First non-empty occurrence wins.
        if (slot.empty()) {
            slot = std::move(content);
        }
    }
    if (!hits.empty()) {
        out.first_header = hits.front().begin;
    }
    return out;
}

std::vector<std::string> identifier_list(std::string const & text)
{
    static std::regex const ident(R"([A-Za-z_][A-Za-z0-9_$]*)");
    std::vector<std::string> out;
    std::string piece;
    auto flush = [&] {
        std::smatch m;
        auto const t = trim(piece, "`[]*-");
        if (std::regex_search(t, m, ident)) {
            auto name = m.str();
            auto const lower = header_key(name);
            if (lower != "none" && lower != "n" && lower != "na" &&
                std::find(out.begin(), out.end(), name) == out.end()) {
                out.push_back(std::move(name));
            }
        }
        piece.clear();
    };
    for (char c : text) {
        if (c == ',' || c == ';' || c == '\n') {
            flush();
        } else {
            piece += c;
        }
    }
    flush();
    return out;
}

std::set<std::string> identifiers_in(std::string const & verilog)
{
    std::set<std::string> out;
    for (auto const & tok : sva::tokenize(verilog)) {
        if (tok.kind == sva::TokenKind::identifier) {
            auto name = tok.lexeme;
            if (!name.empty() && name.front() == '\\') {
                name.erase(0, 1);
            }
            out.insert(std::move(name));
        }
    }
    return out;
}

std::string call(ChatBackend & backend, PromptLibrary const & prompts, AgentRole role, PromptContext const & ctx)
{
    auto const messages = agents::render_prompt(prompts.get(role), ctx);
    return backend.complete(messages);
}

std::vector<SectionSpec> const & signal_sections()
{
    static std::vector<SectionSpec> const specs = {
        {"signal_name", {"signal name", "signal"}},
        {"description", {"description"}},
        {"definition", {"definition"}},
        {"functionality", {"functionality", "function"}},
        {"interconnection", {"interconnection", "interconnections", "connectivity"}},
        {"additional_info", {"additional information", "additional info"}},
        {"related_signals", {"related signals", "related signal"}},
    };
    return specs;
}

std::vector<SectionSpec> const & waveform_sections()
{
    static std::vector<SectionSpec> const specs = {
        {"name", {"waveform name", "waveform"}},
        {"signals", {"signals", "signal list"}},
        {"analysis", {"interdependence analysis"}},
        {"timing", {"timing relationship", "timing relationships", "timing"}},
        {"causal", {"causal dependencies", "causal dependency"}},
        {"states", {"state transitions", "state transition"}},
        {"protocol",
         {"protocol/handshaking mechanisms", "protocol/handshaking mechanism", "protocol mechanisms",
          "handshaking mechanisms", "protocol"}},
        {"additional", {"additional observations", "additional observation"}},
    };
    return specs;
}

} // namespace

// ---------------------------------------------------------------------------

std::vector<SignalMapping> parse_mapping(
    std::string const & reply, std::string const & verilog_decls, Warnings & warnings)
{
    // Optional bullet or enumerator, optional brackets/backticks/emphasis
    // around the name, optional bit range, then a colon.
    static std::regex const line_re(
        R"(^\s*(?:[-*+]|\xE2\x80\xA2|\d+[.)])?\s*[*`\[]*\s*([A-Za-z_][A-Za-z0-9_$]*)\s*(?:\[[^\]\n]*\])?\s*[*`\]]*\s*:\s*(.*)$)");
    auto const known = identifiers_in(verilog_decls);

    std::vector<SignalMapping> out;
    std::set<std::string> seen;
    std::istringstream lines(reply);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) {
            warnings.push_back("mapping line " + std::to_string(line_no) + " ignored: not of the form 'name: description'");
            continue;
        }
        auto name = m[1].str();
        auto description = trim(m[2].str(), "*`");
        if (!known.count(name)) {
            warnings.push_back("mapped signal '" + name + "' does not occur in the Verilog declarations; dropped");
            continue;
        }
        if (description.empty()) {
            warnings.push_back("mapped signal '" + name + "' has no description; dropped");
            continue;
        }
        if (!seen.insert(name).second) {
            warnings.push_back("mapped signal '" + name + "' listed twice; keeping the first");
            continue;
        }
        out.push_back({std::move(name), std::move(description)});
    }
    return out;
}

std::vector<SignalMapping> map_signals(ChatBackend & backend, std::string const & spec_text,
    std::string const & verilog_decls, Warnings & warnings, PromptLibrary const & prompts)
{
    if (trim(spec_text).empty() || trim(verilog_decls).empty()) {
        throw PreconditionError("map_signals needs a specification and Verilog declarations");
    }
    auto const reply = call(backend, prompts, AgentRole::signal_mapper,
        {{"specification_text", spec_text}, {"verilog_code", verilog_decls}});
    auto out = parse_mapping(reply, verilog_decls, warnings);
    if (out.empty()) {
        throw StageError("signal mapping produced no signals present in the Verilog declarations");
    }
    return out;
}

SignalInfo parse_signal_analysis(std::string const & reply, std::string const & signal_name)
{
    if (reply.find(signal_name) == std::string::npos) {
        throw StageError("analysis reply does not mention signal '" + signal_name + "'");
    }
    auto const sections = parse_sections(reply, signal_sections());
    SignalInfo info;
    info.verilog_name = signal_name;
    info.spec_name = sections.get("signal_name");
    if (info.spec_name.empty()) {
        // Leading "[name];" before the first recognised header.
        auto const head = reply.substr(0, std::min(reply.size(), sections.first_header));
        auto first_line = head.substr(0, head.find('\n'));
        first_line = first_line.substr(0, first_line.find(';'));
        info.spec_name = trim(first_line, "[]*`#:");
    }
    if (info.spec_name.empty() || info.spec_name.size() > 64 ||
        info.spec_name.find_first_of(" \t") != std::string::npos) {
        info.spec_name = signal_name;
    }
    info.description = sections.get("description");
    info.definition = sections.get("definition");
    info.functionality = sections.get("functionality");
    info.interconnection = sections.get("interconnection");
    info.additional_info = sections.get("additional_info");
    info.related_signals = identifier_list(sections.get("related_signals"));
    if (sections.values.empty()) {
        // No recognisable structure; keep the text rather than lose it.
        info.description = trim(reply);
    }
    return info;
}

SignalInfo analyze_signal(ChatBackend & backend, std::string const & spec_text, std::string const & signal_name,
    PromptLibrary const & prompts)
{
    if (signal_name.empty()) {
        throw PreconditionError("analyze_signal needs a signal name");
    }
    auto const reply = call(backend, prompts, AgentRole::spec_analyzer,
        {{"specification_text", spec_text}, {"signal_name", signal_name}});
    return parse_signal_analysis(reply, signal_name);
}

std::optional<WaveformSummary> parse_waveform_analysis(std::string const & reply, std::string const & fallback_name)
{
    auto const sections = parse_sections(reply, waveform_sections());
    WaveformSummary w;
    w.signals = identifier_list(sections.get("signals"));
    if (w.signals.empty()) {
        return std::nullopt;
    }
    w.waveform_name = sections.get("name");
    if (w.waveform_name.empty()) {
        w.waveform_name = fallback_name;
    }
    w.timing_relationship = sections.get("timing");
    w.causal_dependencies = sections.get("causal");
    w.state_transitions = sections.get("states");
    w.protocol_mechanisms = sections.get("protocol");
    w.additional_observations = sections.get("additional");
    return w;
}

std::optional<WaveformSummary> analyze_waveform(ChatBackend & backend, std::string const & spec_text,
    std::string const & waveform_text, std::string const & fallback_name, Warnings & warnings,
    PromptLibrary const & prompts)
{
    auto const reply = call(backend, prompts, AgentRole::waveform_analyzer,
        {{"specification_text", spec_text}, {"waveform_text", waveform_text}});
    auto out = parse_waveform_analysis(reply, fallback_name);
    if (!out) {
        warnings.push_back("waveform '" + fallback_name + "' skipped: analysis lists no signals");
    }
    return out;
}

std::string compose_workflow_info(std::vector<SignalMapping> const & mappings,
    std::vector<WaveformSummary> const & waveforms, std::string const & design_summary)
{
    std::ostringstream os;
    if (!trim(design_summary).empty()) {
        os << "Design summary:\n" << trim(design_summary) << "\n\n";
    }
    os << "Signal mapping:\n";
    for (auto const & m : mappings) {
        os << "- " << m.verilog_name << ": " << m.description << "\n";
    }
    for (auto const & w : waveforms) {
        os << "\nWaveform " << w.waveform_name << " (";
        for (std::size_t i = 0; i < w.signals.size(); ++i) {
            os << (i ? ", " : "") << w.signals[i];
        }
        os << ")\n";
        auto field = [&](char const * label, std::string const & value) {
            if (!value.empty()) {
                os << "- " << label << ": " << value << "\n";
            }
        };
        field("Timing relationship", w.timing_relationship);
        field("Causal dependencies", w.causal_dependencies);
        field("State transitions", w.state_transitions);
        field("Protocol/handshaking", w.protocol_mechanisms);
        field("Additional observations", w.additional_observations);
    }
    auto text = os.str();
    while (!text.empty() && text.back() == '\n') {
        text.pop_back();
    }
    return text;
}

std::string describe(SignalInfo const & s)
{
    std::ostringstream os;
    os << "Signal: " << s.verilog_name;
    if (!s.spec_name.empty() && s.spec_name != s.verilog_name) {
        os << " (specification name: " << s.spec_name << ")";
    }
    os << "\n";
    auto field = [&](char const * label, std::string const & value) {
        if (!value.empty()) {
            os << label << ": " << value << "\n";
        }
    };
    field("Description", s.description);
    field("Definition", s.definition);
    field("Functionality", s.functionality);
    field("Interconnection", s.interconnection);
    field("Additional information", s.additional_info);
    if (!s.related_signals.empty()) {
        os << "Related signals: ";
        for (std::size_t i = 0; i < s.related_signals.size(); ++i) {
            os << (i ? ", " : "") << s.related_signals[i];
        }
        os << "\n";
    }
    auto text = os.str();
    text.pop_back();
    return text;
}

// ---------------------------------------------------------------------------
// Persistence

Warnings validate(InformationBank const & bank)
{
    std::set<std::string> names;
    std::set<std::string> spec_names;
    for (std::size_t i = 0; i < bank.signals.size(); ++i) {
        auto const & s = bank.signals[i];
        if (s.verilog_name.empty()) {
            throw ValidationError("signals[" + std::to_string(i) + "].verilog_name is empty");
        }
        if (!names.insert(s.verilog_name).second) {
            throw ValidationError("duplicate verilog_name '" + s.verilog_name + "' at signals[" + std::to_string(i) + "]");
        }
        spec_names.insert(s.spec_name);
    }
    for (std::size_t i = 0; i < bank.waveforms.size(); ++i) {
        if (bank.waveforms[i].signals.empty()) {
            throw ValidationError("waveforms[" + std::to_string(i) + "].signals is empty");
        }
    }
    Warnings warnings;
    for (auto const & s : bank.signals) {
        for (auto const & r : s.related_signals) {
            if (!spec_names.count(r) && !names.count(r)) {
                warnings.push_back("signal '" + s.verilog_name + "' relates to '" + r + "', which is not in the bank");
            }
        }
    }
    return warnings;
}

nlohmann::ordered_json to_json(InformationBank const & bank)
{
    nlohmann::ordered_json doc;
    doc["design_name"] = bank.design_name;
    doc["workflow_info"] = bank.workflow_info;
    doc["signals"] = nlohmann::ordered_json::array();
    for (auto const & s : bank.signals) {
        nlohmann::ordered_json j;
        j["spec_name"] = s.spec_name;
        j["verilog_name"] = s.verilog_name;
        j["description"] = s.description;
        j["definition"] = s.definition;
        j["functionality"] = s.functionality;
        j["interconnection"] = s.interconnection;
        j["additional_info"] = s.additional_info;
        j["related_signals"] = s.related_signals;
        doc["signals"].push_back(std::move(j));
    }
    doc["waveforms"] = nlohmann::ordered_json::array();
    for (auto const & w : bank.waveforms) {
        nlohmann::ordered_json j;
        j["waveform_name"] = w.waveform_name;
        j["signals"] = w.signals;
        j["timing_relationship"] = w.timing_relationship;
        j["causal_dependencies"] = w.causal_dependencies;
        j["state_transitions"] = w.state_transitions;
        j["protocol_mechanisms"] = w.protocol_mechanisms;
        j["additional_observations"] = w.additional_observations;
        doc["waveforms"].push_back(std::move(j));
    }
    return doc;
}

namespace {

nlohmann::json const & member(nlohmann::json const & obj, char const * key, std::string const & path)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw LoadError(path, "missing");
    }
    return *it;
}

std::string string_field(nlohmann::json const & obj, char const * key, std::string const & prefix, bool required)
{
    auto const path = prefix.empty() ? std::string(key) : prefix + "." + key;
    if (!required && !obj.contains(key)) {
        return {};
    }
    auto const & v = member(obj, key, path);
    if (!v.is_string()) {
        throw LoadError(path, "must be a string");
    }
    return v.get<std::string>();
}

std::vector<std::string> string_list(nlohmann::json const & obj, char const * key, std::string const & prefix,
    bool required)
{
    auto const path = prefix + "." + key;
    if (!required && !obj.contains(key)) {
        return {};
    }
    auto const & v = member(obj, key, path);
    if (!v.is_array()) {
        throw LoadError(path, "must be an array of strings");
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) {
            throw LoadError(path + "[" + std::to_string(i) + "]", "must be a string");
        }
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

nlohmann::json const & array_field(nlohmann::json const & obj, char const * key)
{
    auto const & v = member(obj, key, key);
    if (!v.is_array()) {
        throw LoadError(key, "must be an array");
    }
    return v;
}

} // namespace

InformationBank from_json(nlohmann::json const & doc)
{
    if (!doc.is_object()) {
        throw LoadError("$", "bank must be a JSON object");
    }
    InformationBank bank;
    bank.design_name = string_field(doc, "design_name", "", true);
    bank.workflow_info = string_field(doc, "workflow_info", "", true);
    auto const & signals = array_field(doc, "signals");
    for (std::size_t i = 0; i < signals.size(); ++i) {
        auto const prefix = "signals[" + std::to_string(i) + "]";
        auto const & j = signals[i];
        if (!j.is_object()) {
            throw LoadError(prefix, "must be an object");
        }
        SignalInfo s;
        s.verilog_name = string_field(j, "verilog_name", prefix, true);
        s.spec_name = string_field(j, "spec_name", prefix, false);
        s.description = string_field(j, "description", prefix, true);
        s.definition = string_field(j, "definition", prefix, false);
        s.functionality = string_field(j, "functionality", prefix, false);
        s.interconnection = string_field(j, "interconnection", prefix, false);
        s.additional_info = string_field(j, "additional_info", prefix, false);
        s.related_signals = string_list(j, "related_signals", prefix, false);
        if (s.verilog_name.empty()) {
            throw LoadError(prefix + ".verilog_name", "must not be empty");
        }
        bank.signals.push_back(std::move(s));
    }
    auto const & waveforms = array_field(doc, "waveforms");
    for (std::size_t i = 0; i < waveforms.size(); ++i) {
        auto const prefix = "waveforms[" + std::to_string(i) + "]";
        auto const & j = waveforms[i];
        if (!j.is_object()) {
            throw LoadError(prefix, "must be an object");
        }
        WaveformSummary w;
        w.waveform_name = string_field(j, "waveform_name", prefix, true);
        w.signals = string_list(j, "signals", prefix, true);
        w.timing_relationship = string_field(j, "timing_relationship", prefix, false);
        w.causal_dependencies = string_field(j, "causal_dependencies", prefix, false);
        w.state_transitions = string_field(j, "state_transitions", prefix, false);
        w.protocol_mechanisms = string_field(j, "protocol_mechanisms", prefix, false);
        w.additional_observations = string_field(j, "additional_observations", prefix, false);
        if (w.signals.empty()) {
            throw LoadError(prefix + ".signals", "must not be empty");
        }
        bank.waveforms.push_back(std::move(w));
    }
    (void)validate(bank);
    return bank;
}

void save_bank(InformationBank const & bank, std::string const & path)
{
    (void)validate(bank);
    detail::create_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write bank file " + path);
    }
    out << to_json(bank).dump(2) << "\n";
    if (!out) {
        throw ConfigError("failed writing bank file " + path);
    }
}

InformationBank load_bank(std::string const & path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read bank file " + path);
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (nlohmann::json::parse_error const & e) {
        throw LoadError("$", e.what());
    }
    return from_json(doc);
}

} // namespace svarefine::bank
