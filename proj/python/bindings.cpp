#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "svarefine/agents.hpp"
#include "svarefine/bank.hpp"
#include "svarefine/errors.hpp"
#include "svarefine/pipeline.hpp"
#include "svarefine/rag.hpp"
#include "svarefine/sva.hpp"
#include "svarefine/tree.hpp"

namespace py = pybind11;
using namespace svarefine;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
nlohmann::json parse_json(std::string const & text)
{
    try {
        return nlohmann::json::parse(text);
    } catch (nlohmann::json::parse_error const & e) {
        throw LoadError("<string>", e.what());
    }
}

tree::SearchParams search_params(double c, double epsilon, double score_cap)
{
    tree::SearchParams p;
    p.c = c;
    p.epsilon = epsilon;
    p.score_cap = score_cap;
    p.validate();
    return p;
}

py::dict diagnostic_dict(sva::Diagnostic const & d)
{
    py::dict out;
    out["severity"] = d.severity == sva::Severity::error ? "error" : "warning";
    out["line"] = d.line;
    out["column"] = d.column;
    out["code"] = d.code;
    out["message"] = d.message;
    return out;
}

py::list hits_list(std::vector<rag::QueryHit> const & hits)
{
    py::list out;
    for (auto const & h : hits) {
        out.append(py::make_tuple(h.chunk->doc_id, h.chunk->chunk_index, h.chunk->text, h.similarity));
    }
    return out;
}

std::string summary_dump(pipeline::DesignResult const & r)
{
    return pipeline::summary_json(r).dump();
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Native core: tree search, SVA checking, retrieval and the pipeline driver";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<BackendError>(m, "BackendError", base.ptr());
    py::register_exception<ScoreParseError>(m, "ScoreParseError", base.ptr());
    py::register_exception<StageError>(m, "StageError", base.ptr());
    py::register_exception<LoadError>(m, "LoadError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());

    // tree ------------------------------------------------------------------
    m.def(
        "uct_value",
        [](double q, std::uint64_t visits, std::uint64_t parent_visits, double c, double epsilon) {
            tree::SearchParams p;
            p.c = c;
            p.epsilon = epsilon;
            return tree::uct_value(q, visits, parent_visits, p);
        },
        py::arg("q"), py::arg("visits"), py::arg("parent_visits"), py::arg("c") = 1.4, py::arg("epsilon") = 1e-6);

    py::class_<tree::SearchParams>(m, "SearchParams")
        .def(py::init(&search_params), py::arg("c") = 1.4, py::arg("epsilon") = 1e-6, py::arg("score_cap") = 95.0)
        .def_readonly("c", &tree::SearchParams::c)
        .def_readonly("epsilon", &tree::SearchParams::epsilon)
        .def_readonly("score_cap", &tree::SearchParams::score_cap);

    py::class_<tree::ReasoningTree>(m, "ReasoningTree")
        .def(py::init([](std::string signal, std::vector<std::string> assertions) {
            return tree::ReasoningTree(std::move(signal), tree::AnswerContent{std::move(assertions), "", std::nullopt});
        }),
            py::arg("signal"), py::arg("root_assertions"))
        .def("__len__", &tree::ReasoningTree::size)
        .def_property_readonly("signal", &tree::ReasoningTree::signal_name)
        .def_property_readonly("rollouts_completed", &tree::ReasoningTree::rollouts_completed)
        .def(
            "add_child",
            [](tree::ReasoningTree & t, tree::NodeId parent, std::vector<std::string> assertions) {
                return t.add_child(parent, tree::AnswerContent{std::move(assertions), "", std::nullopt});
            },
            py::arg("parent"), py::arg("assertions"))
        .def("record_reward", &tree::ReasoningTree::record_reward, py::arg("node"), py::arg("reward"),
            py::arg("params") = tree::SearchParams{})
        .def("backpropagate", &tree::ReasoningTree::backpropagate, py::arg("node"))
        .def("select_node", &tree::ReasoningTree::select_node, py::arg("params") = tree::SearchParams{})
        .def("best_node", &tree::ReasoningTree::best_node)
        .def("q_value", [](tree::ReasoningTree const & t, tree::NodeId id) { return t.node(id).q_value; })
        .def("visit_count", [](tree::ReasoningTree const & t, tree::NodeId id) { return t.node(id).visit_count; })
        .def("assertions", [](tree::ReasoningTree const & t, tree::NodeId id) { return t.node(id).answer.assertions; })
        .def("to_json", [](tree::ReasoningTree const & t) { return t.to_json().dump(); })
        .def_static("from_json", [](std::string const & text) { return tree::ReasoningTree::from_json(parse_json(text)); });

    // scoring ---------------------------------------------------------------
    m.def("parse_score", &agents::parse_score, py::arg("text"));
    m.def("suppress", &agents::suppress, py::arg("score"), py::arg("cap") = 95.0);
    m.def(
        "extract_assertions", [](std::string const & text) { return agents::extract_assertions(text); },
        py::arg("text"));

    // sva -------------------------------------------------------------------
    m.def(
        "tokenize",
        [](std::string const & source) {
            py::list out;
            for (auto const & t : sva::tokenize(source)) {
                if (t.kind != sva::TokenKind::end_of_input) {
                    out.append(py::make_tuple(sva::to_string(t.kind), t.lexeme, t.line, t.column));
                }
            }
            return out;
        },
        py::arg("source"));
    m.def(
        "check",
        [](std::string const & source) {
            py::list out;
            for (auto const & d : sva::BuiltinChecker{}.check(source)) {
                out.append(diagnostic_dict(d));
            }
            return out;
        },
        py::arg("source"));
    m.def(
        "split_units", [](std::string const & source) { return sva::split_units(source); }, py::arg("source"));
    m.def(
        "normalize", [](std::string const & text) { return sva::normalize(text); }, py::arg("text"));

    // rag -------------------------------------------------------------------
    m.def(
        "chunk", [](std::string const & text, std::size_t size, std::size_t overlap) {
            return rag::chunk(text, size, overlap);
        },
        py::arg("text"), py::arg("size") = 1200, py::arg("overlap") = 200);
    m.def(
        "reconstruct",
        [](std::vector<std::string> const & chunks, std::size_t overlap) { return rag::reconstruct(chunks, overlap); },
        py::arg("chunks"), py::arg("overlap"));

    py::class_<rag::FlatIndex>(m, "FlatIndex")
        .def(py::init<>())
        .def("__len__", &rag::FlatIndex::size)
        .def_property_readonly("dimension", &rag::FlatIndex::dimension)
        .def(
            "add",
            [](rag::FlatIndex & idx, std::string const & doc_id, std::vector<std::string> const & texts,
                std::size_t dimension) { idx.add(doc_id, texts, rag::HashingEmbedder(dimension)); },
            py::arg("doc_id"), py::arg("texts"), py::arg("dimension") = 512)
        .def(
            "query",
            [](rag::FlatIndex const & idx, std::string const & text, std::size_t k) {
                auto const dim = idx.dimension() == 0 ? 512 : idx.dimension();
                return hits_list(idx.query(text, k, rag::HashingEmbedder(dim)));
            },
            py::arg("text"), py::arg("k") = 4)
        .def("save", &rag::FlatIndex::save, py::arg("path"))
        .def_static("load", &rag::FlatIndex::load, py::arg("path"));

    // bank ------------------------------------------------------------------
    m.def(
        "load_bank", [](std::string const & path) { return bank::to_json(bank::load_bank(path)).dump(); },
        py::arg("path"));
    m.def(
        "validate_bank", [](std::string const & text) { return bank::validate(bank::from_json(parse_json(text))); },
        py::arg("bank_json"));

    // pipeline --------------------------------------------------------------
    m.def("call_budget", &pipeline::default_call_budget, py::arg("n_rollouts") = 4);
    m.def(
        "load_config", [](std::string const & path) { return pipeline::RunConfig::load(path).to_json().dump(); },
        py::arg("path"));
    m.def(
        "run",
        [](std::string const & config_path, std::optional<std::string> const & signal,
            std::optional<std::string> const & output_dir) {
            auto config = pipeline::RunConfig::load(config_path);
            if (output_dir) {
                config.paths.output_dir = *output_dir;
            }
            py::gil_scoped_release release;
            return summary_dump(pipeline::run_all(config, signal));
        },
        py::arg("config_path"), py::arg("signal") = py::none(), py::arg("output_dir") = py::none());
}
