#include "svarefine/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svarefine/errors.hpp"

namespace svarefine::tree {

namespace {

constexpr double kQMin = -100.0;
constexpr double kQMax = 100.0;

bool in_q_range(double v)
{
    return v >= kQMin && v <= kQMax;
}

} // namespace

void SearchParams::validate() const
{
    if (!(score_min < score_cap && score_cap <= score_max)) {
        throw ConfigError("search parameters require score_min < score_cap <= score_max");
    }
    if (score_min < kQMin || score_max > kQMax) {
        throw ConfigError("score bounds must lie within [-100, 100]");
    }
    if (!(c >= 0.0) || !std::isfinite(c)) {
        throw ConfigError("exploration constant c must be a finite non-negative number");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("epsilon must be positive");
    }
    if (n_rollouts == 0) {
        throw ConfigError("n_rollouts must be at least 1");
    }
}

double uct_value(double q, std::uint64_t visits, std::uint64_t parent_visits, SearchParams const & params)
{
    if (parent_visits == 0) {
        throw PreconditionError("UCT undefined: parent visit count is 0 (ln(0))");
    }
    double const numerator = std::log(static_cast<double>(parent_visits)) + 1.0;
    double const denominator = static_cast<double>(visits) + params.epsilon;
    return q + params.c * std::sqrt(numerator / denominator);
}

double compute_uct(ReasoningNode const & node, std::uint64_t parent_visit_count, SearchParams const & params)
{
    if (!node.evaluated()) {
        throw PreconditionError("UCT requested for unevaluated node " + std::to_string(node.id));
    }
    return uct_value(node.q_value, node.visit_count, parent_visit_count, params);
}

ReasoningTree::ReasoningTree(std::string signal_name, AnswerContent root_answer)
: signal_name_(std::move(signal_name))
{
    ReasoningNode root;
    root.id = 0;
    root.answer = std::move(root_answer);
    nodes_.push_back(std::move(root));
}

ReasoningTree ReasoningTree::from_nodes(
    std::string signal_name, std::vector<ReasoningNode> nodes, std::uint32_t rollouts_completed)
{
    if (nodes.empty()) {
        throw PreconditionError("tree has no nodes");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto const & n = nodes[i];
        auto const where = "node " + std::to_string(i);
        if (n.id != i) {
            throw PreconditionError(where + ": id " + std::to_string(n.id) + " does not match position");
        }
        if (i == 0 && n.parent) {
            throw PreconditionError("root must not have a parent");
        }
        if (i != 0) {
            if (!n.parent) {
                throw PreconditionError(where + ": second root");
            }
            if (*n.parent >= i) {
                // Parents always precede children, which also rules out cycles.
                throw PreconditionError(where + ": parent must be created before the child");
            }
            auto const & siblings = nodes[*n.parent].children;
            if (std::count(siblings.begin(), siblings.end(), i) != 1) {
                throw PreconditionError(where + ": not listed exactly once by its parent");
            }
        }
        for (NodeId child : n.children) {
            if (child >= nodes.size() || nodes[child].parent != i) {
                throw PreconditionError(where + ": child " + std::to_string(child) + " does not point back");
            }
        }
        if (!in_q_range(n.q_value)) {
            throw PreconditionError(where + ": q_value outside [-100, 100]");
        }
        for (double r : n.reward_samples) {
            if (!in_q_range(r)) {
                throw PreconditionError(where + ": reward sample outside [-100, 100]");
            }
        }
    }
    ReasoningTree tree;
    tree.signal_name_ = std::move(signal_name);
    tree.nodes_ = std::move(nodes);
    tree.rollouts_completed_ = rollouts_completed;
    return tree;
}

ReasoningNode const & ReasoningTree::node(NodeId id) const
{
    if (!contains(id)) {
        throw PreconditionError("unknown node id " + std::to_string(id));
    }
    return nodes_[id];
}

ReasoningNode & ReasoningTree::mutable_node(NodeId id)
{
    if (!contains(id)) {
        throw PreconditionError("unknown node id " + std::to_string(id));
    }
    return nodes_[id];
}

std::uint32_t ReasoningTree::parent_visits(NodeId id) const
{
    auto const & n = node(id);
    return n.parent ? nodes_[*n.parent].visit_count : n.visit_count;
}

NodeId ReasoningTree::select_node(SearchParams const & params) const
{
    std::optional<NodeId> best;
    double best_score = 0.0;
    for (auto const & n : nodes_) {
        if (!n.evaluated()) {
            continue;
        }
        double const score = compute_uct(n, parent_visits(n.id), params);
        if (!best || score > best_score) {
            best = n.id;
            best_score = score;
        }
    }
    if (!best) {
        throw PreconditionError("no evaluated node to select");
    }
    return *best;
}

NodeId ReasoningTree::add_child(NodeId parent, AnswerContent answer)
{
    auto & p = mutable_node(parent);
    NodeId const id = nodes_.size();
    p.children.push_back(id);
    ++p.visit_count;

    ReasoningNode child;
    child.id = id;
    child.parent = parent;
    child.answer = std::move(answer);
    nodes_.push_back(std::move(child));
    return id;
}

void ReasoningTree::record_reward(NodeId id, double reward, SearchParams const & params)
{
    if (!(reward >= params.score_min && reward <= params.score_max)) {
        throw RangeError(
            "reward " + std::to_string(reward) + " outside [" + std::to_string(params.score_min) + ", "
            + std::to_string(params.score_max) + "]");
    }
    auto & n = mutable_node(id);
    n.reward_samples.push_back(reward);
    ++n.visit_count;
    double const sum = std::accumulate(n.reward_samples.begin(), n.reward_samples.end(), 0.0);
    n.q_value = std::clamp(sum / static_cast<double>(n.reward_samples.size()), kQMin, kQMax);
}

void ReasoningTree::backpropagate(NodeId from)
{
    std::optional<NodeId> current = node(from).parent;
    while (current) {
        auto & a = nodes_[*current];
        std::optional<double> best_child;
        for (NodeId child : a.children) {
            auto const & c = nodes_[child];
            if (c.evaluated() && (!best_child || c.q_value > *best_child)) {
                best_child = c.q_value;
            }
        }
        if (best_child) {
            a.q_value = 0.5 * (a.q_value + *best_child);
        }
        current = a.parent;
    }
}

void ReasoningTree::set_syntax_log(NodeId id, std::string log)
{
    mutable_node(id).answer.syntax_log = std::move(log);
}

std::optional<NodeId> ReasoningTree::best_node() const
{
    std::optional<NodeId> best;
    for (auto const & n : nodes_) {
        if (n.evaluated() && (!best || n.q_value > nodes_[*best].q_value)) {
            best = n.id;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::ordered_json ReasoningTree::to_json() const
{
    nlohmann::ordered_json doc;
    doc["format"] = "svarefine-tree";
    doc["version"] = 1;
    doc["signal_name"] = signal_name_;
    doc["root"] = root();
    doc["rollouts_completed"] = rollouts_completed_;
    auto & out = doc["nodes"] = nlohmann::ordered_json::array();
    for (auto const & n : nodes_) {
        nlohmann::ordered_json j;
        j["id"] = n.id;
        j["parent"] = n.parent ? nlohmann::ordered_json(*n.parent) : nlohmann::ordered_json(nullptr);
        j["children"] = n.children;
        j["answer"] = {
            {"assertions", n.answer.assertions},
            {"commentary", n.answer.commentary},
            {"syntax_log",
             n.answer.syntax_log ? nlohmann::ordered_json(*n.answer.syntax_log) : nlohmann::ordered_json(nullptr)},
        };
        j["q_value"] = n.q_value;
        j["visit_count"] = n.visit_count;
        j["reward_samples"] = n.reward_samples;
        out.push_back(std::move(j));
    }
    return doc;
}

namespace {

template <typename T>
T field(nlohmann::json const & obj, char const * key, std::string const & path)
{
    auto const it = obj.find(key);
    if (it == obj.end()) {
        throw LoadError(path + "." + key, "missing field");
    }
    try {
        return it->get<T>();
    } catch (nlohmann::json::exception const & e) {
        throw LoadError(path + "." + key, e.what());
    }
}

} // namespace

ReasoningTree ReasoningTree::from_json(nlohmann::json const & doc)
{
    if (!doc.is_object()) {
        throw LoadError("$", "tree document must be an object");
    }
    auto signal = field<std::string>(doc, "signal_name", "$");
    auto rollouts = field<std::uint32_t>(doc, "rollouts_completed", "$");
    auto const root = field<std::size_t>(doc, "root", "$");
    if (root != 0) {
        throw LoadError("$.root", "root must be node 0");
    }
    auto const nodes_it = doc.find("nodes");
    if (nodes_it == doc.end() || !nodes_it->is_array()) {
        throw LoadError("$.nodes", "missing node array");
    }
    std::vector<ReasoningNode> nodes;
    for (std::size_t i = 0; i < nodes_it->size(); ++i) {
        auto const & j = (*nodes_it)[i];
        auto const path = "$.nodes[" + std::to_string(i) + "]";
        if (!j.is_object()) {
            throw LoadError(path, "node must be an object");
        }
        ReasoningNode n;
        n.id = field<NodeId>(j, "id", path);
        if (auto p = j.find("parent"); p != j.end() && !p->is_null()) {
            n.parent = field<NodeId>(j, "parent", path);
        }
        n.children = field<std::vector<NodeId>>(j, "children", path);
        auto const answer = j.find("answer");
        if (answer == j.end() || !answer->is_object()) {
            throw LoadError(path + ".answer", "missing answer object");
        }
        n.answer.assertions = field<std::vector<std::string>>(*answer, "assertions", path + ".answer");
        n.answer.commentary = field<std::string>(*answer, "commentary", path + ".answer");
        if (auto s = answer->find("syntax_log"); s != answer->end() && !s->is_null()) {
            n.answer.syntax_log = field<std::string>(*answer, "syntax_log", path + ".answer");
        }
        n.q_value = field<double>(j, "q_value", path);
        n.visit_count = field<std::uint32_t>(j, "visit_count", path);
        n.reward_samples = field<std::vector<double>>(j, "reward_samples", path);
        nodes.push_back(std::move(n));
    }
    try {
        return from_nodes(std::move(signal), std::move(nodes), rollouts);
    } catch (PreconditionError const & e) {
        throw LoadError("$.nodes", e.what());
    }
}

} // namespace svarefine::tree
