#pragma once

// Reasoning tree for per-signal assertion search.
//
// Every node holds one candidate assertion set. The tree supports the four
// search phases as pure state transitions: UCT selection, child insertion,
// reward recording, and backpropagation of Q towards the root. Nothing here
// talks to an agent; the pipeline drives these operations.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace svarefine::tree {

using NodeId = std::size_t;

struct SearchParams
{
    double c = 1.4;
    double epsilon = 1e-6;
    std::uint32_t n_rollouts = 4;
    double score_cap = 95.0;
    double score_min = -100.0;
    double score_max = 100.0;

    /// Throws ConfigError unless score_min < score_cap <= score_max,
    /// c >= 0, epsilon > 0 and n_rollouts >= 1.
    void validate() const;
};

struct AnswerContent
{
    std::vector<std::string> assertions;
    std::string commentary;
    std::optional<std::string> syntax_log;

    friend bool operator==(AnswerContent const &, AnswerContent const &) = default;
};

struct ReasoningNode
{
    NodeId id = 0;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
    AnswerContent answer;
    double q_value = 0.0;
    // Successful expansions of this node plus reward samples recorded on it.
    std::uint32_t visit_count = 0;
    std::vector<double> reward_samples;

    [[nodiscard]] bool evaluated() const { return !reward_samples.empty(); }

    friend bool operator==(ReasoningNode const &, ReasoningNode const &) = default;
};

/// UCT_a = Q + c * sqrt((ln(N_parent) + 1) / (N + eps)).
/// Throws PreconditionError when parent_visits == 0.
[[nodiscard]] double uct_value(
    double q, std::uint64_t visits, std::uint64_t parent_visits, SearchParams const & params);

/// Same formula applied to a node. The node must have been evaluated.
[[nodiscard]] double compute_uct(
    ReasoningNode const & node, std::uint64_t parent_visit_count, SearchParams const & params);

class ReasoningTree
{
public:
    ReasoningTree(std::string signal_name, AnswerContent root_answer);

    /// Rebuilds a tree from stored nodes, checking structural integrity:
    /// ids equal positions, exactly one root at index 0, parent/child links
    /// agree, every node reachable, q values and samples within [-100, 100].
    static ReasoningTree from_nodes(
        std::string signal_name, std::vector<ReasoningNode> nodes, std::uint32_t rollouts_completed);

    [[nodiscard]] NodeId root() const { return 0; }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] std::string const & signal_name() const { return signal_name_; }
    [[nodiscard]] std::uint32_t rollouts_completed() const { return rollouts_completed_; }
    [[nodiscard]] std::vector<ReasoningNode> const & nodes() const { return nodes_; }
    [[nodiscard]] bool contains(NodeId id) const { return id < nodes_.size(); }

    /// Throws PreconditionError for unknown ids.
    [[nodiscard]] ReasoningNode const & node(NodeId id) const;

    /// Visit count used as N(Father(a)); the root stands in for its own father.
    [[nodiscard]] std::uint32_t parent_visits(NodeId id) const;

    /// Node with the greatest UCT among evaluated nodes; earliest id wins ties.
    [[nodiscard]] NodeId select_node(SearchParams const & params) const;

    /// Appends a fresh, unevaluated child (Q = 0, N = 0) and counts one
    /// expansion on the parent.
    NodeId add_child(NodeId parent, AnswerContent answer);

    /// Appends a reward sample, bumps N, and sets Q to the sample mean.
    /// Rewards outside [score_min, score_max] raise RangeError.
    void record_reward(NodeId id, double reward, SearchParams const & params);

    /// Q'(a) = (Q(a) + max_{children} Q) / 2 for every strict ancestor of
    /// `from`, leaf to root. Only evaluated children take part in the max.
    void backpropagate(NodeId from);

    void set_syntax_log(NodeId id, std::string log);
    void mark_rollout_completed() { ++rollouts_completed_; }

    /// Id of the node with the highest Q (earliest on ties), evaluated nodes only.
    [[nodiscard]] std::optional<NodeId> best_node() const;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    static ReasoningTree from_json(nlohmann::json const & doc);

    friend bool operator==(ReasoningTree const &, ReasoningTree const &) = default;

private:
    ReasoningTree() = default;

    ReasoningNode & mutable_node(NodeId id);

    std::string signal_name_;
    std::vector<ReasoningNode> nodes_;
    std::uint32_t rollouts_completed_ = 0;
};

} // namespace svarefine::tree
