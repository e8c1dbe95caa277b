#pragma once

#include "schedrule/dataset.hpp"
#include "schedrule/schedule.hpp"
#include "schedrule/simulator.hpp"

#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace schedrule {

/// Thrown by select when the whole design space has been benchmarked.
class SearchComplete : public std::runtime_error {
public:
    SearchComplete() : std::runtime_error("search tree is fully explored") {}
};

struct SearchNode {
    Prefix prefix;
    std::optional<ExecutedOp> op; // the DAG operation this node appends; empty at the root
    int parent = -1;
    std::vector<int> children;
    std::size_t n = 0;
    double t_min = std::numeric_limits<double>::infinity();
    double t_max = -std::numeric_limits<double>::infinity();
    bool fully_explored = false;
    bool expanded = false;

    bool terminal() const { return prefix.complete(); }
};

class SearchTree {
public:
    explicit SearchTree(const ProgramDag& dag);

    SearchNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
    const SearchNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    int root() const { return 0; }
    std::size_t size() const { return nodes_.size(); }

    /// Creates the node's children from the DAG if not done yet.
    void materialize(int id, const ProgramDag& dag);

    std::size_t fully_explored_count() const;

private:
    std::vector<SearchNode> nodes_;
};

/// c * sqrt(ln N / n) with c = sqrt(2); -inf for a fully explored child.
double explore_value(std::size_t parent_n, std::size_t child_n, bool child_fully_explored);

/// Fraction of the parent's observed time range covered by the child.
double exploit_value(const SearchNode& child, const SearchNode& parent);

/// Root-to-stop path of node ids. Throws SearchComplete when the root is fully explored.
std::vector<int> select(const SearchTree& tree);

/// Materializes children of `id` and returns a uniformly chosen zero-rollout child.
int expand(SearchTree& tree, int id, const ProgramDag& dag, std::mt19937_64& rng);

struct RolloutResult {
    Schedule schedule;
    Measurement measurement;
    std::vector<int> path; // from the start node down to the terminal node
};

/// Completes the prefix at `id` by uniform random choices and benchmarks it.
/// The measurement is appended to `dataset`; rollout statistics are left to
/// backpropagate.
RolloutResult rollout(SearchTree& tree, int id, const ProgramDag& dag, Executor& executor,
                      const MeasurementProtocol& protocol, std::mt19937_64& rng, Dataset& dataset);

/// Updates counts and time ranges along `path`, then fully-explored flags bottom-up.
void backpropagate(SearchTree& tree, const std::vector<int>& path, double time);

struct SearchResult {
    Dataset dataset;
    SearchTree tree;
    std::size_t iterations_run = 0;
};

/// Selection, expansion, rollout and backpropagation, `iterations` times or
/// until the root is fully explored. A failing rollout is retried once.
SearchResult run_search(const ProgramDag& dag, Executor& executor, std::size_t iterations, std::uint64_t seed,
                        const MeasurementProtocol& protocol = {});

} // namespace schedrule
