#include "schedrule/mcts.hpp"

#include <algorithm>
#include <cmath>

namespace schedrule {

namespace {

int uniform_pick(const std::vector<int>& ids, std::mt19937_64& rng)
{
    std::uniform_int_distribution<std::size_t> dist(0, ids.size() - 1);
    return ids[dist(rng)];
}

} // namespace

SearchTree::SearchTree(const ProgramDag& dag)
{
    SearchNode root{Prefix(dag), std::nullopt, -1, {}};
    nodes_.push_back(std::move(root));
}

void SearchTree::materialize(int id, const ProgramDag& dag)
{
    if (node(id).expanded) {
        return;
    }
    auto children = expand_children(node(id).prefix, dag);
    std::vector<int> ids;
    for (auto& child : children) {
        ExecutedOp last = child.ops().back();
        SearchNode fresh{std::move(child), std::move(last), id, {}};
        ids.push_back(static_cast<int>(nodes_.size()));
        nodes_.push_back(std::move(fresh));
    }
    SearchNode& n = node(id);
    n.children = std::move(ids);
    n.expanded = true;
}

std::size_t SearchTree::fully_explored_count() const
{
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const SearchNode& n) { return n.fully_explored; }));
}

double explore_value(std::size_t parent_n, std::size_t child_n, bool child_fully_explored)
{
    if (child_fully_explored) {
        return -std::numeric_limits<double>::infinity();
    }
    if (child_n == 0 || parent_n == 0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::sqrt(2.0) * std::sqrt(std::log(static_cast<double>(parent_n)) / static_cast<double>(child_n));
}

double exploit_value(const SearchNode& child, const SearchNode& parent)
{
    if (child.n >= 2 && parent.n >= 2) {
        double denom = parent.t_max - parent.t_min;
        if (denom > 0.0) {
            return (child.t_max - child.t_min) / denom;
        }
    }
    return 1.0;
}

std::vector<int> select(const SearchTree& tree)
{
    if (tree.node(tree.root()).fully_explored) {
        throw SearchComplete();
    }
    std::vector<int> path{tree.root()};
    int cur = tree.root();
    for (;;) {
        const SearchNode& node = tree.node(cur);
        if (!node.expanded || node.children.empty()) {
            break;
        }
        bool unvisited = std::any_of(node.children.begin(), node.children.end(),
                                     [&](int c) { return tree.node(c).n == 0; });
        if (unvisited) {
            break;
        }
        int best = -1;
        double best_value = -std::numeric_limits<double>::infinity();
        for (int c : node.children) {
            const SearchNode& child = tree.node(c);
            double value = explore_value(node.n, child.n, child.fully_explored) + exploit_value(child, node);
            if (value > best_value) {
                best_value = value;
                best = c;
            }
        }
        if (best < 0) {
            break;
        }
        path.push_back(best);
        cur = best;
    }
    return path;
}

int expand(SearchTree& tree, int id, const ProgramDag& dag, std::mt19937_64& rng)
{
    tree.materialize(id, dag);
    std::vector<int> fresh;
    for (int c : tree.node(id).children) {
        if (tree.node(c).n == 0) {
            fresh.push_back(c);
        }
    }
    if (fresh.empty()) {
        return id;
    }
    return uniform_pick(fresh, rng);
}

RolloutResult rollout(SearchTree& tree, int id, const ProgramDag& dag, Executor& executor,
                      const MeasurementProtocol& protocol, std::mt19937_64& rng, Dataset& dataset)
{
    std::vector<int> path{id};
    int cur = id;
    while (!tree.node(cur).terminal()) {
        tree.materialize(cur, dag);
        cur = uniform_pick(tree.node(cur).children, rng);
        path.push_back(cur);
    }
    Schedule schedule = tree.node(cur).prefix.to_schedule();
    Measurement m = measure(schedule, executor, protocol);
    dataset.add(schedule, m);
    return {std::move(schedule), std::move(m), std::move(path)};
}

void backpropagate(SearchTree& tree, const std::vector<int>& path, double time)
{
    for (int id : path) {
        SearchNode& n = tree.node(id);
        ++n.n;
        n.t_min = std::min(n.t_min, time);
        n.t_max = std::max(n.t_max, time);
    }
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        SearchNode& n = tree.node(*it);
        if (n.terminal()) {
            n.fully_explored = true;
            continue;
        }
        if (!n.expanded) {
            break;
        }
        bool all = std::all_of(n.children.begin(), n.children.end(),
                               [&](int c) { return tree.node(c).fully_explored; });
        if (!all) {
            break;
        }
        n.fully_explored = true;
    }
}

SearchResult run_search(const ProgramDag& dag, Executor& executor, std::size_t iterations, std::uint64_t seed,
                        const MeasurementProtocol& protocol)
{
    require_valid(dag);
    SearchResult result{Dataset{}, SearchTree(dag), 0};
    SearchTree& tree = result.tree;
    std::mt19937_64 rng(seed);

    while (result.iterations_run < iterations && !tree.node(tree.root()).fully_explored) {
        std::vector<int> path = select(tree);
        int child = expand(tree, path.back(), dag, rng);
        if (child != path.back()) {
            path.push_back(child);
        }
        RolloutResult r;
        try {
            r = rollout(tree, child, dag, executor, protocol, rng, result.dataset);
        } catch (const ExecutorError&) {
            r = rollout(tree, child, dag, executor, protocol, rng, result.dataset);
        }
        path.insert(path.end(), r.path.begin() + 1, r.path.end());
        backpropagate(tree, path, r.measurement.time);
        ++result.iterations_run;
    }
    return result;
}

} // namespace schedrule
