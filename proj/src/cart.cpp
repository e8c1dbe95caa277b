#include "schedrule/cart.hpp"

#include <algorithm>
#include <limits>

namespace schedrule {

namespace {

constexpr double kGainTolerance = 1e-12;

struct Growth {
    const FeatureMatrix& matrix;
    std::vector<int> class_ids;
    std::vector<std::size_t> label_index; // per row, into class_ids
    std::vector<double> row_weight;
    std::map<int, double> weights;
    std::span<const int> labels;
};

void fill_distribution(const Growth& g, TreeNode& node, std::span<const std::size_t> samples)
{
    node.class_mass.assign(g.class_ids.size(), 0.0);
    node.class_counts.assign(g.class_ids.size(), 0);
    for (std::size_t r : samples) {
        node.class_mass[g.label_index[r]] += g.row_weight[r];
        ++node.class_counts[g.label_index[r]];
    }
    node.samples = samples.size();
    // Masses equal up to rounding count as a tie; the lower class id wins.
    std::size_t best = 0;
    for (std::size_t k = 1; k < node.class_mass.size(); ++k) {
        if (node.class_mass[k] > node.class_mass[best] * (1.0 + 1e-9)) {
            best = k;
        }
    }
    node.majority = g.class_ids[best];
}

bool is_pure(const TreeNode& node)
{
    return std::count_if(node.class_counts.begin(), node.class_counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
}

} // namespace

std::size_t TrainedTree::leaf_for(const FeatureRow& row) const
{
    if (row.size() != columns.size()) {
        throw TreeError("feature vector has width " + std::to_string(row.size()) + ", tree expects " +
                        std::to_string(columns.size()));
    }
    std::size_t id = 0;
    while (!nodes[id].is_leaf()) {
        const auto& n = nodes[id];
        id = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] ? n.right : n.left);
    }
    return id;
}

int TrainedTree::predict(const FeatureRow& row) const
{
    return nodes[leaf_for(row)].majority;
}

std::map<int, double> balanced_weights(std::span<const int> labels)
{
    if (labels.empty()) {
        throw TreeError("class weights need at least one label");
    }
    std::map<int, std::size_t> counts;
    for (int c : labels) {
        ++counts[c];
    }
    const double m = static_cast<double>(labels.size());
    const double k = static_cast<double>(counts.size());
    std::map<int, double> out;
    for (auto [c, n] : counts) {
        out[c] = m / (k * static_cast<double>(n));
    }
    return out;
}

double gini(std::span<const double> masses)
{
    double total = 0.0;
    for (double m : masses) {
        if (m < 0.0) {
            throw TreeError("negative class mass");
        }
        total += m;
    }
    if (total <= 0.0) {
        throw TreeError("gini of an empty node");
    }
    double sum_sq = 0.0;
    for (double m : masses) {
        double p = m / total;
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

std::optional<SplitChoice> best_split(const std::vector<FeatureRow>& rows, std::span<const std::size_t> samples,
                                      std::span<const std::size_t> features, std::span<const int> labels,
                                      const std::map<int, double>& weights)
{
    std::map<int, std::size_t> index;
    for (std::size_t r : samples) {
        index.emplace(labels[r], 0);
    }
    if (index.size() <= 1) {
        return std::nullopt;
    }
    std::size_t k = 0;
    for (auto& [c, i] : index) {
        i = k++;
    }

    std::vector<double> node(k, 0.0);
    for (std::size_t r : samples) {
        node[index[labels[r]]] += weights.at(labels[r]);
    }
    double total = 0.0;
    for (double m : node) {
        total += m;
    }
    const double g_node = gini(node);

    std::optional<SplitChoice> best;
    std::vector<double> right(k);
    for (std::size_t f : features) {
        std::fill(right.begin(), right.end(), 0.0);
        std::size_t n_right = 0;
        for (std::size_t r : samples) {
            if (rows[r][f]) {
                right[index[labels[r]]] += weights.at(labels[r]);
                ++n_right;
            }
        }
        if (n_right == 0 || n_right == samples.size()) {
            continue;
        }
        std::vector<double> left(k);
        double m_right = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            left[c] = node[c] - right[c];
            m_right += right[c];
        }
        double m_left = total - m_right;
        double gain = g_node - (m_left / total) * gini(left) - (m_right / total) * gini(right);
        if (gain < -kGainTolerance) {
            continue;
        }
        if (!best || gain > best->gain + kGainTolerance) {
            best = SplitChoice{f, std::max(gain, 0.0)};
        }
    }
    return best;
}

TrainedTree grow_tree(const FeatureMatrix& matrix, std::span<const int> labels, int max_leaf_nodes, int max_depth)
{
    if (matrix.rows.empty()) {
        throw TreeError("cannot train on an empty feature matrix");
    }
    if (labels.size() != matrix.rows.size()) {
        throw TreeError("label count does not match matrix rows");
    }
    if (max_leaf_nodes < 2) {
        throw TreeError("max_leaf_nodes must be at least 2");
    }
    if (max_depth < 1) {
        throw TreeError("max_depth must be at least 1");
    }
    for (const auto& row : matrix.rows) {
        if (row.size() != matrix.width()) {
            throw TreeError("ragged feature matrix");
        }
    }

    Growth g{matrix, {}, {}, {}, balanced_weights(labels), labels};
    for (const auto& [c, w] : g.weights) {
        g.class_ids.push_back(c);
    }
    for (int c : labels) {
        auto pos = std::lower_bound(g.class_ids.begin(), g.class_ids.end(), c);
        g.label_index.push_back(static_cast<std::size_t>(pos - g.class_ids.begin()));
        g.row_weight.push_back(g.weights.at(c));
    }
    double total_mass = 0.0;
    for (double w : g.row_weight) {
        total_mass += w;
    }

    TrainedTree tree;
    tree.columns = matrix.columns;
    tree.class_ids = g.class_ids;
    tree.max_leaf_nodes = max_leaf_nodes;
    tree.max_depth = max_depth;

    std::vector<std::vector<std::size_t>> node_samples;
    std::vector<std::vector<std::size_t>> node_features;

    struct Candidate {
        std::size_t node;
        SplitChoice split;
        double priority;
    };
    std::vector<Candidate> frontier;

    auto add_node = [&](std::vector<std::size_t> samples, std::vector<std::size_t> features, int depth) {
        TreeNode node;
        node.depth = depth;
        fill_distribution(g, node, samples);
        std::size_t id = tree.nodes.size();
        tree.nodes.push_back(std::move(node));
        if (depth < max_depth && !is_pure(tree.nodes[id])) {
            if (auto split = best_split(matrix.rows, samples, features, labels, g.weights)) {
                double mass = 0.0;
                for (double m : tree.nodes[id].class_mass) {
                    mass += m;
                }
                frontier.push_back({id, *split, mass / total_mass * split->gain});
            }
        }
        node_samples.push_back(std::move(samples));
        node_features.push_back(std::move(features));
    };

    std::vector<std::size_t> all_rows(matrix.rows.size());
    for (std::size_t i = 0; i < all_rows.size(); ++i) {
        all_rows[i] = i;
    }
    std::vector<std::size_t> all_features(matrix.width());
    for (std::size_t j = 0; j < all_features.size(); ++j) {
        all_features[j] = j;
    }
    add_node(std::move(all_rows), std::move(all_features), 0);
    std::size_t leaves = 1;

    while (leaves < static_cast<std::size_t>(max_leaf_nodes) && !frontier.empty()) {
        // Largest priority first; earlier candidates win ties.
        auto pick = frontier.begin();
        for (auto it = frontier.begin(); it != frontier.end(); ++it) {
            if (it->priority > pick->priority + kGainTolerance) {
                pick = it;
            }
        }
        Candidate c = *pick;
        frontier.erase(pick);

        const std::size_t f = c.split.feature;
        std::vector<std::size_t> lo, hi;
        for (std::size_t r : node_samples[c.node]) {
            (matrix.rows[r][f] ? hi : lo).push_back(r);
        }
        std::vector<std::size_t> rest;
        for (std::size_t j : node_features[c.node]) {
            if (j != f) {
                rest.push_back(j);
            }
        }
        const int depth = tree.nodes[c.node].depth + 1;
        tree.nodes[c.node].feature = static_cast<int>(f);
        tree.nodes[c.node].left = static_cast<int>(tree.nodes.size());
        add_node(std::move(lo), rest, depth);
        tree.nodes[c.node].right = static_cast<int>(tree.nodes.size());
        add_node(std::move(hi), std::move(rest), depth);
        ++leaves;
    }

    // Integer miss counts per class keep the error independent of summation order.
    std::vector<std::size_t> missed(g.class_ids.size(), 0);
    std::vector<std::size_t> per_class(g.class_ids.size(), 0);
    for (std::size_t k : g.label_index) {
        ++per_class[k];
    }
    for (const auto& node : tree.nodes) {
        if (!node.is_leaf()) {
            continue;
        }
        ++tree.leaf_count;
        tree.depth = std::max(tree.depth, node.depth);
        for (std::size_t c = 0; c < node.class_counts.size(); ++c) {
            if (g.class_ids[c] != node.majority) {
                missed[c] += node.class_counts[c];
            }
        }
    }
    double wrong = 0.0;
    total_mass = 0.0;
    for (std::size_t c = 0; c < missed.size(); ++c) {
        wrong += g.weights.at(g.class_ids[c]) * static_cast<double>(missed[c]);
        total_mass += g.weights.at(g.class_ids[c]) * static_cast<double>(per_class[c]);
    }
    tree.training_error = wrong / total_mass;
    return tree;
}

HyperparamResult hyperparam_search(const FeatureMatrix& matrix, std::span<const int> labels)
{
    HyperparamResult out;
    auto train = [&](int mln, double err) {
        TrainedTree t = grow_tree(matrix, labels, mln, mln - 1);
        out.steps.push_back({mln, t.training_error, t.depth, t.leaf_count, t.training_error < err});
        return t;
    };

    int mln = 2;
    double err = std::numeric_limits<double>::infinity();
    TrainedTree clf = train(mln, err);
    double cur = clf.training_error;
    while (cur < err) {
        err = cur;
        for (int i = 1; i <= 5; ++i) {
            TrainedTree next = train(mln + i, err);
            cur = next.training_error;
            if (cur < err) {
                clf = std::move(next);
                mln += i;
                break;
            }
        }
    }
    out.tree = std::move(clf);
    out.max_leaf_nodes = mln;
    return out;
}

std::string tree_to_text(const TrainedTree& tree)
{
    std::string out;
    auto distribution = [&](const TreeNode& n) {
        std::string s = "samples=" + std::to_string(n.samples) + " classes=[";
        for (std::size_t c = 0; c < n.class_counts.size(); ++c) {
            if (c) {
                s += ", ";
            }
            s += std::to_string(tree.class_ids[c]) + ":" + std::to_string(n.class_counts[c]);
        }
        return s + "] majority=" + std::to_string(n.majority);
    };
    auto walk = [&](auto&& self, std::size_t id, const std::string& indent, const std::string& edge) -> void {
        const TreeNode& n = tree.nodes[id];
        out += indent + edge;
        if (n.is_leaf()) {
            out += "leaf " + distribution(n) + '\n';
            return;
        }
        out += "[" + tree.columns[static_cast<std::size_t>(n.feature)].label() + "] " + distribution(n) + '\n';
        self(self, static_cast<std::size_t>(n.left), indent + "  ", "0: ");
        self(self, static_cast<std::size_t>(n.right), indent + "  ", "1: ");
    };
    walk(walk, 0, "", "");
    out += "# leaves=" + std::to_string(tree.leaf_count) + " depth=" + std::to_string(tree.depth) +
           " training_error=" + format_double(tree.training_error) + '\n';
    return out;
}

} // namespace schedrule
