#pragma once

#include "schedrule/features.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace schedrule {

class TreeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Split on a binary column (left = 0, right = 1) or a leaf.
struct TreeNode {
    int feature = -1; // column index, -1 for leaves
    int left = -1;
    int right = -1;
    int depth = 0;
    std::size_t samples = 0;
    std::vector<double> class_mass;         // weighted, indexed like TrainedTree::class_ids
    std::vector<std::size_t> class_counts;  // unweighted
    int majority = 0;                       // class id

    bool is_leaf() const { return feature < 0; }
};

struct TrainedTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
    std::vector<Feature> columns;
    std::vector<int> class_ids;  // ascending
    std::size_t leaf_count = 0;
    int depth = 0;
    double training_error = 0.0; // weighted misclassification fraction
    int max_leaf_nodes = 0;
    int max_depth = 0;

    std::size_t leaf_for(const FeatureRow& row) const;
    int predict(const FeatureRow& row) const;
};

/// w_c = M / (K * M_c).
std::map<int, double> balanced_weights(std::span<const int> labels);

/// 1 - sum p_c^2 over normalized masses.
double gini(std::span<const double> masses);

struct SplitChoice {
    std::size_t feature;
    double gain; // G(node) - m_L/m G(left) - m_R/m G(right)
};

/// Feature with the largest impurity decrease among those giving two nonempty
/// children; earliest column wins ties. Empty when the node is pure or no
/// feature separates its rows.
std::optional<SplitChoice> best_split(const std::vector<FeatureRow>& rows, std::span<const std::size_t> samples,
                                      std::span<const std::size_t> features, std::span<const int> labels,
                                      const std::map<int, double>& weights);

/// Best-first CART growth under both caps.
TrainedTree grow_tree(const FeatureMatrix& matrix, std::span<const int> labels, int max_leaf_nodes, int max_depth);

struct SearchStep {
    int max_leaf_nodes;
    double error;
    int depth;
    std::size_t leaves;
    bool accepted;
};

struct HyperparamResult {
    TrainedTree tree;
    int max_leaf_nodes = 2;
    std::vector<SearchStep> steps; // every training run, in call order
};

/// Leaf-count search: starting at 2 leaves, probe up to five larger sizes and
/// accept the first strict error improvement; stop when none improves.
/// Every candidate is trained with max_depth = max_leaf_nodes - 1.
HyperparamResult hyperparam_search(const FeatureMatrix& matrix, std::span<const int> labels);

/// Indented text dump: split feature names, leaf sample counts and classes.
std::string tree_to_text(const TrainedTree& tree);

} // namespace schedrule
