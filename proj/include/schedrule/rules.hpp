#pragma once

#include "schedrule/cart.hpp"
#include "schedrule/labeling.hpp"

#include <set>
#include <string>
#include <vector>

namespace schedrule {

struct Condition {
    Feature feature;
    bool value = false;
};

/// One root-to-leaf path.
struct RuleSet {
    int class_id = 0;
    std::vector<Condition> conditions; // root first
    std::vector<std::string> rules;    // rendered conditions
    std::size_t samples = 0;
    std::vector<std::size_t> distribution; // per-class sample counts at the leaf
    bool impure = false;
    std::size_t leaf = 0; // node index in the tree
};

struct ClassRules {
    int class_id = 0;
    std::vector<RuleSet> rulesets; // descending sample count
};

struct RuleReport {
    std::vector<int> class_ids; // column order of RuleSet::distribution
    std::vector<ClassRules> classes;
};

/// Text of a single condition. Reversed orderings are only claimed when both
/// ops appear in every schedule.
std::string render_condition(const Condition& c, const std::set<std::string>& always_present);

RuleReport extract_rules(const TrainedTree& tree, const std::set<std::string>& always_present);

/// Fraction of full-space schedules whose measured time falls inside the time
/// range of the class the tree predicts for them.
double evaluate_accuracy(const TrainedTree& tree, const Labeling& labeling, const Dataset& full_space);

std::string render_report(const RuleReport& report, std::size_t top_k = 3);

/// One rule per line: class, ruleset index, samples, impure flag, rule text.
std::string report_to_tsv(const RuleReport& report);

} // namespace schedrule
