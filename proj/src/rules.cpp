#include "schedrule/rules.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace schedrule {

std::string render_condition(const Condition& c, const std::set<std::string>& always_present)
{
    const Feature& f = c.feature;
    if (f.kind == Feature::Kind::SameStream) {
        return f.u + (c.value ? " same stream as " : " different stream than ") + f.v;
    }
    if (c.value) {
        return f.u + " before " + f.v;
    }
    if (always_present.count(f.u) && always_present.count(f.v)) {
        return f.v + " before " + f.u;
    }
    return "not (" + f.u + " before " + f.v + ")";
}

RuleReport extract_rules(const TrainedTree& tree, const std::set<std::string>& always_present)
{
    RuleReport report;
    report.class_ids = tree.class_ids;
    std::map<int, std::vector<RuleSet>> by_class;

    std::vector<Condition> path;
    auto walk = [&](auto&& self, std::size_t id) -> void {
        const TreeNode& n = tree.nodes[id];
        if (n.is_leaf()) {
            RuleSet rs;
            rs.class_id = n.majority;
            rs.conditions = path;
            for (const auto& c : path) {
                rs.rules.push_back(render_condition(c, always_present));
            }
            rs.samples = n.samples;
            rs.distribution = n.class_counts;
            rs.impure =
                std::count_if(n.class_counts.begin(), n.class_counts.end(), [](std::size_t k) { return k > 0; }) > 1;
            rs.leaf = id;
            by_class[rs.class_id].push_back(std::move(rs));
            return;
        }
        const Feature& f = tree.columns[static_cast<std::size_t>(n.feature)];
        path.push_back({f, false});
        self(self, static_cast<std::size_t>(n.left));
        path.back().value = true;
        self(self, static_cast<std::size_t>(n.right));
        path.pop_back();
    };
    if (!tree.nodes.empty()) {
        walk(walk, 0);
    }

    for (auto& [cls, sets] : by_class) {
        std::stable_sort(sets.begin(), sets.end(),
                         [](const RuleSet& a, const RuleSet& b) { return a.samples > b.samples; });
        report.classes.push_back({cls, std::move(sets)});
    }
    return report;
}

double evaluate_accuracy(const TrainedTree& tree, const Labeling& labeling, const Dataset& full_space)
{
    if (full_space.empty()) {
        throw LabelingError("cannot evaluate against an empty design space");
    }
    std::size_t hits = 0;
    for (const auto& rec : full_space) {
        int cls = tree.predict(featurize(rec.schedule, tree.columns));
        const PerfClass& range = labeling.class_by_id(cls);
        if (range.members.empty()) {
            throw LabelingError("predicted class " + std::to_string(cls) + " has no time range");
        }
        // Equal times reached through different summation orders differ in the last bits.
        const double slack = 1e-9 * std::max(std::abs(range.min_time), std::abs(range.max_time));
        if (rec.aggregate >= range.min_time - slack && rec.aggregate <= range.max_time + slack) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(full_space.size());
}

namespace {

std::string distribution_text(const RuleReport& report, const RuleSet& rs)
{
    std::string out;
    for (std::size_t c = 0; c < rs.distribution.size(); ++c) {
        if (rs.distribution[c] == 0) {
            continue;
        }
        if (!out.empty()) {
            out += ", ";
        }
        out += "class " + std::to_string(report.class_ids[c]) + ": " + std::to_string(rs.distribution[c]);
    }
    return out;
}

} // namespace

std::string render_report(const RuleReport& report, std::size_t top_k)
{
    std::string out = "Design rules by performance class (1 = fastest)\n";
    for (const auto& cls : report.classes) {
        out += "\nClass " + std::to_string(cls.class_id) + '\n';
        std::size_t shown = std::min(top_k, cls.rulesets.size());
        for (std::size_t i = 0; i < shown; ++i) {
            const RuleSet& rs = cls.rulesets[i];
            out += "  Ruleset " + std::to_string(i + 1) + " (" + std::to_string(rs.samples) + " samples)";
            if (rs.impure) {
                out += " mixed: " + distribution_text(report, rs);
            }
            out += '\n';
            if (rs.rules.empty()) {
                out += "    - any implementation\n";
            }
            for (const auto& r : rs.rules) {
                out += "    - " + r + '\n';
            }
        }
        if (shown < cls.rulesets.size()) {
            out += "  (" + std::to_string(cls.rulesets.size() - shown) + " more rulesets)\n";
        }
    }
    return out;
}

std::string report_to_tsv(const RuleReport& report)
{
    std::string out = "class\truleset\tsamples\timpure\trule\n";
    for (const auto& cls : report.classes) {
        for (std::size_t i = 0; i < cls.rulesets.size(); ++i) {
            const RuleSet& rs = cls.rulesets[i];
            std::string prefix = std::to_string(cls.class_id) + '\t' + std::to_string(i + 1) + '\t' +
                                 std::to_string(rs.samples) + '\t' + (rs.impure ? "1" : "0") + '\t';
            if (rs.rules.empty()) {
                out += prefix + "*\n";
            }
            for (const auto& r : rs.rules) {
                out += prefix + r + '\n';
            }
        }
    }
    return out;
}

} // namespace schedrule
