#pragma once

#include "schedrule/cart.hpp"
#include "schedrule/dataset.hpp"
#include "schedrule/features.hpp"
#include "schedrule/labeling.hpp"
#include "schedrule/mcts.hpp"
#include "schedrule/rules.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace schedrule {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::filesystem::path dag_path;
    std::optional<int> num_streams; // overrides the DAG file
    CostModel cost_model;
    std::string executor = "simulator"; // or "external"
    std::string command;                // external command template
    std::uint64_t seed = 0;
    std::size_t iterations = 100;
    MeasurementProtocol protocol;
    std::optional<std::size_t> radius;
    double percentile = kDefaultPercentile;
    std::filesystem::path out_dir = "out";
    std::size_t enumeration_cap = kDefaultEnumerationCap;
    std::optional<std::size_t> reference_count;
    std::size_t top_k = 3;

    void validate() const;
};

/// Relative paths inside the file resolve against the file's directory.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

ProgramDag load_run_dag(const RunConfig& config);
std::unique_ptr<Executor> make_executor(const RunConfig& config, const ProgramDag& dag);

struct EnumerateOutcome {
    Dataset dataset;
    std::size_t count = 0;
    bool reference_mismatch = false;
};

/// Measures every schedule; writes enumeration.tsv and, when the count differs
/// from reference_count, branching_trace.txt.
EnumerateOutcome cmd_enumerate(const RunConfig& config, std::ostream& log);

/// Writes search.tsv and search_summary.txt.
SearchResult cmd_search(const RunConfig& config, std::ostream& log);

struct Analysis {
    Labeling labeling;
    FeatureMatrix matrix;
    std::vector<int> labels; // aligned with matrix rows
    HyperparamResult search;
    RuleReport report;
    std::vector<std::string> warnings;
};

/// Labels, featurizes, trains and extracts rules in memory.
Analysis analyze(const Dataset& dataset, const RunConfig& config);

/// Writes labels.tsv, sorted_times.tsv, features.tsv, tree.txt,
/// hyperparam_trace.tsv, rules.txt and rules.tsv.
Analysis cmd_analyze(const std::filesystem::path& dataset_path, const RunConfig& config, std::ostream& log);

/// Trains on `subset` and scores the tree against `full`.
double evaluate_datasets(const Dataset& subset, const Dataset& full, const RunConfig& config);

double cmd_evaluate(const std::filesystem::path& subset_path, const std::filesystem::path& full_path,
                    const RunConfig& config, std::ostream& log);

} // namespace schedrule
