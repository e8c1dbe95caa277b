// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "schedrule/pipeline.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace schedrule;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double time_limit; // seconds
    std::function<Outcome()> run;
};

std::string fmt(double v)
{
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("schedrule_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

std::set<std::string> keys_of(const Dataset& d)
{
    std::set<std::string> out;
    for (const auto& r : d) {
        out.insert(r.schedule.canonical_key);
    }
    return out;
}

std::set<std::string> keys_of(const std::vector<Schedule>& all)
{
    std::set<std::string> out;
    for (const auto& s : all) {
        out.insert(s.canonical_key);
    }
    return out;
}

Outcome enumeration_oracle()
{
    std::mt19937_64 rng(2024);
    int dags = 0;
    std::size_t schedules = 0;
    for (; dags < 30; ++dags) {
        // start + end + at most six interior vertices.
        ProgramDag dag = random_dag(rng, 6, 1 + dags % 2);
        auto fast = keys_of(enumerate_schedules(dag));
        if (fast != naive_schedule_keys(dag)) {
            return {false, "DAG " + std::to_string(dags) + " differs from the brute-force oracle"};
        }
        schedules += fast.size();
    }
    return {true, std::to_string(dags) + " random DAGs, " + std::to_string(schedules) + " schedules, all equal"};
}

// Shared by the space-size and evaluation criteria.
struct SpmvRun {
    RunConfig config;
    EnumerateOutcome full;
    std::string log;
};

SpmvRun& spmv_run()
{
    static SpmvRun run = [] {
        SpmvRun r;
        r.config = load_config(data_file("spmv_config.json"));
        r.config.out_dir = scratch("spmv");
        std::ostringstream log;
        r.full = cmd_enumerate(r.config, log);
        r.log = log.str();
        return r;
    }();
    return run;
}

Outcome spmv_space_size()
{
    SpmvRun& r = spmv_run();
    const std::size_t reference = r.config.reference_count.value_or(0);
    const std::string reported = "schedules: " + std::to_string(r.full.count) + " (reference " +
                                 std::to_string(reference);
    if (r.log.find(reported) == std::string::npos) {
        return {false, "count not reported alongside the reference"};
    }
    if (r.full.count == reference) {
        return {true, "exact match: " + std::to_string(r.full.count)};
    }
    fs::path trace = r.config.out_dir / "branching_trace.txt";
    if (!fs::exists(trace)) {
        return {false, "mismatch without a branching trace"};
    }
    std::ifstream in(trace);
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) {
        ++lines;
    }
    return {lines > 1, "count " + std::to_string(r.full.count) + " vs reference " + std::to_string(reference) +
                           " (no exact match); branching trace emitted with " + std::to_string(lines - 1) +
                           " prefixes"};
}

Outcome mcts_formulas()
{
    const double e = explore_value(2, 1, false);
    if (std::abs(e - 1.17741) > 1e-5) {
        return {false, "explore_value(2,1) = " + fmt(e)};
    }
    ProgramDag dag = load_dag(data_file("spmv.json"));
    SimulatorExecutor ex(dag, load_config(data_file("spmv_config.json")).cost_model);
    SearchResult res = run_search(dag, ex, 1000, 11);
    std::size_t checked = 0;
    for (std::size_t id = 0; id < res.tree.size(); ++id) {
        const SearchNode& n = res.tree.node(static_cast<int>(id));
        for (int c : n.children) {
            const SearchNode& ch = res.tree.node(c);
            if (ch.n == 0) {
                continue;
            }
            double v = exploit_value(ch, n);
            if (!(v >= 0.0 && v <= 1.0)) {
                return {false, "exploit value " + fmt(v) + " outside [0, 1]"};
            }
            ++checked;
        }
    }
    return {res.iterations_run == 1000,
            "explore_value(2,1) = " + fmt(e) + "; " + std::to_string(checked) + " exploit values in [0, 1] over " +
                std::to_string(res.iterations_run) + " rollouts"};
}

Outcome mcts_coverage()
{
    std::string detail;
    for (const char* file : {"diamond.json", "spmv_subset.json"}) {
        ProgramDag dag = load_dag(data_file(file));
        CostModel model;
        for (const auto& v : dag.vertices()) {
            model.durations[v.cost_key] = 1e-5 * static_cast<double>(1 + v.name.size());
        }
        SimulatorExecutor ex(dag, model);
        auto all = enumerate_schedules(dag);
        SearchResult res = run_search(dag, ex, 5 * all.size(), 5);
        if (all.size() > 200) {
            return {false, std::string(file) + " has more than 200 schedules"};
        }
        if (!res.tree.node(res.tree.root()).fully_explored) {
            return {false, std::string(file) + ": root not fully explored"};
        }
        if (keys_of(res.dataset) != keys_of(all)) {
            return {false, std::string(file) + ": dataset differs from the enumeration"};
        }
        detail += std::string(detail.empty() ? "" : "; ") + file + " " + std::to_string(all.size()) +
                  " schedules covered in " + std::to_string(res.iterations_run) + " iterations";
    }
    return {true, detail};
}

// Three Gaussian clusters of 200 simulated times each.
Labeling trimodal(std::uint64_t seed, const std::vector<double>& centers)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<std::string> keys;
    std::vector<double> times;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (int i = 0; i < 200; ++i) {
            keys.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
            times.push_back(centers[c] + noise(rng));
        }
    }
    return label_times(keys, times);
}

bool splits_in_gaps(const Labeling& lab, const std::vector<double>& centers)
{
    if (lab.classes.size() != 3) {
        return false;
    }
    for (std::size_t b = 0; b < 2; ++b) {
        const double lo = lab.sorted_times[lab.boundaries[b]];
        const double hi = lab.sorted_times[lab.boundaries[b] + 1];
        const double gap = 0.5 * (centers[b] + centers[b + 1]);
        if (!(lo < gap && hi > gap) || lab.boundaries[b] != 200 * b + 199) {
            return false;
        }
    }
    return true;
}

Outcome labeling()
{
    const std::vector<double> centers{1.0, 1.5, 2.2};
    // The fixture is seed 0; other seeds are reported for context only.
    Labeling lab = trimodal(0, centers);
    int good = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        good += splits_in_gaps(trimodal(seed, centers), centers);
    }
    std::string detail = "fixture gave " + std::to_string(lab.classes.size()) + " classes (" +
                         std::to_string(lab.peaks.size()) + " peaks, threshold " + fmt(lab.threshold) +
                         "); 3 classes split in the gaps on " + std::to_string(good) + "/20 seeds";
    bool ok = splits_in_gaps(lab, centers);
    if (default_radius(2036) != 10) {
        ok = false;
        detail += "; default_radius(2036) = " + std::to_string(default_radius(2036));
    } else {
        detail += "; default_radius(2036) = 10";
    }
    std::vector<std::string> keys;
    for (int i = 0; i < 300; ++i) {
        keys.push_back("k" + std::to_string(i));
    }
    Labeling one = label_times(keys, std::vector<double>(300, 4.2e-4));
    ok = ok && one.classes.size() == 1;
    detail += "; constant input " + std::to_string(one.classes.size()) + " class";
    return {ok, detail};
}

Outcome decision_tree()
{
    std::mt19937_64 rng(12);
    std::bernoulli_distribution bit(0.5);
    FeatureMatrix m;
    for (int j = 0; j < 12; ++j) {
        m.columns.push_back(Feature::ordering("op" + std::to_string(j / 10) + std::to_string(j % 10), "zz"));
    }
    std::vector<int> labels;
    for (int i = 0; i < 500; ++i) {
        FeatureRow row(12);
        for (auto& x : row) {
            x = bit(rng);
        }
        m.row_keys.push_back("r" + std::to_string(i));
        labels.push_back(1 + row[3] + 2 * row[7]);
        m.rows.push_back(std::move(row));
    }
    HyperparamResult r = hyperparam_search(m, labels);
    double prev = std::numeric_limits<double>::infinity();
    std::string trajectory;
    for (const auto& s : r.steps) {
        if (s.error > prev) {
            return {false, "error rose to " + fmt(s.error) + " at max_leaf_nodes " + std::to_string(s.max_leaf_nodes)};
        }
        if (s.accepted) {
            prev = s.error;
        }
        trajectory += (trajectory.empty() ? "" : " ") + std::to_string(s.max_leaf_nodes) + ":" + fmt(s.error);
    }
    const bool ok = r.tree.training_error == 0.0 && r.tree.leaf_count <= 4;
    return {ok, "training error " + fmt(r.tree.training_error) + " with " + std::to_string(r.tree.leaf_count) +
                    " leaves; trajectory " + trajectory};
}

Outcome table_sweep()
{
    SpmvRun& run = spmv_run();
    std::vector<double> acc;
    std::string detail;
    for (std::size_t n : {50, 100, 200, 400}) {
        RunConfig c = run.config;
        c.iterations = n;
        c.out_dir = scratch("sweep_" + std::to_string(n));
        std::ostringstream log;
        SearchResult s = cmd_search(c, log);
        acc.push_back(evaluate_datasets(s.dataset, run.full.dataset, c));
        detail += std::to_string(n) + ": " + fmt(acc.back()) + ", ";
    }
    acc.push_back(evaluate_datasets(run.full.dataset, run.full.dataset, run.config));
    detail += "full: " + fmt(acc.back());
    bool ok = acc.back() == 1.0;
    for (std::size_t i = 1; i < acc.size(); ++i) {
        ok = ok && acc[i] >= acc[i - 1] - 0.05;
    }
    return {ok, detail};
}

Outcome rule_extraction()
{
    auto node = [](int feature, int left, int right, std::size_t samples, std::vector<std::size_t> counts,
                   int majority, int depth) {
        TreeNode n;
        n.feature = feature;
        n.left = left;
        n.right = right;
        n.samples = samples;
        n.class_counts = counts;
        n.class_mass.assign(counts.begin(), counts.end());
        n.majority = majority;
        n.depth = depth;
        return n;
    };
    TrainedTree t;
    t.columns = {Feature::same_stream("Pack", "y_L"), Feature::ordering("PostSend", "y_L")};
    t.class_ids = {1, 2};
    t.nodes = {node(0, 1, 2, 12, {6, 6}, 1, 0), node(1, 3, 4, 7, {5, 2}, 1, 1), node(-1, -1, -1, 5, {1, 4}, 2, 1),
               node(-1, -1, -1, 3, {1, 2}, 2, 2), node(-1, -1, -1, 4, {4, 0}, 1, 2)};
    t.leaf_count = 3;
    t.depth = 2;
    const std::string expected = "Design rules by performance class (1 = fastest)\n"
                                 "\n"
                                 "Class 1\n"
                                 "  Ruleset 1 (4 samples)\n"
                                 "    - Pack different stream than y_L\n"
                                 "    - PostSend before y_L\n"
                                 "\n"
                                 "Class 2\n"
                                 "  Ruleset 1 (5 samples) mixed: class 1: 1, class 2: 4\n"
                                 "    - Pack same stream as y_L\n"
                                 "  Ruleset 2 (3 samples) mixed: class 1: 1, class 2: 2\n"
                                 "    - Pack different stream than y_L\n"
                                 "    - y_L before PostSend\n";
    std::string got = render_report(extract_rules(t, {"Pack", "y_L", "PostSend"}));
    return {got == expected, got == expected ? "3 rulesets rendered verbatim" : "rendered text differs:\n" + got};
}

double resource_lower_bound(const ProgramDag& dag, const Schedule& s, const CostModel& m)
{
    double cpu = 0.0;
    std::vector<double> stream(static_cast<std::size_t>(dag.num_streams()), 0.0);
    for (const auto& op : s.ops) {
        if (is_sync(op.kind)) {
            continue;
        }
        double d = m.duration(dag.vertex(static_cast<std::size_t>(op.vertex)).cost_key);
        if (op.kind == ExecKind::BoundGpu) {
            stream[static_cast<std::size_t>(op.stream)] += d;
            cpu += m.gpu_launch_overhead;
        } else {
            cpu += d;
        }
    }
    return std::max(cpu, *std::max_element(stream.begin(), stream.end()));
}

Outcome simulator_properties()
{
    std::mt19937_64 rng(500);
    std::uniform_real_distribution<double> bump(1e-3, 1.0);
    for (int i = 0; i < 500; ++i) {
        ProgramDag dag = random_dag(rng, 6, 2);
        Schedule s = random_schedule(dag, rng);
        CostModel m = random_model(dag, rng);
        const double base = simulate(dag, s, m);
        if (base + 1e-12 < resource_lower_bound(dag, s, m)) {
            return {false, "case " + std::to_string(i) + " beats the resource lower bound"};
        }
        const auto& v = dag.vertex(std::uniform_int_distribution<std::size_t>(0, dag.size() - 1)(rng));
        CostModel bigger = m;
        bigger.durations[v.cost_key] += bump(rng);
        if (simulate(dag, s, bigger) < base) {
            return {false, "case " + std::to_string(i) + " got faster when " + v.name + " slowed down"};
        }
    }
    return {true, "500 random cases: monotone and above the resource lower bound"};
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {"enumeration-oracle", 10, enumeration_oracle},
        {"spmv-space-size", 60, spmv_space_size},
        {"mcts-formulas", 30, mcts_formulas},
        {"mcts-coverage", 60, mcts_coverage},
        {"labeling", 5, labeling},
        {"decision-tree", 10, decision_tree},
        {"accuracy-sweep", 300, table_sweep},
        {"rule-extraction", 1, rule_extraction},
        {"simulator-properties", 30, simulator_properties},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.time_limit) {
            o.ok = false;
            o.detail += " (took " + fmt(secs) + " s, limit " + fmt(c.time_limit) + " s)";
        }
        failures += !o.ok;
        std::cout << (o.ok ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << fmt(secs) << " s]"
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
