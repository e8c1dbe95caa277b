#include "schedrule/pipeline.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace schedrule {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw ConfigError("error while writing " + path.string());
    }
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

void RunConfig::validate() const
{
    if (dag_path.empty()) {
        throw ConfigError("config is missing the dag path");
    }
    if (!fs::exists(dag_path)) {
        throw ConfigError("dag file not found: " + dag_path.string());
    }
    if (num_streams && *num_streams < 1) {
        throw ConfigError("num_streams must be at least 1");
    }
    if (executor == "external") {
        if (command.empty()) {
            throw ConfigError("external executor needs a command");
        }
    } else if (executor != "simulator") {
        throw ConfigError("executor must be 'simulator' or 'external', got '" + executor + "'");
    }
    if (iterations < 1) {
        throw ConfigError("iterations must be at least 1");
    }
    if (!(protocol.t_measure > 0.0) || protocol.max_samples < 1) {
        throw ConfigError("t_measure must be positive and max_samples at least 1");
    }
    if (radius && *radius < 1) {
        throw ConfigError("radius must be at least 1");
    }
    if (percentile < 0.0 || percentile > 100.0) {
        throw ConfigError("percentile must lie in [0, 100]");
    }
    cost_model.validate();
}

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir)
{
    RunConfig c;
    try {
        auto doc = nlohmann::json::parse(json_text);
        c.dag_path = resolve(base_dir, doc.at("dag").get<std::string>());
        if (doc.contains("num_streams")) {
            c.num_streams = doc.at("num_streams").get<int>();
        }
        if (doc.contains("cost_model")) {
            const auto& cm = doc.at("cost_model");
            c.cost_model = parse_cost_model(cm.is_string() ? read_file(resolve(base_dir, cm.get<std::string>()))
                                                           : cm.dump());
        }
        c.executor = doc.value("executor", c.executor);
        c.command = doc.value("command", c.command);
        c.seed = doc.value("seed", c.seed);
        if (doc.contains("iterations")) {
            auto it = doc.at("iterations").get<long long>();
            if (it < 1) {
                throw ConfigError("iterations must be at least 1");
            }
            c.iterations = static_cast<std::size_t>(it);
        }
        c.protocol.t_measure = doc.value("t_measure", c.protocol.t_measure);
        c.protocol.max_samples = doc.value("max_samples", c.protocol.max_samples);
        if (doc.contains("radius")) {
            c.radius = doc.at("radius").get<std::size_t>();
        }
        c.percentile = doc.value("percentile", c.percentile);
        if (doc.contains("out_dir")) {
            c.out_dir = resolve(base_dir, doc.at("out_dir").get<std::string>());
        }
        c.enumeration_cap = doc.value("enumeration_cap", c.enumeration_cap);
        if (doc.contains("reference_count")) {
            c.reference_count = doc.at("reference_count").get<std::size_t>();
        }
        c.top_k = doc.value("top_k", c.top_k);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const fs::path& path)
{
    return parse_config(read_file(path), path.parent_path());
}

ProgramDag load_run_dag(const RunConfig& config)
{
    ProgramDag dag = load_dag(config.dag_path.string());
    if (config.num_streams) {
        dag = dag.with_streams(*config.num_streams);
    }
    require_valid(dag);
    return dag;
}

std::unique_ptr<Executor> make_executor(const RunConfig& config, const ProgramDag& dag)
{
    if (config.executor == "external") {
        return std::make_unique<ExternalExecutor>(config.command);
    }
    return std::make_unique<SimulatorExecutor>(dag, config.cost_model);
}

EnumerateOutcome cmd_enumerate(const RunConfig& config, std::ostream& log)
{
    ProgramDag dag = load_run_dag(config);
    auto executor = make_executor(config, dag);
    EnumerateOutcome out;
    for (const auto& s : enumerate_schedules(dag, config.enumeration_cap)) {
        out.dataset.add(s, measure(s, *executor, config.protocol));
    }
    out.count = out.dataset.size();
    fs::create_directories(config.out_dir);
    const fs::path dataset_path = config.out_dir / "enumeration.tsv";
    write_dataset(out.dataset, dataset_path.string());

    log << "schedules: " << out.count;
    if (config.reference_count) {
        out.reference_mismatch = out.count != *config.reference_count;
        log << " (reference " << *config.reference_count << (out.reference_mismatch ? ", mismatch" : ", match")
            << ")";
    }
    log << '\n';
    if (out.reference_mismatch) {
        std::string trace = "# depth\tchildren\tcompletions\tprefix\n";
        for (const auto& r : branching_trace(dag, config.enumeration_cap)) {
            trace += std::to_string(r.depth) + '\t' + std::to_string(r.children) + '\t' +
                     std::to_string(r.completions) + '\t' + r.prefix + '\n';
        }
        const fs::path trace_path = config.out_dir / "branching_trace.txt";
        write_file(trace_path, trace);
        log << "per-prefix branching trace: " << trace_path.string() << '\n';
    }
    log << "dataset: " << dataset_path.string() << '\n';
    return out;
}

SearchResult cmd_search(const RunConfig& config, std::ostream& log)
{
    if (config.iterations < 1) {
        throw ConfigError("iterations must be at least 1");
    }
    ProgramDag dag = load_run_dag(config);
    auto executor = make_executor(config, dag);
    SearchResult result = run_search(dag, *executor, config.iterations, config.seed, config.protocol);

    fs::create_directories(config.out_dir);
    const fs::path dataset_path = config.out_dir / "search.tsv";
    write_dataset(result.dataset, dataset_path.string());
    const std::size_t nodes = result.tree.size();
    const std::size_t done = result.tree.fully_explored_count();
    std::string summary = "iterations\t" + std::to_string(result.iterations_run) + "\nschedules\t" +
                          std::to_string(result.dataset.size()) + "\nnodes\t" + std::to_string(nodes) +
                          "\nfully_explored\t" + std::to_string(done) + "\nexplored_fraction\t" +
                          format_double(static_cast<double>(done) / static_cast<double>(nodes)) +
                          "\nroot_fully_explored\t" +
                          (result.tree.node(result.tree.root()).fully_explored ? "1" : "0") + '\n';
    write_file(config.out_dir / "search_summary.txt", summary);
    log << "iterations: " << result.iterations_run << "\nschedules measured: " << result.dataset.size()
        << "\ntree nodes: " << nodes << " (" << done << " fully explored)\ndataset: " << dataset_path.string()
        << '\n';
    return result;
}

Analysis analyze(const Dataset& dataset, const RunConfig& config)
{
    Analysis a;
    a.labeling = make_labels(dataset, config.radius, config.percentile);
    a.matrix = build_matrix(dataset);
    auto labels = a.labeling.labels();
    for (const auto& key : a.matrix.row_keys) {
        a.labels.push_back(labels.at(key));
    }
    if (a.labeling.classes.size() == 1) {
        a.warnings.push_back("all schedules fall into a single performance class; the rules are vacuous");
    }
    a.search = hyperparam_search(a.matrix, a.labels);
    a.report = extract_rules(a.search.tree, a.matrix.always_present);
    return a;
}

Analysis cmd_analyze(const fs::path& dataset_path, const RunConfig& config, std::ostream& log)
{
    ProgramDag dag = load_run_dag(config);
    Dataset dataset = read_dataset(dataset_path.string(), dag);
    Analysis a = analyze(dataset, config);

    const fs::path& dir = config.out_dir;
    write_file(dir / "labels.tsv", labeling_to_text(a.labeling));
    write_file(dir / "sorted_times.tsv", labeling_plot_data(a.labeling));
    write_file(dir / "features.tsv", matrix_to_text(a.matrix));
    write_file(dir / "tree.txt", tree_to_text(a.search.tree));
    std::string trace = "max_leaf_nodes\ttraining_error\tdepth\tleaves\taccepted\n";
    for (const auto& s : a.search.steps) {
        trace += std::to_string(s.max_leaf_nodes) + '\t' + format_double(s.error) + '\t' + std::to_string(s.depth) +
                 '\t' + std::to_string(s.leaves) + '\t' + (s.accepted ? "1" : "0") + '\n';
    }
    write_file(dir / "hyperparam_trace.tsv", trace);
    std::string report = render_report(a.report, config.top_k);
    write_file(dir / "rules.txt", report);
    write_file(dir / "rules.tsv", report_to_tsv(a.report));

    for (const auto& w : a.warnings) {
        log << "warning: " << w << '\n';
    }
    log << "classes: " << a.labeling.classes.size() << "\nfeatures: " << a.matrix.width() << " ("
        << a.matrix.dropped.size() << " constant dropped)\ntree: " << a.search.tree.leaf_count
        << " leaves, depth " << a.search.tree.depth << ", training error "
        << format_double(a.search.tree.training_error) << "\n\n"
        << report;
    return a;
}

double evaluate_datasets(const Dataset& subset, const Dataset& full, const RunConfig& config)
{
    if (subset.empty()) {
        throw ConfigError("subset dataset is empty");
    }
    for (const auto& rec : subset) {
        if (!full.contains(rec.schedule.canonical_key)) {
            throw ConfigError("schedule " + rec.schedule.canonical_key +
                              " is not part of the full design space; the datasets describe different DAGs");
        }
    }
    Analysis a = analyze(subset, config);
    return evaluate_accuracy(a.search.tree, a.labeling, full);
}

double cmd_evaluate(const fs::path& subset_path, const fs::path& full_path, const RunConfig& config,
                    std::ostream& log)
{
    ProgramDag dag = load_run_dag(config);
    Dataset subset = read_dataset(subset_path.string(), dag);
    Dataset full = read_dataset(full_path.string(), dag);
    double accuracy = evaluate_datasets(subset, full, config);
    log << "accuracy: " << format_double(accuracy) << " (" << subset.size() << " training schedules, "
        << full.size() << " evaluated)\n";
    return accuracy;
}

} // namespace schedrule
