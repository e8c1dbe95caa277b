#include "schedrule/simulator.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

namespace schedrule {

ExecutorError::ExecutorError(const std::string& what, std::string schedule_key)
    : std::runtime_error(schedule_key.empty() ? what : what + " [schedule " + schedule_key + "]"),
      key_(std::move(schedule_key))
{
}

double CostModel::duration(const std::string& cost_key) const
{
    auto it = durations.find(cost_key);
    if (it == durations.end()) {
        throw SimulationError("no duration for cost key '" + cost_key + "'");
    }
    return it->second;
}

void CostModel::validate() const
{
    for (const auto& [key, d] : durations) {
        if (!(d >= 0.0) || !std::isfinite(d)) {
            throw SimulationError("duration for '" + key + "' must be finite and non-negative");
        }
    }
    if (!(gpu_launch_overhead >= 0.0) || !(comm_latency >= 0.0)) {
        throw SimulationError("launch overhead and communication latency must be non-negative");
    }
    if (!(noise_rel_sigma >= 0.0)) {
        throw SimulationError("noise_rel_sigma must be non-negative");
    }
}

CostModel parse_cost_model(const std::string& json_text)
{
    try {
        auto doc = nlohmann::json::parse(json_text);
        CostModel m;
        if (doc.contains("durations")) {
            m.durations = doc.at("durations").get<std::map<std::string, double>>();
        }
        m.gpu_launch_overhead = doc.value("gpu_launch_overhead", m.gpu_launch_overhead);
        m.comm_latency = doc.value("comm_latency", m.comm_latency);
        m.noise_rel_sigma = doc.value("noise_rel_sigma", m.noise_rel_sigma);
        m.seed = doc.value("seed", m.seed);
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw SimulationError(std::string("malformed cost model: ") + e.what());
    }
}

std::string cost_model_to_json(const CostModel& model)
{
    nlohmann::json doc;
    doc["durations"] = model.durations;
    doc["gpu_launch_overhead"] = model.gpu_launch_overhead;
    doc["comm_latency"] = model.comm_latency;
    doc["noise_rel_sigma"] = model.noise_rel_sigma;
    doc["seed"] = model.seed;
    return doc.dump(2);
}

double simulate(const ProgramDag& dag, const Schedule& schedule, const CostModel& model)
{
    const auto streams = static_cast<std::size_t>(dag.num_streams());
    double cpu = 0.0;
    std::vector<double> stream_clock(streams, 0.0);
    std::vector<double> event_time;
    std::vector<std::optional<double>> comm_done(dag.size());

    auto vertex_of = [&](const ExecutedOp& op) -> const Vertex& {
        if (op.vertex < 0 || static_cast<std::size_t>(op.vertex) >= dag.size()) {
            throw SimulationError("operation '" + op.name + "' has no DAG vertex");
        }
        return dag.vertex(static_cast<std::size_t>(op.vertex));
    };
    auto check_stream = [&](int s) {
        if (s < 0 || static_cast<std::size_t>(s) >= streams) {
            throw SimulationError("stream " + std::to_string(s) + " out of range");
        }
        return static_cast<std::size_t>(s);
    };
    auto event_at = [&](int e) {
        if (e < 0 || static_cast<std::size_t>(e) >= event_time.size()) {
            throw SimulationError("event " + std::to_string(e) + " used before it was recorded");
        }
        return event_time[static_cast<std::size_t>(e)];
    };

    for (const auto& op : schedule.ops) {
        switch (op.kind) {
        case ExecKind::Cpu:
            cpu += model.duration(vertex_of(op).cost_key);
            break;
        case ExecKind::PostSend:
        case ExecKind::PostRecv:
            cpu += model.duration(vertex_of(op).cost_key);
            comm_done[static_cast<std::size_t>(op.vertex)] = cpu + model.comm_latency;
            break;
        case ExecKind::WaitSend:
        case ExecKind::WaitRecv: {
            const Vertex& vx = vertex_of(op);
            auto post = dag.matching_post(static_cast<std::size_t>(op.vertex));
            if (!post || !comm_done[*post]) {
                throw SimulationError("wait '" + vx.name + "' has no matching posted communication");
            }
            cpu = std::max(cpu, *comm_done[*post]);
            cpu += model.duration(vx.cost_key);
            break;
        }
        case ExecKind::BoundGpu: {
            const Vertex& vx = vertex_of(op);
            auto s = check_stream(op.stream);
            cpu += model.gpu_launch_overhead;
            double begin = std::max(stream_clock[s], cpu);
            stream_clock[s] = begin + model.duration(vx.cost_key);
            break;
        }
        case ExecKind::EventRecord: {
            auto s = check_stream(op.stream);
            if (op.event != static_cast<int>(event_time.size())) {
                throw SimulationError("event ids must be recorded sequentially");
            }
            event_time.push_back(stream_clock[s]);
            break;
        }
        case ExecKind::EventSync:
            cpu = std::max(cpu, event_at(op.event));
            break;
        case ExecKind::StreamWaitEvent: {
            auto s = check_stream(op.stream);
            stream_clock[s] = std::max(stream_clock[s], event_at(op.event));
            break;
        }
        }
    }
    return cpu;
}

double noise_factor(std::mt19937_64& rng, double rel_sigma)
{
    if (rel_sigma <= 0.0) {
        return 1.0;
    }
    std::normal_distribution<double> dist(1.0, rel_sigma);
    for (;;) {
        double f = dist(rng);
        if (f > 0.0) {
            return f;
        }
    }
}

SimulatorExecutor::SimulatorExecutor(const ProgramDag& dag, CostModel model)
    : dag_(dag), model_(std::move(model)), rng_(model_.seed)
{
    model_.validate();
}

double SimulatorExecutor::execute(const Schedule& schedule)
{
    double t = simulate(dag_, schedule, model_);
    return t * noise_factor(rng_, model_.noise_rel_sigma);
}

namespace {

std::string trim(std::string s)
{
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

class TempFile {
public:
    TempFile()
    {
        std::string pattern = "/tmp/schedrule-XXXXXX";
        int fd = ::mkstemp(pattern.data());
        if (fd < 0) {
            throw ExecutorError("cannot create a temporary schedule file");
        }
        ::close(fd);
        path_ = pattern;
    }
    ~TempFile() { std::remove(path_.c_str()); }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

} // namespace

double external_execute(const Schedule& schedule, const std::string& command_template)
{
    TempFile file;
    {
        std::ofstream out(file.path());
        out << to_external_format(schedule);
        if (!out) {
            throw ExecutorError("cannot write schedule file '" + file.path() + "'", schedule.canonical_key);
        }
    }

    std::string command = command_template;
    const std::string placeholder = "{schedule_file}";
    for (auto pos = command.find(placeholder); pos != std::string::npos; pos = command.find(placeholder, pos)) {
        command.replace(pos, placeholder.size(), file.path());
        pos += file.path().size();
    }

    FILE* pipe = ::popen(command.c_str(), "r");
    if (!pipe) {
        throw ExecutorError("cannot start command '" + command + "'", schedule.canonical_key);
    }
    std::string output;
    std::array<char, 512> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) {
        output.append(buf.data(), n);
    }
    int status = ::pclose(pipe);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        throw ExecutorError("command '" + command + "' failed with exit status " + std::to_string(code),
                            schedule.canonical_key);
    }

    std::string text = trim(output);
    double seconds = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seconds);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ExecutorError("cannot parse seconds from command output '" + text + "'", schedule.canonical_key);
    }
    return seconds;
}

ExternalExecutor::ExternalExecutor(std::string command_template) : template_(std::move(command_template))
{
    if (template_.find("{schedule_file}") == std::string::npos) {
        throw ExecutorError("command template must reference {schedule_file}");
    }
}

double ExternalExecutor::execute(const Schedule& schedule)
{
    return external_execute(schedule, template_);
}

Measurement measure(const Schedule& schedule, Executor& executor, const MeasurementProtocol& protocol)
{
    if (!(protocol.t_measure > 0.0) || protocol.max_samples == 0) {
        throw ExecutorError("measurement protocol needs t_measure > 0 and max_samples >= 1");
    }
    double accumulated = 0.0;
    std::size_t samples = 0;
    while (samples < protocol.max_samples && (samples == 0 || accumulated < protocol.t_measure)) {
        double t = 0.0;
        try {
            t = executor.execute(schedule);
        } catch (const ExecutorError& e) {
            if (!e.schedule_key().empty()) {
                throw;
            }
            throw ExecutorError(e.what(), schedule.canonical_key);
        } catch (const std::exception& e) {
            throw ExecutorError(e.what(), schedule.canonical_key);
        }
        if (!(t > 0.0) || !std::isfinite(t)) {
            throw ExecutorError("executor returned a non-positive time", schedule.canonical_key);
        }
        accumulated += t;
        ++samples;
    }
    return {schedule.canonical_key, accumulated / static_cast<double>(samples), samples};
}

} // namespace schedrule
