#pragma once

#include "schedrule/dag.hpp"
#include "schedrule/schedule.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>

namespace schedrule {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure of an executor while timing one schedule.
class ExecutorError : public std::runtime_error {
public:
    ExecutorError(const std::string& what, std::string schedule_key = {});
    const std::string& schedule_key() const { return key_; }

private:
    std::string key_;
};

/// Per-operation durations and platform constants, all in seconds.
struct CostModel {
    std::map<std::string, double> durations;
    double gpu_launch_overhead = 5e-6;
    double comm_latency = 1e-4;
    double noise_rel_sigma = 0.0;
    std::uint64_t seed = 0;

    double duration(const std::string& cost_key) const;
    void validate() const;
};

CostModel parse_cost_model(const std::string& json_text);
std::string cost_model_to_json(const CostModel& model);

/// Noise-free end-to-end time of a schedule.
///
/// The CPU timeline issues operations in order. Kernel launches cost
/// `gpu_launch_overhead` on the CPU and then run on their stream once the stream
/// is free. Posted communication completes `comm_latency` after the post
/// returns; the matching wait blocks the CPU until then.
double simulate(const ProgramDag& dag, const Schedule& schedule, const CostModel& model);

/// Multiplicative timing jitter: truncated-positive normal factor with mean 1.
double noise_factor(std::mt19937_64& rng, double rel_sigma);

struct Measurement {
    std::string schedule_key;
    double time = 0.0;
    std::size_t n_samples = 0;

    bool operator==(const Measurement&) const = default;
};

struct MeasurementProtocol {
    double t_measure = 0.01;
    std::size_t max_samples = 100000;
};

/// Something that can time one invocation of a schedule.
class Executor {
public:
    virtual ~Executor() = default;
    virtual double execute(const Schedule& schedule) = 0;
};

class SimulatorExecutor : public Executor {
public:
    SimulatorExecutor(const ProgramDag& dag, CostModel model);
    double execute(const Schedule& schedule) override;

private:
    const ProgramDag& dag_;
    CostModel model_;
    std::mt19937_64 rng_;
};

/// Runs an external command per sample; `{schedule_file}` in the template is
/// replaced by the path of a file holding the schedule in the external format.
class ExternalExecutor : public Executor {
public:
    explicit ExternalExecutor(std::string command_template);
    double execute(const Schedule& schedule) override;

private:
    std::string template_;
};

double external_execute(const Schedule& schedule, const std::string& command_template);

/// Repeats samples until their accumulated time reaches t_measure (or the
/// sample cap) and reports the mean sample time.
Measurement measure(const Schedule& schedule, Executor& executor, const MeasurementProtocol& protocol);

} // namespace schedrule
