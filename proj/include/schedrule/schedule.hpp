#pragma once

#include "schedrule/dag.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace schedrule {

class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an operation is requested that is not legal in the current prefix.
class PreconditionError : public ScheduleError {
public:
    using ScheduleError::ScheduleError;
};

class EnumerationTooLarge : public ScheduleError {
public:
    explicit EnumerationTooLarge(std::size_t cap);
    std::size_t cap() const { return cap_; }

private:
    std::size_t cap_;
};

enum class ExecKind { Cpu, PostSend, PostRecv, WaitSend, WaitRecv, BoundGpu, EventRecord, EventSync, StreamWaitEvent };

std::string_view to_string(ExecKind kind);
ExecKind exec_kind_from_string(std::string_view text);

constexpr bool is_sync(ExecKind kind)
{
    return kind == ExecKind::EventRecord || kind == ExecKind::EventSync || kind == ExecKind::StreamWaitEvent;
}

/// One operation of a concrete implementation.
///
/// `stream` is set for BoundGpu, EventRecord and StreamWaitEvent; `event` for the
/// three synchronization kinds; `vertex` indexes the DAG for non-sync operations.
struct ExecutedOp {
    std::string name;
    ExecKind kind = ExecKind::Cpu;
    int stream = -1;
    int event = -1;
    int vertex = -1;

    bool operator==(const ExecutedOp&) const = default;
};

/// Executed kind of a DAG vertex bound to `stream` (ignored for CPU-side kinds).
ExecKind exec_kind_for(OpKind kind);

struct Schedule {
    std::vector<ExecutedOp> ops;
    std::string canonical_key;

    bool operator==(const Schedule&) const = default;
};

/// Builds a schedule from `ops` as given; the key is computed on the canonical form.
Schedule make_schedule(std::vector<ExecutedOp> ops);

/// Streams relabelled in order of first use; idempotent.
Schedule canonical_stream_form(const Schedule& schedule);
std::vector<ExecutedOp> canonical_stream_form(std::vector<ExecutedOp> ops);

/// Compact single-line key of an op sequence (streams taken as given).
std::string op_sequence_key(const std::vector<ExecutedOp>& ops);

/// Partial traversal plus the synchronization state needed to extend it.
///
/// Stream knowledge is tracked as vector clocks: for the CPU and every stream,
/// how many operations of each stream are known to have completed.
class Prefix {
public:
    explicit Prefix(const ProgramDag& dag);

    const std::vector<ExecutedOp>& ops() const { return ops_; }
    /// Number of DAG vertices executed; inserted syncs do not count.
    std::size_t length() const { return length_; }
    bool executed(std::size_t v) const { return done_.at(v); }
    bool complete() const { return length_ == done_.size(); }
    int num_streams() const { return num_streams_; }
    int streams_used() const;

    /// Sync operations that must precede vertex `v` bound to `stream`.
    std::vector<ExecutedOp> syncs_for(const ProgramDag& dag, std::size_t v, int stream) const;

    /// Appends the required syncs and then `v`. Throws PreconditionError when
    /// `v` is not in the frontier or the stream is out of range.
    void append(const ProgramDag& dag, std::size_t v, int stream = -1);

    Schedule to_schedule() const;

private:
    struct Event {
        int stream;
        std::vector<int> snapshot;
    };

    void check_legal(const ProgramDag& dag, std::size_t v, int stream) const;
    std::vector<int>& knowledge(int ctx) { return known_[static_cast<std::size_t>(ctx + 1)]; }
    const std::vector<int>& knowledge(int ctx) const { return known_[static_cast<std::size_t>(ctx + 1)]; }

    int num_streams_;
    std::vector<ExecutedOp> ops_;
    std::size_t length_ = 0;
    std::vector<bool> done_;
    std::vector<int> vertex_stream_;
    std::vector<int> vertex_pos_;
    std::vector<int> stream_len_;
    // known_[0] is the CPU, known_[s + 1] is stream s.
    std::vector<std::vector<int>> known_;
    std::vector<Event> events_;
    std::vector<int> latest_event_;
};

/// DAG vertices not yet executed whose predecessors all are, in declaration order.
std::vector<std::size_t> frontier(const Prefix& prefix, const ProgramDag& dag);
std::vector<std::string> frontier_names(const Prefix& prefix, const ProgramDag& dag);

/// Sync ops required before `vertex` bound to `stream` (-1 for CPU-side vertices).
std::vector<ExecutedOp> insert_syncs(const Prefix& prefix, const ProgramDag& dag, std::size_t vertex,
                                     int stream = -1);

/// All legal one-vertex extensions, with stream-bijection duplicates removed.
std::vector<Prefix> expand_children(const Prefix& prefix, const ProgramDag& dag);

inline constexpr std::size_t kDefaultEnumerationCap = 100000;

/// Every distinct canonical schedule of the DAG, in depth-first order.
std::vector<Schedule> enumerate_schedules(const ProgramDag& dag, std::size_t cap = kDefaultEnumerationCap);

/// Branching statistics for one prefix visited during enumeration.
struct BranchRecord {
    std::size_t depth;
    std::string prefix;
    std::size_t children;
    std::size_t completions;
};

/// Same traversal as enumerate_schedules, reporting every internal prefix.
std::vector<BranchRecord> branching_trace(const ProgramDag& dag, std::size_t cap = kDefaultEnumerationCap);

/// A vertex choice with its stream binding (-1 for CPU-side vertices).
struct Binding {
    std::size_t vertex;
    int stream = -1;
};

/// Rebuilds a schedule from its vertex projection, re-deriving every sync op.
Schedule derive_schedule(const ProgramDag& dag, const std::vector<Binding>& bindings);

/// Vertex projection of a schedule.
std::vector<Binding> vertex_projection(const Schedule& schedule);

/// Empty when the schedule is a legal traversal with exactly the derived syncs.
std::vector<std::string> check_schedule(const ProgramDag& dag, const Schedule& schedule);

/// External line format: `<name> <kind> [stream=<i>] [event=<id>]` per op.
std::string to_external_format(const Schedule& schedule);
Schedule from_external_format(std::string_view text, const ProgramDag& dag);

/// Compact token list `name:Kind[:s<i>][:e<id>]` joined by ';'.
std::string serialize_ops(const std::vector<ExecutedOp>& ops);
std::vector<ExecutedOp> parse_ops(std::string_view text, const ProgramDag& dag);

} // namespace schedrule
