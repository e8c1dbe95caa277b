#include "schedrule/schedule.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_set>

namespace schedrule {

namespace {

constexpr std::pair<ExecKind, std::string_view> kExecNames[] = {
    {ExecKind::Cpu, "Cpu"},
    {ExecKind::PostSend, "PostSend"},
    {ExecKind::PostRecv, "PostRecv"},
    {ExecKind::WaitSend, "WaitSend"},
    {ExecKind::WaitRecv, "WaitRecv"},
    {ExecKind::BoundGpu, "BoundGpu"},
    {ExecKind::EventRecord, "EventRecord"},
    {ExecKind::EventSync, "EventSync"},
    {ExecKind::StreamWaitEvent, "StreamWaitEvent"},
};

void merge_into(std::vector<int>& dst, const std::vector<int>& src)
{
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = std::max(dst[i], src[i]);
    }
}

int parse_int(std::string_view text, std::string_view what)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ScheduleError("malformed " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        std::size_t end = text.find(sep, begin);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        parts.push_back(text.substr(begin, end - begin));
        begin = end + 1;
    }
    return parts;
}

int resolve_vertex(const ProgramDag& dag, const std::string& name, ExecKind kind)
{
    if (is_sync(kind)) {
        return -1;
    }
    auto v = dag.find(name);
    if (!v) {
        throw ScheduleError("operation '" + name + "' is not a vertex of the DAG");
    }
    return static_cast<int>(*v);
}

} // namespace

EnumerationTooLarge::EnumerationTooLarge(std::size_t cap)
    : ScheduleError("design space exceeds the enumeration cap of " + std::to_string(cap) + " schedules"), cap_(cap)
{
}

std::string_view to_string(ExecKind kind)
{
    for (const auto& [k, name] : kExecNames) {
        if (k == kind) {
            return name;
        }
    }
    return "?";
}

ExecKind exec_kind_from_string(std::string_view text)
{
    for (const auto& [k, name] : kExecNames) {
        if (name == text) {
            return k;
        }
    }
    throw ScheduleError("unknown operation kind '" + std::string(text) + "'");
}

ExecKind exec_kind_for(OpKind kind)
{
    switch (kind) {
    case OpKind::Cpu: return ExecKind::Cpu;
    case OpKind::Gpu: return ExecKind::BoundGpu;
    case OpKind::PostSend: return ExecKind::PostSend;
    case OpKind::PostRecv: return ExecKind::PostRecv;
    case OpKind::WaitSend: return ExecKind::WaitSend;
    case OpKind::WaitRecv: return ExecKind::WaitRecv;
    }
    return ExecKind::Cpu;
}

std::vector<ExecutedOp> canonical_stream_form(std::vector<ExecutedOp> ops)
{
    std::vector<int> relabel;
    int next = 0;
    for (auto& op : ops) {
        if (op.stream < 0) {
            continue;
        }
        auto s = static_cast<std::size_t>(op.stream);
        if (s >= relabel.size()) {
            relabel.resize(s + 1, -1);
        }
        if (relabel[s] < 0) {
            relabel[s] = next++;
        }
        op.stream = relabel[s];
    }
    return ops;
}

Schedule canonical_stream_form(const Schedule& schedule)
{
    return make_schedule(canonical_stream_form(schedule.ops));
}

std::string op_sequence_key(const std::vector<ExecutedOp>& ops)
{
    std::string key;
    for (const auto& op : ops) {
        if (!key.empty()) {
            key += ';';
        }
        key += op.name;
        if (op.stream >= 0) {
            key += '@';
            key += std::to_string(op.stream);
        }
        if (op.event >= 0) {
            key += '#';
            key += std::to_string(op.event);
        }
    }
    return key;
}

Schedule make_schedule(std::vector<ExecutedOp> ops)
{
    Schedule s;
    s.canonical_key = op_sequence_key(canonical_stream_form(ops));
    s.ops = std::move(ops);
    return s;
}

// ---------------------------------------------------------------------------
// Prefix

Prefix::Prefix(const ProgramDag& dag)
    : num_streams_(dag.num_streams()), done_(dag.size(), false), vertex_stream_(dag.size(), -1),
      vertex_pos_(dag.size(), 0), stream_len_(static_cast<std::size_t>(num_streams_), 0),
      known_(static_cast<std::size_t>(num_streams_) + 1, std::vector<int>(static_cast<std::size_t>(num_streams_), 0)),
      latest_event_(static_cast<std::size_t>(num_streams_), -1)
{
}

int Prefix::streams_used() const
{
    return static_cast<int>(std::count_if(stream_len_.begin(), stream_len_.end(), [](int n) { return n > 0; }));
}

void Prefix::check_legal(const ProgramDag& dag, std::size_t v, int stream) const
{
    if (v >= dag.size() || dag.size() != done_.size()) {
        throw PreconditionError("vertex index out of range for this prefix");
    }
    const Vertex& vx = dag.vertex(v);
    if (done_[v]) {
        throw PreconditionError("'" + vx.name + "' is not in the frontier: already executed");
    }
    for (std::size_t u : dag.preds(v)) {
        if (!done_[u]) {
            throw PreconditionError("'" + vx.name + "' is not in the frontier: predecessor '" + dag.vertex(u).name +
                                    "' has not executed");
        }
    }
    if (vx.kind == OpKind::Gpu) {
        if (stream < 0 || stream >= num_streams_) {
            throw PreconditionError("stream " + std::to_string(stream) + " out of range for '" + vx.name + "'");
        }
    } else if (stream != -1) {
        throw PreconditionError("CPU-side vertex '" + vx.name + "' cannot be bound to a stream");
    }
}

std::vector<ExecutedOp> Prefix::syncs_for(const ProgramDag& dag, std::size_t v, int stream) const
{
    check_legal(dag, v, stream);
    const Vertex& vx = dag.vertex(v);
    const int ctx = vx.kind == OpKind::Gpu ? stream : -1;

    // What the consuming context will know when `v` is issued. A kernel launch
    // is ordered after everything the CPU has already waited for.
    std::vector<int> working = knowledge(ctx);
    if (ctx >= 0) {
        merge_into(working, knowledge(-1));
    }

    struct Need {
        int stream;
        int position;
        std::size_t source;
    };
    std::vector<Need> needs;
    for (std::size_t u : dag.preds(v)) {
        int s = vertex_stream_[u];
        if (s < 0 || s == ctx) {
            continue;
        }
        int pos = vertex_pos_[u];
        if (working[static_cast<std::size_t>(s)] >= pos) {
            continue;
        }
        auto it = std::find_if(needs.begin(), needs.end(), [s](const Need& n) { return n.stream == s; });
        if (it == needs.end()) {
            needs.push_back({s, pos, u});
        } else if (pos > it->position) {
            it->position = pos;
            it->source = u;
        }
    }

    std::vector<ExecutedOp> records;
    std::vector<int> wait_events;
    int next_event = static_cast<int>(events_.size());
    for (const Need& need : needs) {
        auto s = static_cast<std::size_t>(need.stream);
        if (working[s] >= need.position) {
            continue; // covered by an event waited on earlier in this batch
        }
        std::vector<int> snapshot;
        int event = latest_event_[s];
        if (event >= 0 && events_[static_cast<std::size_t>(event)].snapshot[s] >= need.position) {
            snapshot = events_[static_cast<std::size_t>(event)].snapshot;
        } else {
            snapshot = knowledge(need.stream);
            snapshot[s] = stream_len_[s];
            event = next_event++;
            records.push_back({"CER-after-" + dag.vertex(need.source).name, ExecKind::EventRecord, need.stream, event, -1});
        }
        merge_into(working, snapshot);
        wait_events.push_back(event);
    }

    std::vector<ExecutedOp> out = std::move(records);
    const std::string base = ctx < 0 ? "CES-b4-" + vx.name : "CSWE-b4-" + vx.name;
    for (std::size_t k = 0; k < wait_events.size(); ++k) {
        std::string name = k == 0 ? base : base + "-" + std::to_string(k + 1);
        if (ctx < 0) {
            out.push_back({std::move(name), ExecKind::EventSync, -1, wait_events[k], -1});
        } else {
            out.push_back({std::move(name), ExecKind::StreamWaitEvent, ctx, wait_events[k], -1});
        }
    }
    return out;
}

void Prefix::append(const ProgramDag& dag, std::size_t v, int stream)
{
    auto syncs = syncs_for(dag, v, stream);
    for (auto& op : syncs) {
        switch (op.kind) {
        case ExecKind::EventRecord: {
            auto s = static_cast<std::size_t>(op.stream);
            std::vector<int> snapshot = knowledge(op.stream);
            snapshot[s] = stream_len_[s];
            events_.push_back({op.stream, std::move(snapshot)});
            latest_event_[s] = op.event;
            break;
        }
        case ExecKind::EventSync:
            merge_into(knowledge(-1), events_[static_cast<std::size_t>(op.event)].snapshot);
            break;
        case ExecKind::StreamWaitEvent:
            merge_into(knowledge(op.stream), events_[static_cast<std::size_t>(op.event)].snapshot);
            break;
        default: break;
        }
        ops_.push_back(std::move(op));
    }

    const Vertex& vx = dag.vertex(v);
    ExecutedOp op{vx.name, exec_kind_for(vx.kind), -1, -1, static_cast<int>(v)};
    if (vx.kind == OpKind::Gpu) {
        auto s = static_cast<std::size_t>(stream);
        merge_into(knowledge(stream), knowledge(-1));
        ++stream_len_[s];
        vertex_stream_[v] = stream;
        vertex_pos_[v] = stream_len_[s];
        op.stream = stream;
    }
    ops_.push_back(std::move(op));
    done_[v] = true;
    ++length_;
}

Schedule Prefix::to_schedule() const
{
    return make_schedule(ops_);
}

// ---------------------------------------------------------------------------
// Expansion and enumeration

std::vector<std::size_t> frontier(const Prefix& prefix, const ProgramDag& dag)
{
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < dag.size(); ++v) {
        if (prefix.executed(v)) {
            continue;
        }
        const auto& preds = dag.preds(v);
        if (std::all_of(preds.begin(), preds.end(), [&](std::size_t u) { return prefix.executed(u); })) {
            out.push_back(v);
        }
    }
    return out;
}

std::vector<std::string> frontier_names(const Prefix& prefix, const ProgramDag& dag)
{
    std::vector<std::string> out;
    for (std::size_t v : frontier(prefix, dag)) {
        out.push_back(dag.vertex(v).name);
    }
    return out;
}

std::vector<ExecutedOp> insert_syncs(const Prefix& prefix, const ProgramDag& dag, std::size_t vertex, int stream)
{
    return prefix.syncs_for(dag, vertex, stream);
}

std::vector<Prefix> expand_children(const Prefix& prefix, const ProgramDag& dag)
{
    std::vector<Prefix> children;
    std::unordered_set<std::string> seen;
    for (std::size_t v : frontier(prefix, dag)) {
        const bool gpu = dag.vertex(v).kind == OpKind::Gpu;
        const int choices = gpu ? dag.num_streams() : 1;
        for (int s = 0; s < choices; ++s) {
            Prefix child = prefix;
            child.append(dag, v, gpu ? s : -1);
            if (seen.insert(op_sequence_key(canonical_stream_form(child.ops()))).second) {
                children.push_back(std::move(child));
            }
        }
    }
    return children;
}

namespace {

std::string prefix_label(const Prefix& prefix)
{
    std::string out;
    for (const auto& op : prefix.ops()) {
        if (op.vertex < 0) {
            continue;
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += op.name;
        if (op.stream >= 0) {
            out += '@' + std::to_string(op.stream);
        }
    }
    return out.empty() ? "<empty>" : out;
}

std::size_t walk(const Prefix& prefix, const ProgramDag& dag, std::size_t cap, std::vector<Schedule>* leaves,
                 std::vector<BranchRecord>* trace, std::size_t& total)
{
    if (prefix.complete()) {
        if (++total > cap) {
            throw EnumerationTooLarge(cap);
        }
        if (leaves) {
            leaves->push_back(prefix.to_schedule());
        }
        return 1;
    }
    auto children = expand_children(prefix, dag);
    std::size_t slot = 0;
    if (trace) {
        slot = trace->size();
        trace->push_back({prefix.length(), prefix_label(prefix), children.size(), 0});
    }
    std::size_t completions = 0;
    for (const auto& child : children) {
        completions += walk(child, dag, cap, leaves, trace, total);
    }
    if (trace) {
        (*trace)[slot].completions = completions;
    }
    return completions;
}

} // namespace

std::vector<Schedule> enumerate_schedules(const ProgramDag& dag, std::size_t cap)
{
    std::vector<Schedule> out;
    std::size_t total = 0;
    walk(Prefix(dag), dag, cap, &out, nullptr, total);
    return out;
}

std::vector<BranchRecord> branching_trace(const ProgramDag& dag, std::size_t cap)
{
    std::vector<BranchRecord> trace;
    std::size_t total = 0;
    walk(Prefix(dag), dag, cap, nullptr, &trace, total);
    return trace;
}

Schedule derive_schedule(const ProgramDag& dag, const std::vector<Binding>& bindings)
{
    Prefix p(dag);
    for (const auto& b : bindings) {
        p.append(dag, b.vertex, b.stream);
    }
    return p.to_schedule();
}

std::vector<Binding> vertex_projection(const Schedule& schedule)
{
    std::vector<Binding> out;
    for (const auto& op : schedule.ops) {
        if (op.vertex >= 0) {
            out.push_back({static_cast<std::size_t>(op.vertex), op.kind == ExecKind::BoundGpu ? op.stream : -1});
        }
    }
    return out;
}

std::vector<std::string> check_schedule(const ProgramDag& dag, const Schedule& schedule)
{
    std::vector<std::string> problems;
    std::vector<int> seen(dag.size(), 0);
    for (const auto& op : schedule.ops) {
        if (is_sync(op.kind)) {
            continue;
        }
        if (op.vertex < 0 || static_cast<std::size_t>(op.vertex) >= dag.size()) {
            problems.push_back("operation '" + op.name + "' has no DAG vertex");
            continue;
        }
        const Vertex& vx = dag.vertex(static_cast<std::size_t>(op.vertex));
        if (vx.name != op.name || exec_kind_for(vx.kind) != op.kind) {
            problems.push_back("operation '" + op.name + "' does not match vertex '" + vx.name + "'");
        }
        ++seen[static_cast<std::size_t>(op.vertex)];
    }
    for (std::size_t v = 0; v < dag.size(); ++v) {
        if (seen[v] != 1) {
            problems.push_back("vertex '" + dag.vertex(v).name + "' appears " + std::to_string(seen[v]) + " times");
        }
    }
    if (!problems.empty()) {
        return problems;
    }
    try {
        Schedule derived = derive_schedule(dag, vertex_projection(schedule));
        if (derived.ops != schedule.ops) {
            problems.push_back("sync operations differ from the ones derived from the vertex order");
        }
        if (derived.canonical_key != schedule.canonical_key) {
            problems.push_back("canonical key is stale");
        }
    } catch (const PreconditionError& e) {
        problems.push_back(std::string("not a topological traversal: ") + e.what());
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Serialization

std::string to_external_format(const Schedule& schedule)
{
    std::string out;
    for (const auto& op : schedule.ops) {
        out += op.name;
        out += ' ';
        out += to_string(op.kind);
        if (op.stream >= 0) {
            out += " stream=" + std::to_string(op.stream);
        }
        if (op.event >= 0) {
            out += " event=" + std::to_string(op.event);
        }
        out += '\n';
    }
    return out;
}

Schedule from_external_format(std::string_view text, const ProgramDag& dag)
{
    std::vector<ExecutedOp> ops;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string name, kind, extra;
        if (!(fields >> name)) {
            continue;
        }
        if (!(fields >> kind)) {
            throw ScheduleError("schedule line '" + line + "' has no kind");
        }
        ExecutedOp op{name, exec_kind_from_string(kind)};
        while (fields >> extra) {
            if (extra.rfind("stream=", 0) == 0) {
                op.stream = parse_int(std::string_view(extra).substr(7), "stream");
            } else if (extra.rfind("event=", 0) == 0) {
                op.event = parse_int(std::string_view(extra).substr(6), "event");
            } else {
                throw ScheduleError("unexpected field '" + extra + "' in schedule line");
            }
        }
        op.vertex = resolve_vertex(dag, op.name, op.kind);
        ops.push_back(std::move(op));
    }
    return make_schedule(std::move(ops));
}

std::string serialize_ops(const std::vector<ExecutedOp>& ops)
{
    std::string out;
    for (const auto& op : ops) {
        if (!out.empty()) {
            out += ';';
        }
        out += op.name;
        out += ':';
        out += to_string(op.kind);
        if (op.stream >= 0) {
            out += ":s" + std::to_string(op.stream);
        }
        if (op.event >= 0) {
            out += ":e" + std::to_string(op.event);
        }
    }
    return out;
}

std::vector<ExecutedOp> parse_ops(std::string_view text, const ProgramDag& dag)
{
    std::vector<ExecutedOp> ops;
    if (text.empty()) {
        return ops;
    }
    for (auto token : split(text, ';')) {
        auto fields = split(token, ':');
        if (fields.size() < 2) {
            throw ScheduleError("malformed operation token '" + std::string(token) + "'");
        }
        ExecutedOp op{std::string(fields[0]), exec_kind_from_string(fields[1])};
        for (std::size_t i = 2; i < fields.size(); ++i) {
            auto f = fields[i];
            if (f.size() > 1 && f[0] == 's') {
                op.stream = parse_int(f.substr(1), "stream");
            } else if (f.size() > 1 && f[0] == 'e') {
                op.event = parse_int(f.substr(1), "event");
            } else {
                throw ScheduleError("malformed operation field '" + std::string(f) + "'");
            }
        }
        op.vertex = resolve_vertex(dag, op.name, op.kind);
        ops.push_back(std::move(op));
    }
    return ops;
}

} // namespace schedrule
