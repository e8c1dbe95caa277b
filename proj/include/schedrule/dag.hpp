#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace schedrule {

class DagError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Kind of a program vertex. Communication kinds run on the CPU timeline.
enum class OpKind { Cpu, Gpu, PostSend, PostRecv, WaitSend, WaitRecv };

std::string_view to_string(OpKind kind);
OpKind op_kind_from_string(std::string_view text);

/// True for every kind that executes synchronously on the CPU control thread.
constexpr bool is_cpu_like(OpKind kind) { return kind != OpKind::Gpu; }
constexpr bool is_post(OpKind kind) { return kind == OpKind::PostSend || kind == OpKind::PostRecv; }
constexpr bool is_wait(OpKind kind) { return kind == OpKind::WaitSend || kind == OpKind::WaitRecv; }

struct Vertex {
    std::string name;
    OpKind kind = OpKind::Cpu;
    std::string cost_key;
    // Name of the Post vertex a Wait completes. Empty means "infer from ancestors".
    std::string matches;
};

using NamedEdge = std::pair<std::string, std::string>;

/// Immutable dependency graph of a program. An edge (u, v) means v depends on u.
///
/// Construction only rejects malformed input (duplicate or unknown names,
/// non-positive stream count). Structural invariants such as acyclicity are
/// reported by validate_dag so that broken graphs can still be inspected.
class ProgramDag {
public:
    ProgramDag(std::vector<Vertex> vertices, const std::vector<NamedEdge>& edges, int num_streams);

    std::size_t size() const { return vertices_.size(); }
    const Vertex& vertex(std::size_t v) const { return vertices_.at(v); }
    const std::vector<Vertex>& vertices() const { return vertices_; }
    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    // Predecessor and successor lists are sorted by declaration index.
    const std::vector<std::size_t>& preds(std::size_t v) const { return preds_.at(v); }
    const std::vector<std::size_t>& succs(std::size_t v) const { return succs_.at(v); }
    bool has_edge(std::size_t u, std::size_t v) const;
    std::vector<NamedEdge> edges() const;

    int num_streams() const { return num_streams_; }
    ProgramDag with_streams(int num_streams) const;

    std::optional<std::size_t> start() const { return find("start"); }
    std::optional<std::size_t> end() const { return find("end"); }

    /// Post vertex completed by a Wait vertex, if it can be resolved.
    std::optional<std::size_t> matching_post(std::size_t wait) const { return matching_post_.at(wait); }

    /// Number of Gpu vertices.
    std::size_t gpu_count() const;

private:
    void resolve_matches();

    std::vector<Vertex> vertices_;
    std::vector<std::vector<std::size_t>> preds_;
    std::vector<std::vector<std::size_t>> succs_;
    std::vector<std::optional<std::size_t>> matching_post_;
    int num_streams_;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_dag(const ProgramDag& dag);

/// Throws DagError listing every violation when the graph is invalid.
void require_valid(const ProgramDag& dag);

/// True when `name` is usable as an operation name in serialized schedules.
bool is_valid_op_name(std::string_view name);

/// True when `ancestor` reaches `v` through one or more edges.
bool reaches(const ProgramDag& dag, std::size_t ancestor, std::size_t v);

ProgramDag parse_dag_json(std::string_view text);
ProgramDag load_dag(const std::string& path);
std::string dag_to_json(const ProgramDag& dag);

} // namespace schedrule
