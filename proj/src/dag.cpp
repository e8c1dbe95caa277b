#include "schedrule/dag.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace schedrule {

namespace {

constexpr std::pair<OpKind, std::string_view> kKindNames[] = {
    {OpKind::Cpu, "Cpu"},           {OpKind::Gpu, "Gpu"},
    {OpKind::PostSend, "PostSend"}, {OpKind::PostRecv, "PostRecv"},
    {OpKind::WaitSend, "WaitSend"}, {OpKind::WaitRecv, "WaitRecv"},
};

std::vector<bool> reachable_from(const std::vector<std::vector<std::size_t>>& adj, std::size_t source)
{
    std::vector<bool> seen(adj.size(), false);
    std::queue<std::size_t> work;
    seen[source] = true;
    work.push(source);
    while (!work.empty()) {
        std::size_t u = work.front();
        work.pop();
        for (std::size_t v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                work.push(v);
            }
        }
    }
    return seen;
}

} // namespace

std::string_view to_string(OpKind kind)
{
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) {
            return name;
        }
    }
    return "?";
}

OpKind op_kind_from_string(std::string_view text)
{
    for (const auto& [k, name] : kKindNames) {
        if (name == text) {
            return k;
        }
    }
    throw DagError("unknown vertex kind '" + std::string(text) + "'");
}

bool is_valid_op_name(std::string_view name)
{
    if (name.empty()) {
        return false;
    }
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
               c == '-' || c == '.';
    });
}

ProgramDag::ProgramDag(std::vector<Vertex> vertices, const std::vector<NamedEdge>& edges, int num_streams)
    : vertices_(std::move(vertices)), preds_(vertices_.size()), succs_(vertices_.size()),
      matching_post_(vertices_.size()), num_streams_(num_streams)
{
    if (num_streams_ < 1) {
        throw DagError("num_streams must be positive, got " + std::to_string(num_streams_));
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        Vertex& vx = vertices_[i];
        if (!is_valid_op_name(vx.name)) {
            throw DagError("invalid vertex name '" + vx.name + "' (allowed: letters, digits, '_', '-', '.')");
        }
        if (!index.emplace(vx.name, i).second) {
            throw DagError("duplicate vertex name '" + vx.name + "'");
        }
        if (vx.cost_key.empty()) {
            vx.cost_key = vx.name;
        }
    }
    for (const auto& [from, to] : edges) {
        auto u = index.find(from);
        auto v = index.find(to);
        if (u == index.end() || v == index.end()) {
            throw DagError("edge " + from + " -> " + to + " references an unknown vertex");
        }
        auto& out = succs_[u->second];
        if (std::find(out.begin(), out.end(), v->second) == out.end()) {
            out.push_back(v->second);
            preds_[v->second].push_back(u->second);
        }
    }
    for (auto& list : preds_) {
        std::sort(list.begin(), list.end());
    }
    for (auto& list : succs_) {
        std::sort(list.begin(), list.end());
    }
    resolve_matches();
}

void ProgramDag::resolve_matches()
{
    for (std::size_t w = 0; w < vertices_.size(); ++w) {
        const Vertex& vx = vertices_[w];
        if (!is_wait(vx.kind)) {
            continue;
        }
        OpKind post_kind = vx.kind == OpKind::WaitSend ? OpKind::PostSend : OpKind::PostRecv;
        if (!vx.matches.empty()) {
            auto p = find(vx.matches);
            if (p && vertices_[*p].kind == post_kind) {
                matching_post_[w] = p;
            }
            continue;
        }
        // Infer: a unique direct predecessor of the right kind, else a unique ancestor.
        std::vector<std::size_t> direct;
        for (std::size_t p : preds_[w]) {
            if (vertices_[p].kind == post_kind) {
                direct.push_back(p);
            }
        }
        if (direct.size() == 1) {
            matching_post_[w] = direct.front();
            continue;
        }
        std::vector<std::size_t> ancestors;
        for (std::size_t p = 0; p < vertices_.size(); ++p) {
            if (vertices_[p].kind == post_kind && reaches(*this, p, w)) {
                ancestors.push_back(p);
            }
        }
        if (ancestors.size() == 1) {
            matching_post_[w] = ancestors.front();
        }
    }
}

std::optional<std::size_t> ProgramDag::find(std::string_view name) const
{
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        if (vertices_[i].name == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t ProgramDag::index_of(std::string_view name) const
{
    auto v = find(name);
    if (!v) {
        throw DagError("unknown vertex '" + std::string(name) + "'");
    }
    return *v;
}

bool ProgramDag::has_edge(std::size_t u, std::size_t v) const
{
    const auto& out = succs_.at(u);
    return std::binary_search(out.begin(), out.end(), v);
}

std::vector<NamedEdge> ProgramDag::edges() const
{
    std::vector<NamedEdge> out;
    for (std::size_t u = 0; u < size(); ++u) {
        for (std::size_t v : succs_[u]) {
            out.emplace_back(vertices_[u].name, vertices_[v].name);
        }
    }
    return out;
}

ProgramDag ProgramDag::with_streams(int num_streams) const
{
    return ProgramDag(vertices_, edges(), num_streams);
}

std::size_t ProgramDag::gpu_count() const
{
    return static_cast<std::size_t>(
        std::count_if(vertices_.begin(), vertices_.end(), [](const Vertex& v) { return v.kind == OpKind::Gpu; }));
}

bool reaches(const ProgramDag& dag, std::size_t ancestor, std::size_t v)
{
    std::vector<std::vector<std::size_t>> adj(dag.size());
    for (std::size_t u = 0; u < dag.size(); ++u) {
        adj[u] = dag.succs(u);
    }
    std::vector<bool> seen(dag.size(), false);
    std::queue<std::size_t> work;
    for (std::size_t s : adj[ancestor]) {
        if (!seen[s]) {
            seen[s] = true;
            work.push(s);
        }
    }
    while (!work.empty()) {
        std::size_t u = work.front();
        work.pop();
        if (u == v) {
            return true;
        }
        for (std::size_t s : adj[u]) {
            if (!seen[s]) {
                seen[s] = true;
                work.push(s);
            }
        }
    }
    return false;
}

ValidationReport validate_dag(const ProgramDag& dag)
{
    ValidationReport report;
    auto& out = report.violations;
    const std::size_t n = dag.size();

    // Kahn's algorithm; leftover vertices sit on or behind a cycle.
    std::vector<std::size_t> indegree(n);
    for (std::size_t v = 0; v < n; ++v) {
        indegree[v] = dag.preds(v).size();
    }
    std::queue<std::size_t> ready;
    for (std::size_t v = 0; v < n; ++v) {
        if (indegree[v] == 0) {
            ready.push(v);
        }
    }
    std::size_t ordered = 0;
    while (!ready.empty()) {
        std::size_t u = ready.front();
        ready.pop();
        ++ordered;
        for (std::size_t v : dag.succs(u)) {
            if (--indegree[v] == 0) {
                ready.push(v);
            }
        }
    }
    if (ordered != n) {
        std::string names;
        for (std::size_t v = 0; v < n; ++v) {
            if (indegree[v] > 0) {
                names += (names.empty() ? "" : ", ") + dag.vertex(v).name;
            }
        }
        out.push_back("cycle: graph is not acyclic (unsorted vertices: " + names + ")");
    }

    auto start = dag.start();
    auto end = dag.end();
    if (!start) {
        out.push_back("missing 'start' vertex");
    }
    if (!end) {
        out.push_back("missing 'end' vertex");
    }
    if (start && end) {
        std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
        for (std::size_t v = 0; v < n; ++v) {
            fwd[v] = dag.succs(v);
            bwd[v] = dag.preds(v);
        }
        auto from_start = reachable_from(fwd, *start);
        auto to_end = reachable_from(bwd, *end);
        for (std::size_t v = 0; v < n; ++v) {
            if (!from_start[v]) {
                out.push_back("reachability: '" + dag.vertex(v).name + "' is not reachable from start");
            }
            if (!to_end[v]) {
                out.push_back("reachability: '" + dag.vertex(v).name + "' has no path to end");
            }
        }
        if (dag.vertex(*start).kind == OpKind::Gpu || dag.vertex(*end).kind == OpKind::Gpu) {
            out.push_back("start and end must be CPU-side vertices");
        }
    }

    for (std::size_t w = 0; w < n; ++w) {
        const Vertex& vx = dag.vertex(w);
        if (!is_wait(vx.kind)) {
            continue;
        }
        auto post = dag.matching_post(w);
        if (!post) {
            out.push_back("communication: cannot resolve the matching post for '" + vx.name + "'");
        } else if (!reaches(dag, *post, w)) {
            out.push_back("communication: '" + vx.name + "' is not a descendant of its post '" +
                          dag.vertex(*post).name + "'");
        }
    }
    return report;
}

void require_valid(const ProgramDag& dag)
{
    auto report = validate_dag(dag);
    if (!report.ok()) {
        std::string msg = "invalid program DAG:";
        for (const auto& v : report.violations) {
            msg += "\n  " + v;
        }
        throw DagError(msg);
    }
}

ProgramDag parse_dag_json(std::string_view text)
{
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DagError(std::string("malformed DAG document: ") + e.what());
    }
    try {
        std::vector<Vertex> vertices;
        for (const auto& jv : doc.at("vertices")) {
            Vertex vx;
            vx.name = jv.at("name").get<std::string>();
            vx.kind = op_kind_from_string(jv.at("kind").get<std::string>());
            vx.cost_key = jv.value("cost", std::string{});
            vx.matches = jv.value("matches", std::string{});
            vertices.push_back(std::move(vx));
        }
        std::vector<NamedEdge> edges;
        for (const auto& je : doc.at("edges")) {
            if (!je.is_array() || je.size() != 2) {
                throw DagError("each edge must be a [from, to] pair");
            }
            edges.emplace_back(je[0].get<std::string>(), je[1].get<std::string>());
        }
        int streams = doc.value("num_streams", 1);
        return ProgramDag(std::move(vertices), edges, streams);
    } catch (const json::exception& e) {
        throw DagError(std::string("malformed DAG document: ") + e.what());
    }
}

ProgramDag load_dag(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DagError("cannot open DAG file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_dag_json(buf.str());
}

std::string dag_to_json(const ProgramDag& dag)
{
    nlohmann::json doc;
    doc["num_streams"] = dag.num_streams();
    auto& verts = doc["vertices"] = nlohmann::json::array();
    for (const auto& vx : dag.vertices()) {
        nlohmann::json jv = {{"name", vx.name}, {"kind", std::string(to_string(vx.kind))}, {"cost", vx.cost_key}};
        if (!vx.matches.empty()) {
            jv["matches"] = vx.matches;
        }
        verts.push_back(std::move(jv));
    }
    auto& edges = doc["edges"] = nlohmann::json::array();
    for (const auto& [u, v] : dag.edges()) {
        edges.push_back({u, v});
    }
    return doc.dump(2);
}

} // namespace schedrule
