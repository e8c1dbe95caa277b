#pragma once

#include "schedrule/schedule.hpp"
#include "schedrule/simulator.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace testing_support {

using namespace schedrule;

inline std::string data_file(const std::string& name)
{
    return std::string(SCHEDRULE_DATA_DIR) + "/" + name;
}

inline ProgramDag make_dag(std::vector<Vertex> vertices, const std::vector<NamedEdge>& edges, int streams)
{
    return ProgramDag(std::move(vertices), edges, streams);
}

inline ProgramDag diamond_dag()
{
    return make_dag({{"start", OpKind::Cpu, "", ""},
                     {"A", OpKind::Cpu, "", ""},
                     {"B", OpKind::Cpu, "", ""},
                     {"end", OpKind::Cpu, "", ""}},
                    {{"start", "A"}, {"start", "B"}, {"A", "end"}, {"B", "end"}}, 1);
}

inline ProgramDag chain_dag()
{
    return make_dag({{"start", OpKind::Cpu, "", ""}, {"A", OpKind::Cpu, "", ""}, {"end", OpKind::Cpu, "", ""}},
                    {{"start", "A"}, {"A", "end"}}, 1);
}

/// Random valid DAG: start, up to `max_inner` interior vertices, end. Interior
/// kinds mix Cpu, Gpu and optionally one PostSend/WaitSend pair.
inline ProgramDag random_dag(std::mt19937_64& rng, std::size_t max_inner, int streams)
{
    std::uniform_int_distribution<std::size_t> count(1, max_inner);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution sparse(0.3);
    const std::size_t inner = count(rng);

    std::vector<Vertex> vs{{"start", OpKind::Cpu, "", ""}};
    std::vector<NamedEdge> edges;
    bool comm = inner >= 2 && coin(rng);
    std::size_t plain = comm ? inner - 2 : inner;
    for (std::size_t i = 0; i < plain; ++i) {
        OpKind k = coin(rng) ? OpKind::Gpu : OpKind::Cpu;
        vs.push_back({(k == OpKind::Gpu ? "g" : "c") + std::to_string(i), k, "", ""});
    }
    if (comm) {
        vs.push_back({"PostSend", OpKind::PostSend, "", ""});
        vs.push_back({"WaitSend", OpKind::WaitSend, "", "PostSend"});
    }
    // Forward edges between interior vertices keep the graph acyclic.
    for (std::size_t i = 1; i < vs.size(); ++i) {
        for (std::size_t j = i + 1; j < vs.size(); ++j) {
            if (sparse(rng)) {
                edges.emplace_back(vs[i].name, vs[j].name);
            }
        }
    }
    if (comm) {
        edges.emplace_back("PostSend", "WaitSend");
    }
    std::set<std::string> has_pred, has_succ;
    for (const auto& [u, v] : edges) {
        has_succ.insert(u);
        has_pred.insert(v);
    }
    for (std::size_t i = 1; i < vs.size(); ++i) {
        if (!has_pred.count(vs[i].name)) {
            edges.emplace_back("start", vs[i].name);
        }
        if (!has_succ.count(vs[i].name)) {
            edges.emplace_back(vs[i].name, "end");
        }
    }
    vs.push_back({"end", OpKind::Cpu, "", ""});
    return ProgramDag(std::move(vs), edges, streams);
}

/// Independent reference: every topological order times every stream
/// assignment of the Gpu vertices, deduplicated by canonical key.
inline std::set<std::string> naive_schedule_keys(const ProgramDag& dag)
{
    const std::size_t n = dag.size();
    std::vector<std::size_t> gpu;
    for (std::size_t v = 0; v < n; ++v) {
        if (dag.vertex(v).kind == OpKind::Gpu) {
            gpu.push_back(v);
        }
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) {
        perm[i] = i;
    }
    std::size_t assignments = 1;
    for (std::size_t i = 0; i < gpu.size(); ++i) {
        assignments *= static_cast<std::size_t>(dag.num_streams());
    }

    std::set<std::string> keys;
    do {
        std::vector<std::size_t> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            pos[perm[i]] = i;
        }
        bool topo = true;
        for (const auto& [u, v] : dag.edges()) {
            if (pos[dag.index_of(u)] > pos[dag.index_of(v)]) {
                topo = false;
                break;
            }
        }
        if (!topo) {
            continue;
        }
        for (std::size_t a = 0; a < assignments; ++a) {
            std::vector<int> stream(n, -1);
            std::size_t rest = a;
            for (std::size_t g : gpu) {
                stream[g] = static_cast<int>(rest % static_cast<std::size_t>(dag.num_streams()));
                rest /= static_cast<std::size_t>(dag.num_streams());
            }
            std::vector<Binding> bindings;
            for (std::size_t v : perm) {
                bindings.push_back({v, stream[v]});
            }
            keys.insert(derive_schedule(dag, bindings).canonical_key);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return keys;
}

/// Uniformly random complete schedule built through legal extensions.
inline Schedule random_schedule(const ProgramDag& dag, std::mt19937_64& rng)
{
    Prefix p(dag);
    while (!p.complete()) {
        auto children = expand_children(p, dag);
        std::uniform_int_distribution<std::size_t> pick(0, children.size() - 1);
        p = children[pick(rng)];
    }
    return p.to_schedule();
}

/// Cost model with a random duration for every vertex of `dag`.
inline CostModel random_model(const ProgramDag& dag, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> d(0.0, 1.0);
    CostModel m;
    for (const auto& v : dag.vertices()) {
        m.durations[v.cost_key] = d(rng);
    }
    m.gpu_launch_overhead = 0.05 * d(rng);
    m.comm_latency = d(rng);
    return m;
}

class FixedExecutor : public Executor {
public:
    explicit FixedExecutor(double t) : t_(t) {}
    double execute(const Schedule&) override
    {
        ++calls;
        return t_;
    }
    int calls = 0;

private:
    double t_;
};

} // namespace testing_support
