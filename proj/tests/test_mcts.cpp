#include "schedrule/mcts.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace schedrule;
using namespace testing_support;

namespace {

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

CostModel spmv_model(const ProgramDag& dag)
{
    std::mt19937_64 rng(8);
    return random_model(dag, rng);
}

} // namespace

TEST(ExploreValue, ClosedForm)
{
    EXPECT_NEAR(explore_value(2, 1, false), 1.17741, 1e-5);
    EXPECT_EQ(explore_value(1, 1, false), 0.0);
    EXPECT_EQ(explore_value(5, 2, true), -std::numeric_limits<double>::infinity());
    EXPECT_DOUBLE_EQ(explore_value(10, 4, false), std::sqrt(2.0) * std::sqrt(std::log(10.0) / 4.0));
}

TEST(ExploitValue, RangeRatioAndFallbacks)
{
    ProgramDag dag = chain_dag();
    SearchNode parent{Prefix(dag), std::nullopt, -1, {}};
    SearchNode child{Prefix(dag), std::nullopt, 0, {}};
    parent.n = 4;
    parent.t_min = 1.0;
    parent.t_max = 5.0;
    child.n = 2;
    child.t_min = 2.0;
    child.t_max = 4.0;
    EXPECT_DOUBLE_EQ(exploit_value(child, parent), 0.5);
    child.n = 1;
    EXPECT_DOUBLE_EQ(exploit_value(child, parent), 1.0);
    child.n = 2;
    parent.t_max = parent.t_min;
    EXPECT_DOUBLE_EQ(exploit_value(child, parent), 1.0);
}

TEST(Select, FreshRootStopsAtRoot)
{
    ProgramDag dag = diamond_dag();
    SearchTree tree(dag);
    EXPECT_EQ(select(tree), std::vector<int>{0});
}

TEST(Select, AvoidsFullyExploredChildAndBreaksTiesByIndex)
{
    ProgramDag dag = diamond_dag();
    SearchTree tree(dag);
    tree.materialize(0, dag);
    int start = tree.node(0).children.at(0);
    tree.materialize(start, dag);
    auto kids = tree.node(start).children;
    ASSERT_EQ(kids.size(), 2u);
    for (int id : {0, start, kids[0], kids[1]}) {
        tree.node(id).n = 2;
        tree.node(id).t_min = 1.0;
        tree.node(id).t_max = 1.0;
    }
    tree.node(0).n = 4;
    tree.node(start).n = 4;
    // Equal values: first child wins.
    EXPECT_EQ(select(tree), (std::vector<int>{0, start, kids[0]}));
    tree.node(kids[0]).fully_explored = true;
    EXPECT_EQ(select(tree), (std::vector<int>{0, start, kids[1]}));
}

TEST(Select, ThrowsWhenComplete)
{
    ProgramDag dag = chain_dag();
    SearchTree tree(dag);
    tree.node(0).fully_explored = true;
    EXPECT_THROW(select(tree), SearchComplete);
}

TEST(Expand, MaterializesAndPicksFreshChildren)
{
    ProgramDag dag = diamond_dag();
    SearchTree tree(dag);
    std::mt19937_64 rng(1);
    int start = expand(tree, 0, dag, rng);
    tree.node(start).n = 1;
    std::set<int> seen;
    for (int i = 0; i < 2; ++i) {
        int c = expand(tree, start, dag, rng);
        EXPECT_EQ(tree.node(start).children.size(), 2u);
        EXPECT_TRUE(seen.insert(c).second);
        tree.node(c).n = 1;
    }
}

TEST(Expand, FirstGpuVertexOneChild)
{
    ProgramDag dag = make_dag({{"start", OpKind::Cpu, "", ""}, {"k", OpKind::Gpu, "", ""}, {"end", OpKind::Cpu, "", ""}},
                              {{"start", "k"}, {"k", "end"}}, 2);
    SearchTree tree(dag);
    std::mt19937_64 rng(1);
    int start = expand(tree, 0, dag, rng);
    expand(tree, start, dag, rng);
    EXPECT_EQ(tree.node(start).children.size(), 1u);
}

TEST(Rollout, ChainHasUniqueCompletion)
{
    ProgramDag dag = chain_dag();
    SearchTree tree(dag);
    FixedExecutor ex(0.5);
    std::mt19937_64 rng(3);
    Dataset d;
    auto r = rollout(tree, 0, dag, ex, {1.0, 10}, rng, d);
    EXPECT_EQ(r.schedule, enumerate_schedules(dag).at(0));
    EXPECT_EQ(r.path.size(), 4u);
    EXPECT_EQ(d.size(), 1u);
    EXPECT_EQ(r.measurement.n_samples, 2u);
}

TEST(Rollout, CompletePrefixMeasuredAsIs)
{
    ProgramDag dag = chain_dag();
    SearchTree tree(dag);
    FixedExecutor ex(0.5);
    std::mt19937_64 rng(3);
    Dataset d;
    int id = 0;
    while (!tree.node(id).terminal()) {
        tree.materialize(id, dag);
        id = tree.node(id).children.at(0);
    }
    auto r = rollout(tree, id, dag, ex, {}, rng, d);
    EXPECT_EQ(r.path, std::vector<int>{id});
    EXPECT_EQ(d.size(), 1u);
}

TEST(Backpropagate, UpdatesRangesAndCounts)
{
    ProgramDag dag = chain_dag();
    SearchTree tree(dag);
    FixedExecutor ex(0.5);
    std::mt19937_64 rng(3);
    Dataset d;
    auto r = rollout(tree, 0, dag, ex, {}, rng, d);
    backpropagate(tree, r.path, 1.0);
    for (int id : r.path) {
        EXPECT_EQ(tree.node(id).n, 1u);
        EXPECT_EQ(tree.node(id).t_min, 1.0);
        EXPECT_EQ(tree.node(id).t_max, 1.0);
    }
    // The only schedule is benchmarked, so everything is explored.
    EXPECT_TRUE(tree.node(0).fully_explored);

    SearchTree again(dag);
    auto r2 = rollout(again, 0, dag, ex, {}, rng, d);
    auto path = r2.path;
    path.pop_back();
    backpropagate(again, path, 1.0);
    backpropagate(again, path, 2.0);
    EXPECT_EQ(again.node(0).n, 2u);
    EXPECT_EQ(again.node(0).t_min, 1.0);
    EXPECT_EQ(again.node(0).t_max, 2.0);
}

TEST(RunSearch, SingleScheduleDagStopsEarly)
{
    ProgramDag dag = chain_dag();
    FixedExecutor ex(0.5);
    auto result = run_search(dag, ex, 10, 1);
    EXPECT_EQ(result.iterations_run, 1u);
    EXPECT_EQ(result.dataset.size(), 1u);
    EXPECT_TRUE(result.tree.node(0).fully_explored);
}

TEST(RunSearch, DiamondCoverage)
{
    ProgramDag dag = diamond_dag();
    FixedExecutor ex(0.5);
    auto result = run_search(dag, ex, 100, 5);
    EXPECT_EQ(keys_of(result.dataset), keys_of(enumerate_schedules(dag)));
    EXPECT_TRUE(result.tree.node(0).fully_explored);
}

TEST(RunSearch, EveryIterationMeasuresANewSchedule)
{
    ProgramDag dag = load_dag(data_file("spmv.json"));
    SimulatorExecutor ex(dag, spmv_model(dag));
    auto result = run_search(dag, ex, 50, 42);
    EXPECT_EQ(result.iterations_run, 50u);
    EXPECT_EQ(result.dataset.size(), 50u);
    for (const auto& rec : result.dataset) {
        EXPECT_TRUE(check_schedule(dag, rec.schedule).empty());
    }
}

TEST(RunSearch, SeedDeterminism)
{
    ProgramDag dag = load_dag(data_file("spmv.json"));
    CostModel model = spmv_model(dag);
    model.noise_rel_sigma = 0.05;
    SimulatorExecutor a(dag, model), b(dag, model);
    auto r1 = run_search(dag, a, 80, 7);
    auto r2 = run_search(dag, b, 80, 7);
    EXPECT_EQ(r1.dataset, r2.dataset);
    EXPECT_EQ(r1.tree.size(), r2.tree.size());
}

TEST(RunSearch, ChildRangesNestInParents)
{
    ProgramDag dag = load_dag(data_file("spmv.json"));
    CostModel model = spmv_model(dag);
    model.noise_rel_sigma = 0.1;
    SimulatorExecutor ex(dag, model);
    auto result = run_search(dag, ex, 300, 9);
    const SearchTree& tree = result.tree;
    for (std::size_t id = 0; id < tree.size(); ++id) {
        const SearchNode& n = tree.node(static_cast<int>(id));
        if (n.n == 0) {
            continue;
        }
        EXPECT_LE(n.t_min, n.t_max);
        std::size_t child_sum = 0;
        for (int c : n.children) {
            const SearchNode& ch = tree.node(c);
            child_sum += ch.n;
            if (ch.n == 0) {
                continue;
            }
            EXPECT_LE(n.t_min, ch.t_min);
            EXPECT_LE(ch.t_max, n.t_max);
            double v = exploit_value(ch, n);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        if (!n.terminal() && n.expanded) {
            EXPECT_EQ(child_sum, n.n);
        }
    }
}

TEST(RunSearch, RetriesFailedRolloutOnce)
{
    class Flaky : public Executor {
    public:
        double execute(const Schedule&) override
        {
            if (++calls == 1) {
                throw std::runtime_error("transient");
            }
            return 1.0;
        }
        int calls = 0;
    } flaky;
    auto result = run_search(diamond_dag(), flaky, 5, 1);
    EXPECT_EQ(result.dataset.size(), 2u);

    class Dead : public Executor {
    public:
        double execute(const Schedule&) override { throw std::runtime_error("gone"); }
    } dead;
    EXPECT_THROW(run_search(diamond_dag(), dead, 5, 1), ExecutorError);
}
