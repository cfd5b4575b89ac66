#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "hdsopt/fdt.hpp"
#include "hdsopt/gp.hpp"
#include "hdsopt/hds.hpp"
#include "hdsopt/rng.hpp"
#include "hdsopt/stats.hpp"

using namespace hdsopt;

namespace {

Oracle zero_oracle(int dim, std::uint64_t seed, double noise_var = 0.1) {
    return Oracle(
        dim, [](const Eigen::VectorXd&) { return 0.0; }, noise_var, Rng(seed).child("noise"));
}

HdsConfig stub_config(long budget = 1000) {
    HdsConfig cfg;
    cfg.budget = budget;
    cfg.theta1 = 10.0;
    cfg.theta0 = -10.0;
    cfg.tester = TesterKind::stub;
    cfg.kernel.sigma_s2 = 1.0;
    cfg.kernel.bandwidth = 0.1;
    cfg.noise_var = 0.1;
    return cfg;
}

// Dims of pruned subtrees plus live/emitted leaves must partition {0..D-1}.
void check_partition(const HdsResult& res, int D) {
    std::vector<int> covered;
    for (const auto& n : res.nodes) {
        const bool is_leaf_record =
            n.state == NodeState::inactive || (n.state == NodeState::active && n.dims.size() == 1) ||
            n.state == NodeState::undetermined;
        if (!is_leaf_record) continue;  // split actives are covered by their children
        covered.insert(covered.end(), n.dims.begin(), n.dims.end());
    }
    std::sort(covered.begin(), covered.end());
    std::vector<int> expect(D);
    std::iota(expect.begin(), expect.end(), 0);
    REQUIRE(covered == expect);
}

}  // namespace

TEST_CASE("project point", "[hds]") {
    Eigen::VectorXd bg(4);
    bg << 0.1, 0.2, 0.3, 0.4;
    const auto x = project_point({0, 2}, 0.5, bg);
    REQUIRE(x[0] == 0.5);
    REQUIRE(x[1] == 0.2);
    REQUIRE(x[2] == 0.5);
    REQUIRE(x[3] == 0.4);

    const auto full = project_point({0, 1, 2, 3}, -0.25, bg);
    for (int i = 0; i < 4; ++i) REQUIRE(full[i] == -0.25);

    REQUIRE_THROWS_AS(project_point({}, 0.0, bg), InvalidInput);
    REQUIRE_THROWS_AS(project_point({0}, 1.5, bg), InvalidInput);
}

TEST_CASE("split node halves by index order", "[hds]") {
    const auto [l1, r1] = split_node({0, 1, 2});
    REQUIRE(l1 == std::vector<int>{0, 1});
    REQUIRE(r1 == std::vector<int>{2});

    const auto [l2, r2] = split_node({3, 6, 8, 11});
    REQUIRE(l2 == std::vector<int>({3, 6}));
    REQUIRE(r2 == std::vector<int>({8, 11}));

    REQUIRE_THROWS_AS(split_node({4}), InvalidInput);
}

TEST_CASE("stub run recovers the active set with the expected node count", "[hds]") {
    // D = 4 with one active dimension: root, both halves, then both leaves of
    // the active half are tested, five nodes in total
    HdsConfig cfg = stub_config();
    Oracle oracle = zero_oracle(4, 1);
    StubTester stub({1}, cfg.theta1, cfg.theta0);
    const auto res = hds_run(oracle, cfg, 1, stub, draw_background(1, 4));

    REQUIRE(res.recovered == std::vector<int>{1});
    REQUIRE(res.terminated_by == TerminationCause::tree_empty);
    REQUIRE(res.nodes.size() == 5);
    std::set<std::vector<int>> tested;
    for (const auto& n : res.nodes) tested.insert(n.dims);
    const std::set<std::vector<int>> expect = {{0, 1, 2, 3}, {0, 1}, {2, 3}, {0}, {1}};
    REQUIRE(tested == expect);
    REQUIRE(res.evals_used == 5);
    check_partition(res, 4);
}

TEST_CASE("zero budget terminates immediately", "[hds]") {
    HdsConfig cfg = stub_config(0);
    Oracle oracle = zero_oracle(4, 2);
    StubTester stub({1}, cfg.theta1, cfg.theta0);
    const auto res = hds_run(oracle, cfg, 2, stub, draw_background(2, 4));
    REQUIRE(res.recovered.empty());
    REQUIRE(res.terminated_by == TerminationCause::budget);
    REQUIRE(res.evals_used == 0);
}

TEST_CASE("empty active set prunes the root after one test", "[hds]") {
    HdsConfig cfg = stub_config();
    Oracle oracle = zero_oracle(8, 3);
    StubTester stub({}, cfg.theta1, cfg.theta0);
    const auto res = hds_run(oracle, cfg, 3, stub, draw_background(3, 8));
    REQUIRE(res.recovered.empty());
    REQUIRE(res.nodes.size() == 1);
    REQUIRE(res.nodes.front().state == NodeState::inactive);
    REQUIRE(res.terminated_by == TerminationCause::tree_empty);
}

TEST_CASE("threshold-crossing stubs resolve in one step", "[hds]") {
    // every node immediately active: all singletons get emitted
    HdsConfig cfg = stub_config();
    Oracle oracle = zero_oracle(4, 4);
    StubTester all_active({0, 1, 2, 3}, cfg.theta1, cfg.theta0);
    const auto res = hds_run(oracle, cfg, 4, all_active, draw_background(4, 4));
    REQUIRE(res.recovered == std::vector<int>({0, 1, 2, 3}));
    check_partition(res, 4);
}

TEST_CASE("stub recovery is exact and node count bounded over random cases", "[hds]") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int D = 2 + static_cast<int>(rng.uniform_int(62));
        const int d = 1 + static_cast<int>(rng.uniform_int(std::min(D, 4)));
        std::set<int> actives;
        while (static_cast<int>(actives.size()) < d)
            actives.insert(static_cast<int>(rng.uniform_int(D)));
        std::vector<int> avec(actives.begin(), actives.end());

        HdsConfig cfg = stub_config(100000);
        Oracle oracle = zero_oracle(D, 100 + trial);
        StubTester stub(avec, cfg.theta1, cfg.theta0);
        const auto res = hds_run(oracle, cfg, 100 + trial, stub, draw_background(100 + trial, D));

        REQUIRE(res.recovered == avec);
        REQUIRE(static_cast<int>(res.nodes.size()) <= 2 * d * ceil_log2(D) + 1);
        check_partition(res, D);

        // depth bound and per-node sample accounting
        long total = 0;
        for (const auto& n : res.nodes) {
            REQUIRE(n.depth <= ceil_log2(D));
            total += n.samples_used;
        }
        REQUIRE(total == res.evals_used);
        REQUIRE(total == oracle.eval_count());
    }
}

TEST_CASE("budget is never exceeded mid-step", "[hds]") {
    // FDT steps cost two evaluations; an odd budget leaves one unused
    HdsConfig cfg = stub_config(7);
    cfg.tester = TesterKind::fdt_sequential;
    Oracle oracle = zero_oracle(16, 5);
    FdtTester tester(1.0, 0.1, 0.1);
    const auto res = hds_run(oracle, cfg, 5, tester, draw_background(5, 16));
    REQUIRE(res.terminated_by == TerminationCause::budget);
    REQUIRE(res.evals_used == 6);
    REQUIRE(oracle.eval_count() == 6);
}

TEST_CASE("fdt end-to-end recovery on a smooth sample", "[hds]") {
    KernelSpec ks;
    ks.sigma_s2 = 1.0;
    ks.bandwidth = 0.1;
    int hits = 0;
    for (int trial = 0; trial < 5; ++trial) {
        const auto f = sample_gp_lattice(ks, 1, 201, 40 + trial);
        Oracle oracle(
            8,
            [&f](const Eigen::VectorXd& x) {
                Eigen::VectorXd z(1);
                z[0] = x[3];
                return f.eval(z);
            },
            0.1, Rng(50 + trial).child("noise"));
        HdsConfig cfg = stub_config(4000);
        cfg.tester = TesterKind::fdt_sequential;
        FdtTester tester(1.0, 0.1, 0.1);
        const auto res = hds_run(oracle, cfg, 60 + trial, tester, draw_background(60 + trial, 8));
        if (res.recovered == std::vector<int>{3}) ++hits;
    }
    REQUIRE(hits >= 4);
}

TEST_CASE("emitted singletons are never retracted", "[hds]") {
    // drive a run manually and snapshot the recovered set as it grows
    HdsConfig cfg = stub_config(100000);
    Oracle oracle = zero_oracle(32, 6);
    StubTester stub({2, 17, 30}, cfg.theta1, cfg.theta0);
    const auto res = hds_run(oracle, cfg, 6, stub, draw_background(6, 32));
    REQUIRE(res.recovered == std::vector<int>({2, 17, 30}));
    // pruned subtrees stay pruned: every inactive node's dims are disjoint from
    // the recovered set
    for (const auto& n : res.nodes) {
        if (n.state != NodeState::inactive) continue;
        for (int dim : n.dims)
            REQUIRE(std::find(res.recovered.begin(), res.recovered.end(), dim) ==
                    res.recovered.end());
    }
}
