#include <doctest.h>

#include <clairaut/corpus.hpp>
#include <clairaut/evolution.hpp>

#include <atomic>
#include <thread>
#include <vector>

#include "helpers.hpp"

using namespace clairaut;

// The declared concurrency contracts: expressions and systems are immutable
// after construction, per-point evaluation keeps its own scratch, and
// independent trajectories share no mutable state. These smoke tests run the
// hot paths from several threads and require bit-identical results.

TEST_CASE("compiled expressions evaluate concurrently") {
    SymbolTable table = SymbolTable::make({"q1", "q2"});
    Expression e = parse("sin(q1)*d(q2)^2 + exp(q2 - d(q1))", table);
    CompiledExpr compiled(e, table);

    EvalContext ctx(table);
    ctx.bind(table.coordinate_id(0), 0.3);
    ctx.bind(table.coordinate_id(1), -0.7);
    ctx.bind(table.velocity_id(0), 1.1);
    ctx.bind(table.velocity_id(1), 0.4);
    const double expected = compiled.eval(ctx);

    std::atomic<int> mismatches{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w)
        workers.emplace_back([&]() {
            for (int k = 0; k < 20000; ++k)
                if (compiled.eval(ctx) != expected) mismatches.fetch_add(1);
        });
    for (std::thread& t : workers) t.join();
    CHECK(mismatches.load() == 0);
}

TEST_CASE("system evaluation at distinct points is safe to run in parallel") {
    RunSetup mx = prepare(corpus_spec("mixed_rank1"));
    const ClairautSystem& sys = mx.system;

    // reference values computed single-threaded
    std::vector<Eigen::VectorXd> qs, ps;
    std::vector<double> expected_h0;
    DeterministicRng rng(71);
    for (int k = 0; k < 64; ++k) {
        Eigen::VectorXd q(3), p(1);
        for (int j = 0; j < 3; ++j) q(j) = rng.uniform(-1, 1);
        p(0) = rng.uniform(0.5, 1.5);
        qs.push_back(q);
        ps.push_back(p);
        expected_h0.push_back(sys.derivatives(q, p).h0);
    }

    std::atomic<int> mismatches{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w)
        workers.emplace_back([&, w]() {
            for (size_t k = static_cast<size_t>(w); k < qs.size(); k += 4) {
                SystemGradients g = sys.derivatives(qs[k], ps[k]);
                if (g.h0 != expected_h0[k]) mismatches.fetch_add(1);
                Eigen::MatrixXd F = curvature_F(sys, qs[k], ps[k]);
                if ((F + F.transpose()).cwiseAbs().maxCoeff() > 1e-12) mismatches.fetch_add(1);
            }
        });
    for (std::thread& t : workers) t.join();
    CHECK(mismatches.load() == 0);
}

TEST_CASE("independent trajectories integrate concurrently") {
    RunSetup fo = prepare(corpus_spec("first_order"));
    Trajectory reference = integrate(fo.system, fo.initial, 0.0, 1.0, 1e-3, GaugeChoice::none());

    std::atomic<int> mismatches{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w)
        workers.emplace_back([&]() {
            Trajectory traj = integrate(fo.system, fo.initial, 0.0, 1.0, 1e-3, GaugeChoice::none());
            if (traj.size() != reference.size()) {
                mismatches.fetch_add(1);
                return;
            }
            for (int k = 0; k < traj.size(); ++k)
                if (traj.samples[static_cast<size_t>(k)].q !=
                    reference.samples[static_cast<size_t>(k)].q)
                    mismatches.fetch_add(1);
        });
    for (std::thread& t : workers) t.join();
    CHECK(mismatches.load() == 0);
}
