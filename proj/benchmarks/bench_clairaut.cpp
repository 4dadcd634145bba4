#include <benchmark/benchmark.h>

#include <clairaut/corpus.hpp>
#include <clairaut/evolution.hpp>

using namespace clairaut;

namespace {

const RunSetup& setup(const std::string& name) {
    static std::vector<RunSetup> corpus = prepare_corpus();
    for (const RunSetup& r : corpus)
        if (r.name() == name) return r;
    std::abort();
}

void BM_parse_lagrangian(benchmark::State& state) {
    SymbolTable table = SymbolTable::make({"q1", "q2", "q3", "q4"});
    const std::string src =
        "0.5*(q2*d(q1) - q1*d(q2)) + 0.5*(q4*d(q3) - q3*d(q4)) - 0.5*(q1^2 + q2^2 + q3^2 + q4^2)";
    for (auto _ : state) benchmark::DoNotOptimize(parse(src, table));
}
BENCHMARK(BM_parse_lagrangian);

void BM_diff_hessian_entry(benchmark::State& state) {
    const Model& m = *setup("first_order_4d").model;
    for (auto _ : state) {
        Expression d1 = m.lagrangian.diff(m.symbols.velocity_id(0));
        benchmark::DoNotOptimize(d1.diff(m.symbols.velocity_id(1)));
    }
}
BENCHMARK(BM_diff_hessian_entry);

void BM_compiled_eval(benchmark::State& state) {
    const Model& m = *setup("first_order_4d").model;
    CompiledExpr compiled(m.lagrangian, m.symbols);
    EvalContext ctx(m.symbols);
    for (int k = 0; k < 4; ++k) {
        ctx.bind(m.symbols.coordinate_id(k), 0.3 + 0.1 * k);
        ctx.bind(m.symbols.velocity_id(k), -0.2 + 0.1 * k);
    }
    for (auto _ : state) benchmark::DoNotOptimize(compiled.eval(ctx));
}
BENCHMARK(BM_compiled_eval);

void BM_resolve_velocities(benchmark::State& state) {
    const RunSetup& q = setup("quartic");
    Eigen::VectorXd qq = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 8.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(q.system.resolve_velocities(qq, p, Eigen::VectorXd()));
}
BENCHMARK(BM_resolve_velocities);

void BM_system_derivatives(benchmark::State& state) {
    const RunSetup& mx = setup("mixed_rank1");
    Eigen::VectorXd q(3), p(1);
    q << 0.3, 0.5, -0.4;
    p << 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(mx.system.derivatives(q, p));
}
BENCHMARK(BM_system_derivatives);

void BM_bracket_F(benchmark::State& state) {
    const RunSetup& mx = setup("mixed_rank1");
    Observable X = Observable::coordinate(mx.system, 0) + Observable::coordinate(mx.system, 1);
    Observable H0 = Observable::h0(mx.system);
    Eigen::VectorXd q(3), p(1);
    q << 0.3, 0.5, -0.4;
    p << 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(bracket_F(X, H0, mx.system, q, p));
}
BENCHMARK(BM_bracket_F);

void BM_rk4_step(benchmark::State& state) {
    const RunSetup& fo = setup("first_order_4d");
    PhasePoint pt = fo.initial;
    for (auto _ : state) benchmark::DoNotOptimize(step(fo.system, pt, 1e-3, fo.gauge));
}
BENCHMARK(BM_rk4_step);

void BM_integrate_unit_window(benchmark::State& state) {
    const RunSetup& osc = setup("oscillator");
    for (auto _ : state)
        benchmark::DoNotOptimize(
            integrate(osc.system, osc.initial, 0.0, 1.0, 1e-3, GaugeChoice::none()));
}
BENCHMARK(BM_integrate_unit_window);

}  // namespace

BENCHMARK_MAIN();
