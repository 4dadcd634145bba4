#pragma once

#include <clairaut/config.hpp>
#include <clairaut/expr.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace testutil {

using clairaut::DeterministicRng;
using clairaut::EvalContext;
using clairaut::Expression;
using clairaut::SymbolTable;

/// Random expression tree over the given symbols. Operations are weighted
/// towards the polynomial core; log/sqrt arguments are guarded to keep the
/// domain safe near bindings in [-2, 2].
inline Expression random_expression(DeterministicRng& rng, const std::vector<int>& symbols,
                                    int depth) {
    const double roll = rng.uniform(0.0, 1.0);
    if (depth <= 0 || roll < 0.25) {
        if (rng.uniform(0.0, 1.0) < 0.4) return Expression::constant(rng.uniform(-2.0, 2.0));
        const size_t pick = static_cast<size_t>(rng.uniform(0.0, static_cast<double>(symbols.size()) - 1e-9));
        return Expression::symbol(symbols[pick]);
    }
    auto sub = [&](int d) { return random_expression(rng, symbols, d); };
    const double op = rng.uniform(0.0, 1.0);
    if (op < 0.22) return Expression::add(sub(depth - 1), sub(depth - 1));
    if (op < 0.44) return Expression::sub(sub(depth - 1), sub(depth - 1));
    if (op < 0.66) return Expression::mul(sub(depth - 1), sub(depth - 1));
    if (op < 0.74) return Expression::pow(sub(depth - 1), 2 + static_cast<int>(rng.uniform(0.0, 2.0)));
    if (op < 0.82) return Expression::apply(clairaut::ExprOp::sin, sub(depth - 1));
    if (op < 0.90) return Expression::apply(clairaut::ExprOp::cos, sub(depth - 1));
    if (op < 0.95) return Expression::neg(sub(depth - 1));
    // guarded log(1 + x^2) keeps the argument positive
    return Expression::apply(clairaut::ExprOp::log,
                             Expression::add(Expression::constant(1.0),
                                             Expression::pow(sub(depth - 1), 2)));
}

inline double central_fd(const Expression& e, int symbol, const EvalContext& ctx, double h) {
    EvalContext hi = ctx, lo = ctx;
    hi.bind(symbol, ctx.value(symbol) + h);
    lo.bind(symbol, ctx.value(symbol) - h);
    return (e.eval(hi) - e.eval(lo)) / (2.0 * h);
}

}  // namespace testutil
