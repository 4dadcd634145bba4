#include "clairaut/bracket.hpp"

#include <cmath>

namespace clairaut {

namespace {

// {X, h_a} for every a, given the system derivatives at the point
Eigen::VectorXd poisson_with_h(const ObservableGradient& gx, const SystemGradients& g,
                               const IndexSplit& split) {
    const int m = split.degenerate_count();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (int a = 0; a < m; ++a)
        for (int i = 0; i < split.rank; ++i)
            out(a) += gx.dq(split.regular(i)) * g.dh_dp(a, i) - g.dh_dq(a, split.regular(i)) * gx.dp(i);
    return out;
}

Eigen::VectorXd d_alpha_all(const ObservableGradient& gx, const SystemGradients& g,
                            const IndexSplit& split) {
    Eigen::VectorXd out = poisson_with_h(gx, g, split);
    for (int a = 0; a < split.degenerate_count(); ++a) out(a) += gx.dq(split.degenerate(a));
    return out;
}

}  // namespace

Observable Observable::from_expression(const ClairautSystem& sys, const Expression& e,
                                       std::string name) {
    const SymbolTable& st = sys.symbols();
    const IndexSplit split = sys.index_split();
    if (name.empty()) name = e.str(st);

    for (int id : e.free_symbols()) {
        SymbolKind k = st.kind(id);
        if (k == SymbolKind::parameter) continue;
        if (k == SymbolKind::coordinate) continue;
        if (k == SymbolKind::momentum) {
            const int orig = st.coordinate_index(id);
            bool regular = false;
            for (int i = 0; i < split.rank; ++i) regular |= (split.regular(i) == orig);
            if (!regular)
                throw UnknownSymbolError(st.display(id),
                                         "observable uses \"" + st.display(id) +
                                             "\", which is not a regular momentum of this model");
            continue;
        }
        throw UnknownSymbolError(st.display(id), "observable uses \"" + st.display(id) +
                                                     "\", which does not live on the restricted phase space");
    }

    auto compiled = std::make_shared<CompiledExpr>(e, st);
    auto grads_q = std::make_shared<std::vector<CompiledExpr>>();
    auto grads_p = std::make_shared<std::vector<CompiledExpr>>();
    for (int k = 0; k < st.n(); ++k) grads_q->emplace_back(e.diff(st.coordinate_id(k)), st);
    for (int i = 0; i < split.rank; ++i)
        grads_p->emplace_back(e.diff(st.momentum_id(split.regular(i))), st);

    auto bind = [&st, split](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
        std::vector<double> values(static_cast<size_t>(st.size()), 0.0);
        for (int j = 0; j < st.parameter_count(); ++j)
            values[static_cast<size_t>(st.parameter_id(j))] = st.parameter_value(j);
        for (int k = 0; k < st.n(); ++k) values[static_cast<size_t>(st.coordinate_id(k))] = q(k);
        for (int i = 0; i < split.rank; ++i)
            values[static_cast<size_t>(st.momentum_id(split.regular(i)))] = p(i);
        return values;
    };

    ValueFn value = [compiled, bind](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
        return compiled->eval(bind(q, p));
    };
    GradFn grad = [grads_q, grads_p, bind, n = st.n(), r = split.rank](const Eigen::VectorXd& q,
                                                                        const Eigen::VectorXd& p) {
        std::vector<double> values = bind(q, p);
        ObservableGradient g;
        g.dq.resize(n);
        g.dp.resize(r);
        for (int k = 0; k < n; ++k) g.dq(k) = (*grads_q)[static_cast<size_t>(k)].eval(values);
        for (int i = 0; i < r; ++i) g.dp(i) = (*grads_p)[static_cast<size_t>(i)].eval(values);
        return g;
    };
    return Observable(std::move(name), std::move(value), std::move(grad));
}

Observable Observable::from_source(const ClairautSystem& sys, std::string_view source) {
    Expression e = parse(source, sys.symbols(), kObservableSymbols);
    return from_expression(sys, e, std::string(source));
}

Observable Observable::h0(const ClairautSystem& sys) {
    const ClairautSystem* s = &sys;
    return Observable(
        "H0", [s](const Eigen::VectorXd& q, const Eigen::VectorXd& p) { return s->derivatives(q, p).h0; },
        [s](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
            SystemGradients g = s->derivatives(q, p);
            return ObservableGradient{g.dH0_dq, g.dH0_dp};
        });
}

Observable Observable::h_component(const ClairautSystem& sys, int alpha_slot) {
    const ClairautSystem* s = &sys;
    return Observable(
        "h_" + sys.symbols().coordinates()[static_cast<size_t>(sys.index_split().degenerate(alpha_slot))],
        [s, alpha_slot](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
            return s->derivatives(q, p).h(alpha_slot);
        },
        [s, alpha_slot](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
            SystemGradients g = s->derivatives(q, p);
            return ObservableGradient{g.dh_dq.row(alpha_slot).transpose(),
                                      g.dh_dp.row(alpha_slot).transpose()};
        });
}

Observable Observable::coordinate(const ClairautSystem& sys, int original_index) {
    const int n = sys.n();
    const int r = sys.r();
    return Observable(
        sys.symbols().coordinates()[static_cast<size_t>(original_index)],
        [original_index](const Eigen::VectorXd& q, const Eigen::VectorXd&) { return q(original_index); },
        [original_index, n, r](const Eigen::VectorXd&, const Eigen::VectorXd&) {
            ObservableGradient g{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(r)};
            g.dq(original_index) = 1.0;
            return g;
        });
}

Observable Observable::momentum(const ClairautSystem& sys, int regular_slot) {
    const int n = sys.n();
    const int r = sys.r();
    return Observable(
        "p_" + sys.symbols().coordinates()[static_cast<size_t>(sys.index_split().regular(regular_slot))],
        [regular_slot](const Eigen::VectorXd&, const Eigen::VectorXd& p) { return p(regular_slot); },
        [regular_slot, n, r](const Eigen::VectorXd&, const Eigen::VectorXd&) {
            ObservableGradient g{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(r)};
            g.dp(regular_slot) = 1.0;
            return g;
        });
}

Observable Observable::numeric(const ClairautSystem& sys, std::string name, ValueFn value,
                               double fd_step) {
    const int n = sys.n();
    const int r = sys.r();
    ValueFn v = value;
    GradFn grad = [v, n, r, fd_step](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
        ObservableGradient g{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(r)};
        for (int k = 0; k < n; ++k) {
            Eigen::VectorXd hi = q, lo = q;
            hi(k) += fd_step;
            lo(k) -= fd_step;
            g.dq(k) = (v(hi, p) - v(lo, p)) / (2.0 * fd_step);
        }
        for (int i = 0; i < r; ++i) {
            Eigen::VectorXd hi = p, lo = p;
            hi(i) += fd_step;
            lo(i) -= fd_step;
            g.dp(i) = (v(q, hi) - v(q, lo)) / (2.0 * fd_step);
        }
        return g;
    };
    return Observable(std::move(name), std::move(value), std::move(grad));
}

Observable Observable::operator*(const Observable& other) const {
    Observable lhs = *this, rhs = other;
    return Observable(
        "(" + name_ + ")*(" + other.name_ + ")",
        [lhs, rhs](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
            return lhs.value(q, p) * rhs.value(q, p);
        },
        [lhs, rhs](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
            const double a = lhs.value(q, p), b = rhs.value(q, p);
            ObservableGradient ga = lhs.gradient(q, p), gb = rhs.gradient(q, p);
            return ObservableGradient{ga.dq * b + gb.dq * a, ga.dp * b + gb.dp * a};
        });
}

Observable Observable::operator+(const Observable& other) const {
    Observable lhs = *this, rhs = other;
    return Observable(
        "(" + name_ + ")+(" + other.name_ + ")",
        [lhs, rhs](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
            return lhs.value(q, p) + rhs.value(q, p);
        },
        [lhs, rhs](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
            ObservableGradient ga = lhs.gradient(q, p), gb = rhs.gradient(q, p);
            return ObservableGradient{ga.dq + gb.dq, ga.dp + gb.dp};
        });
}

double poisson(const Observable& X, const Observable& Y, const ClairautSystem& sys,
               const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
    const IndexSplit& split = sys.index_split();
    ObservableGradient gx = X.gradient(q, p);
    ObservableGradient gy = Y.gradient(q, p);
    double out = 0.0;
    for (int i = 0; i < split.rank; ++i) {
        const int qi = split.regular(i);
        out += gx.dq(qi) * gy.dp(i) - gy.dq(qi) * gx.dp(i);
    }
    return out;
}

double d_alpha(const Observable& X, int alpha_slot, const ClairautSystem& sys,
               const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
    SystemGradients g = sys.derivatives(q, p);
    ObservableGradient gx = X.gradient(q, p);
    return d_alpha_all(gx, g, sys.index_split())(alpha_slot);
}

Eigen::MatrixXd curvature_F(const ClairautSystem& sys, const SystemGradients& g) {
    const IndexSplit& split = sys.index_split();
    const int m = split.degenerate_count();
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m, m);
    for (int a = 0; a < m; ++a) {
        for (int b = a + 1; b < m; ++b) {
            double f = g.dh_dq(a, split.degenerate(b)) - g.dh_dq(b, split.degenerate(a));
            for (int i = 0; i < split.rank; ++i)
                f += g.dh_dq(a, split.regular(i)) * g.dh_dp(b, i) -
                     g.dh_dq(b, split.regular(i)) * g.dh_dp(a, i);
            F(a, b) = f;
            F(b, a) = -f;
        }
    }
    return F;
}

Eigen::MatrixXd curvature_F(const ClairautSystem& sys, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& p) {
    return curvature_F(sys, sys.derivatives(q, p));
}

FInverse invert_F(const Eigen::MatrixXd& F, double rel_tol) {
    FInverse out;
    const int m = static_cast<int>(F.rows());
    if (m == 0) {
        out.inverse.resize(0, 0);
        out.kernel.resize(0, 0);
        out.full_rank = true;
        return out;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    int rank = 0;
    if (sigma_max > 0.0)
        for (int k = 0; k < sigma.size(); ++k)
            if (sigma(k) > rel_tol * sigma_max) ++rank;
    out.rank = rank;
    out.full_rank = (rank == m);

    if (out.full_rank) {
        out.inverse = F.inverse();
        out.kernel.resize(m, 0);
        return out;
    }

    // Moore-Penrose pseudo-inverse on the image; kernel from the trailing
    // right singular vectors, sign-fixed for determinism.
    Eigen::VectorXd inv_sigma = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < rank; ++k) inv_sigma(k) = 1.0 / sigma(k);
    out.inverse = svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().transpose();
    out.kernel.resize(m, m - rank);
    for (int k = rank; k < m; ++k) {
        Eigen::VectorXd col = svd.matrixV().col(k);
        int imax = 0;
        for (int i = 1; i < m; ++i)
            if (std::abs(col(i)) > std::abs(col(imax))) imax = i;
        if (col(imax) < 0.0) col = -col;
        out.kernel.col(k - rank) = col;
    }
    return out;
}

double bracket_F(const Observable& X, const Observable& Y, const ClairautSystem& sys,
                 const Eigen::VectorXd& q, const Eigen::VectorXd& p, Convention convention,
                 bool require_full_rank) {
    const IndexSplit& split = sys.index_split();
    const int m = split.degenerate_count();
    ObservableGradient gx = X.gradient(q, p);
    ObservableGradient gy = Y.gradient(q, p);

    double plain = 0.0;
    for (int i = 0; i < split.rank; ++i) {
        const int qi = split.regular(i);
        plain += gx.dq(qi) * gy.dp(i) - gy.dq(qi) * gx.dp(i);
    }
    if (m == 0) return plain;

    SystemGradients g = sys.derivatives(q, p);
    Eigen::MatrixXd F = curvature_F(sys, g);
    FInverse inv = invert_F(F, sys.tolerances().rank_relative);
    if (require_full_rank && !inv.full_rank)
        throw FNotInvertibleError("curvature F has rank " + std::to_string(inv.rank) + " < " +
                                  std::to_string(m) + " at the requested point");

    Eigen::MatrixXd G = convention == Convention::A ? inv.inverse : Eigen::MatrixXd(-inv.inverse);
    Eigen::VectorXd xh = poisson_with_h(gx, g, split);
    Eigen::VectorXd dy = d_alpha_all(gy, g, split);
    return plain + xh.dot(G * dy);
}

}  // namespace clairaut
