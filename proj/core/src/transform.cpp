#include "clairaut/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace clairaut {

struct ClairautSystem::Workspace {
    std::vector<double> values;
};

namespace {

Eigen::VectorXd zeros(int size) { return Eigen::VectorXd::Zero(size); }

}  // namespace

ClairautSystem ClairautSystem::build(const Model& model, const Tolerances& tol, const Sampling& sampling) {
    return build(model, default_samples(model.symbols.n(), sampling), tol);
}

ClairautSystem ClairautSystem::build(const Model& model, const std::vector<PhaseSample>& samples,
                                     const Tolerances& tol) {
    ClairautSystem sys;
    sys.model_ = &model;
    sys.tol_ = tol;

    HessianField W(model);
    sys.split_ = split(W, samples, tol.rank_relative, &sys.split_diag_);

    const SymbolTable& st = model.symbols;
    const int n = st.n();
    sys.lagrangian_ = CompiledExpr(model.lagrangian, st);
    std::vector<Expression> dv(static_cast<size_t>(n));
    for (int a = 0; a < n; ++a) {
        dv[static_cast<size_t>(a)] = model.lagrangian.diff(st.velocity_id(a));
        sys.dL_dv_.emplace_back(dv[static_cast<size_t>(a)], st);
        sys.dL_dq_.emplace_back(model.lagrangian.diff(st.coordinate_id(a)), st);
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            sys.w_.emplace_back(dv[static_cast<size_t>(a)].diff(st.velocity_id(b)), st);
            sys.dL_dvdq_.emplace_back(dv[static_cast<size_t>(a)].diff(st.coordinate_id(b)), st);
        }
    return sys;
}

void ClairautSystem::bind_point(Workspace& w, const Eigen::VectorXd& q) const {
    const SymbolTable& st = model_->symbols;
    w.values.assign(static_cast<size_t>(st.size()), 0.0);
    for (int j = 0; j < st.parameter_count(); ++j)
        w.values[static_cast<size_t>(st.parameter_id(j))] = st.parameter_value(j);
    for (int k = 0; k < st.n(); ++k) w.values[static_cast<size_t>(st.coordinate_id(k))] = q(k);
}

double ClairautSystem::second_probe_component(int k) const {
    return 0.7 - 0.4 * (k % 2) + 0.05 * k;
}

void ClairautSystem::newton(Workspace& w, const Eigen::VectorXd& p, Eigen::VectorXd& v_regular,
                            double* residual_out, int* iterations_out) const {
    const SymbolTable& st = model_->symbols;
    const int r = split_.rank;
    if (r == 0) {
        if (residual_out) *residual_out = 0.0;
        if (iterations_out) *iterations_out = 0;
        return;
    }

    auto write_regular = [&](const Eigen::VectorXd& vr) {
        for (int i = 0; i < r; ++i)
            w.values[static_cast<size_t>(st.velocity_id(split_.regular(i)))] = vr(i);
    };
    auto residual_at = [&](const Eigen::VectorXd& vr) {
        write_regular(vr);
        Eigen::VectorXd R(r);
        for (int i = 0; i < r; ++i)
            R(i) = p(i) - dL_dv_[static_cast<size_t>(split_.regular(i))].eval(w.values);
        return R;
    };

    Eigen::VectorXd v = v_regular;
    Eigen::VectorXd R = residual_at(v);
    double best = R.cwiseAbs().maxCoeff();
    int perturbations = 0;
    int it = 0;
    for (; it < tol_.newton_max_iterations; ++it) {
        double norm = R.cwiseAbs().maxCoeff();
        best = std::min(best, norm);
        if (norm <= tol_.newton_residual) {
            v_regular = v;
            if (residual_out) *residual_out = norm;
            if (iterations_out) *iterations_out = it;
            return;
        }

        write_regular(v);
        Eigen::MatrixXd W(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
                W(i, j) = w_[static_cast<size_t>(split_.regular(i) * split_.n + split_.regular(j))].eval(w.values);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(W);
        if (!lu.isInvertible()) {
            if (++perturbations > 3)
                throw SingularJacobianError(
                    "regular velocity Hessian is singular at the Newton iterate; the index split is "
                    "invalid here");
            for (int j = 0; j < r; ++j)
                v(j) += 0.25 * perturbations * (1.0 + std::abs(v(j))) * (j % 2 == 0 ? 1.0 : -1.0);
            R = residual_at(v);
            continue;
        }

        Eigen::VectorXd step = lu.solve(R);
        double alpha = 1.0;
        bool accepted = false;
        for (int half = 0; half < 50; ++half) {
            Eigen::VectorXd trial = v + alpha * step;
            Eigen::VectorXd Rt = residual_at(trial);
            if (Rt.cwiseAbs().maxCoeff() < norm) {
                v = trial;
                R = Rt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (++perturbations > 3) break;  // stalled; report no convergence below
            for (int j = 0; j < r; ++j)
                v(j) += 0.25 * perturbations * (1.0 + std::abs(v(j))) * (j % 2 == 0 ? 1.0 : -1.0);
            R = residual_at(v);
        }
    }
    throw NoConvergenceError(best, it);
}

ResolveResult ClairautSystem::resolve_velocities(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                                 const Eigen::VectorXd& v_degenerate) const {
    return resolve_velocities(q, p, v_degenerate, zeros(split_.rank));
}

ResolveResult ClairautSystem::resolve_velocities(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                                 const Eigen::VectorXd& v_degenerate,
                                                 const Eigen::VectorXd& guess) const {
    if (q.size() != split_.n || p.size() != split_.rank || v_degenerate.size() != m() ||
        guess.size() != split_.rank)
        throw Error(ErrorCode::resolution,
                    "resolve_velocities: dimensions do not match the index split");
    const SymbolTable& st = model_->symbols;
    Workspace w;
    bind_point(w, q);
    for (int a = 0; a < m(); ++a)
        w.values[static_cast<size_t>(st.velocity_id(split_.degenerate(a)))] = v_degenerate(a);
    ResolveResult out;
    out.v_regular = guess;
    newton(w, p, out.v_regular, &out.residual, &out.iterations);
    return out;
}

Eigen::VectorXd ClairautSystem::assemble_velocities(const Eigen::VectorXd& v_regular,
                                                    const Eigen::VectorXd& v_degenerate) const {
    Eigen::VectorXd v(split_.n);
    for (int i = 0; i < split_.rank; ++i) v(split_.regular(i)) = v_regular(i);
    for (int a = 0; a < m(); ++a) v(split_.degenerate(a)) = v_degenerate(a);
    return v;
}

double ClairautSystem::lagrangian_value(const Eigen::VectorXd& q, const Eigen::VectorXd& v_full) const {
    const SymbolTable& st = model_->symbols;
    Workspace w;
    bind_point(w, q);
    for (int k = 0; k < st.n(); ++k) w.values[static_cast<size_t>(st.velocity_id(k))] = v_full(k);
    return lagrangian_.eval(w.values);
}

Eigen::VectorXd ClairautSystem::h_alpha(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                        const Eigen::VectorXd& v_probe) const {
    const SymbolTable& st = model_->symbols;
    if (m() == 0) return Eigen::VectorXd();
    ResolveResult res = resolve_velocities(q, p, v_probe);
    Workspace w;
    bind_point(w, q);
    for (int a = 0; a < m(); ++a)
        w.values[static_cast<size_t>(st.velocity_id(split_.degenerate(a)))] = v_probe(a);
    for (int i = 0; i < split_.rank; ++i)
        w.values[static_cast<size_t>(st.velocity_id(split_.regular(i)))] = res.v_regular(i);
    Eigen::VectorXd h(m());
    for (int a = 0; a < m(); ++a)
        h(a) = -dL_dv_[static_cast<size_t>(split_.degenerate(a))].eval(w.values);
    return h;
}

Eigen::VectorXd ClairautSystem::h_alpha(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
    if (m() == 0) return Eigen::VectorXd();
    Eigen::VectorXd probe2(m());
    for (int a = 0; a < m(); ++a) probe2(a) = second_probe_component(a);
    Eigen::VectorXd h1 = h_alpha(q, p, zeros(m()));
    Eigen::VectorXd h2 = h_alpha(q, p, probe2);
    const double dev = (h1 - h2).cwiseAbs().maxCoeff();
    if (dev > tol_.independence) throw DependenceOnVelocityError("h_alpha", dev);
    return h1;
}

double ClairautSystem::h_mix(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                             const Eigen::VectorXd& pbar, const Eigen::VectorXd& v_degenerate) const {
    ResolveResult res = resolve_velocities(q, p, v_degenerate);
    const double L = lagrangian_value(q, assemble_velocities(res.v_regular, v_degenerate));
    return p.dot(res.v_regular) + pbar.dot(v_degenerate) - L;
}

double ClairautSystem::h_physical(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                  const Eigen::VectorXd& pbar_probe,
                                  const Eigen::VectorXd& v_probe) const {
    const double mix = h_mix(q, p, pbar_probe, v_probe);
    if (m() == 0) return mix;
    Eigen::VectorXd h = h_alpha(q, p, v_probe);
    return mix - (pbar_probe + h).dot(v_probe);
}

double ClairautSystem::h_physical(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
    const double value = h_physical(q, p, zeros(m()), zeros(m()));
    if (m() == 0) return value;
    Eigen::VectorXd pbar2(m()), v2(m());
    for (int a = 0; a < m(); ++a) {
        pbar2(a) = second_probe_component(a + 1);
        v2(a) = second_probe_component(a);
    }
    const double check = h_physical(q, p, pbar2, v2);
    const double dev = std::abs(value - check);
    if (dev > tol_.independence) throw DependenceOnVelocityError("H0", dev);
    return value;
}

double ClairautSystem::h_standard(const Eigen::VectorXd& q, const Eigen::VectorXd& p_full) const {
    if (split_.rank != split_.n)
        throw ModelSingularError("h_standard requires a nonsingular model (rank " +
                                 std::to_string(split_.rank) + " < n = " + std::to_string(split_.n) + ")");
    Eigen::VectorXd p_slots(split_.rank);
    for (int i = 0; i < split_.rank; ++i) p_slots(i) = p_full(split_.regular(i));
    ResolveResult res = resolve_velocities(q, p_slots, Eigen::VectorXd());
    const double L = lagrangian_value(q, assemble_velocities(res.v_regular, Eigen::VectorXd()));
    return p_slots.dot(res.v_regular) - L;
}

double ClairautSystem::h_general(const Eigen::VectorXd& q, const Eigen::VectorXd& pbar,
                                 const Eigen::VectorXd& c) const {
    return pbar.dot(c) - lagrangian_value(q, c);
}

SystemGradients ClairautSystem::derivatives(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
    return derivatives(q, p, zeros(split_.rank));
}

SystemGradients ClairautSystem::derivatives(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                            const Eigen::VectorXd& guess) const {
    const SymbolTable& st = model_->symbols;
    const int n = split_.n;
    const int r = split_.rank;
    const int md = m();

    Workspace w;
    bind_point(w, q);
    for (int a = 0; a < md; ++a) w.values[static_cast<size_t>(st.velocity_id(split_.degenerate(a)))] = 0.0;

    SystemGradients g;
    g.v_regular = guess;
    newton(w, p, g.v_regular, nullptr, nullptr);
    for (int i = 0; i < r; ++i)
        w.values[static_cast<size_t>(st.velocity_id(split_.regular(i)))] = g.v_regular(i);

    g.h0 = p.dot(g.v_regular) - lagrangian_.eval(w.values);
    g.h.resize(md);
    for (int a = 0; a < md; ++a)
        g.h(a) = -dL_dv_[static_cast<size_t>(split_.degenerate(a))].eval(w.values);

    g.dH0_dp = g.v_regular;
    g.dH0_dq.resize(n);
    for (int B = 0; B < n; ++B) g.dH0_dq(B) = -dL_dq_[static_cast<size_t>(B)].eval(w.values);

    // second derivatives at the resolved point
    Eigen::MatrixXd W(n, n), Lvq(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            W(a, b) = w_[static_cast<size_t>(a * n + b)].eval(w.values);
            Lvq(a, b) = dL_dvdq_[static_cast<size_t>(a * n + b)].eval(w.values);
        }

    g.dh_dq.resize(md, n);
    g.dh_dp.resize(md, r);
    if (md == 0) return g;

    if (r == 0) {
        for (int a = 0; a < md; ++a)
            for (int B = 0; B < n; ++B) g.dh_dq(a, B) = -Lvq(split_.degenerate(a), B);
        return g;
    }

    Eigen::MatrixXd Wrr(r, r), Wrd(r, md), Lvq_r(r, n);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) Wrr(i, j) = W(split_.regular(i), split_.regular(j));
        for (int a = 0; a < md; ++a) Wrd(i, a) = W(split_.regular(i), split_.degenerate(a));
        for (int B = 0; B < n; ++B) Lvq_r(i, B) = Lvq(split_.regular(i), B);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Wrr);
    if (!lu.isInvertible())
        throw SingularJacobianError("regular velocity Hessian is singular at the resolved point");

    // dV/dq^B = -Wrr^-1 * d2L/dv_R dq^B ; dV/dp_j = Wrr^-1 e_j
    Eigen::MatrixXd M1 = lu.solve(Lvq_r);       // r x n
    Eigen::MatrixXd Y = lu.solve(Wrd);          // r x m

    for (int a = 0; a < md; ++a) {
        const int da = split_.degenerate(a);
        for (int B = 0; B < n; ++B) {
            double acc = -Lvq(da, B);
            for (int i = 0; i < r; ++i) acc += W(da, split_.regular(i)) * M1(i, B);
            g.dh_dq(a, B) = acc;
        }
        for (int j = 0; j < r; ++j) g.dh_dp(a, j) = -Y(j, a);
    }
    return g;
}

double clairaut_residual(const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& H,
                         const ClairautSystem& system, const Eigen::VectorXd& q,
                         const Eigen::VectorXd& pbar, double fd_step) {
    const int n = static_cast<int>(pbar.size());
    Eigen::VectorXd grad(n);
    for (int B = 0; B < n; ++B) {
        Eigen::VectorXd hi = pbar, lo = pbar;
        hi(B) += fd_step;
        lo(B) -= fd_step;
        grad(B) = (H(q, hi) - H(q, lo)) / (2.0 * fd_step);
    }
    const double value = H(q, pbar);
    return value - (pbar.dot(grad) - system.lagrangian_value(q, grad));
}

}  // namespace clairaut
