#include "clairaut/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace clairaut {

namespace {

// D_a H0 = dH0/dq^a + {H0, h_a}
Eigen::VectorXd d_alpha_h0(const SystemGradients& g, const IndexSplit& split) {
    const int m = split.degenerate_count();
    Eigen::VectorXd D(m);
    for (int a = 0; a < m; ++a) {
        double acc = g.dH0_dq(split.degenerate(a));
        for (int i = 0; i < split.rank; ++i)
            acc += g.dH0_dq(split.regular(i)) * g.dh_dp(a, i) -
                   g.dh_dq(a, split.regular(i)) * g.dH0_dp(i);
        D(a) = acc;
    }
    return D;
}

// Per-step evaluator with warm-started Newton guesses and compiled gauge
// expressions. Owns no shared state; one instance per integration.
class Stepper {
public:
    Stepper(const ClairautSystem& sys, const GaugeChoice& gauge, Convention convention)
        : sys_(sys), split_(sys.index_split()), convention_(convention), gauge_(gauge) {
        const SymbolTable& st = sys.symbols();
        if (gauge.provided) {
            if (static_cast<int>(gauge.velocity.size()) != sys.m())
                throw MissingGaugeError("gauge choice has " + std::to_string(gauge.velocity.size()) +
                                        " entries for " + std::to_string(sys.m()) +
                                        " degenerate directions");
            for (const Expression& e : gauge.velocity) gauge_compiled_.emplace_back(e, st);
        }
        guess_ = Eigen::VectorXd::Zero(sys.r());
    }

    void seed_guess(const Eigen::VectorXd& v_regular) { guess_ = v_regular; }

    Eigen::VectorXd gauge_values(double t, const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
        const SymbolTable& st = sys_.symbols();
        Eigen::VectorXd out = Eigen::VectorXd::Zero(sys_.m());
        if (!gauge_.provided) return out;
        std::vector<double> values(static_cast<size_t>(st.size()), 0.0);
        for (int j = 0; j < st.parameter_count(); ++j)
            values[static_cast<size_t>(st.parameter_id(j))] = st.parameter_value(j);
        values[static_cast<size_t>(st.time_id())] = t;
        for (int k = 0; k < st.n(); ++k) values[static_cast<size_t>(st.coordinate_id(k))] = q(k);
        for (int i = 0; i < split_.rank; ++i)
            values[static_cast<size_t>(st.momentum_id(split_.regular(i)))] = p(i);
        for (int a = 0; a < sys_.m(); ++a) out(a) = gauge_compiled_[static_cast<size_t>(a)].eval(values);
        return out;
    }

    DegenerateVelocities velocities(double t, const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                    const SystemGradients& g) const {
        const int m = sys_.m();
        DegenerateVelocities out;
        out.v = Eigen::VectorXd::Zero(m);
        if (m == 0) {
            out.report.kernel.resize(0, 0);
            return out;
        }
        Eigen::MatrixXd F = curvature_F(sys_, g);
        FInverse inv = invert_F(F, sys_.tolerances().rank_relative);
        Eigen::VectorXd D = d_alpha_h0(g, split_);
        Eigen::VectorXd particular = inv.inverse * D;
        const double consistency = (F * particular - D).cwiseAbs().maxCoeff();
        if (consistency > sys_.tolerances().image_consistency)
            throw InconsistentSystemError(
                "the degenerate velocity system F v = D_alpha H0 is inconsistent (image residual " +
                std::to_string(consistency) + " at t = " + std::to_string(t) + ")");
        if (convention_ == Convention::B) particular = -particular;
        out.v = particular;
        out.report.rank_F = inv.rank;
        out.report.gauge_count = m - inv.rank;
        out.report.kernel = inv.kernel;
        if (!inv.full_rank) {
            if (!gauge_.provided)
                throw MissingGaugeError("curvature F has rank " + std::to_string(inv.rank) + " < " +
                                        std::to_string(m) +
                                        "; a gauge choice is required for the kernel directions");
            Eigen::VectorXd user = gauge_values(t, q, p);
            out.v += inv.kernel * (inv.kernel.transpose() * user);
        }
        return out;
    }

    // time derivative of the state (q, p)
    void rhs(double t, const Eigen::VectorXd& q, const Eigen::VectorXd& p, Eigen::VectorXd& dq,
             Eigen::VectorXd& dp, Eigen::VectorXd* v_out = nullptr,
             SystemGradients* g_out = nullptr) const {
        SystemGradients g = sys_.derivatives(q, p, guess_);
        guess_ = g.v_regular;
        DegenerateVelocities dv = velocities(t, q, p, g);
        const int n = sys_.n();
        const int r = sys_.r();
        const int m = sys_.m();
        dq.resize(n);
        dp.resize(r);
        for (int i = 0; i < r; ++i) {
            const int qi = split_.regular(i);
            double qdot = g.dH0_dp(i);
            double pdot = -g.dH0_dq(qi);
            for (int a = 0; a < m; ++a) {
                qdot += g.dh_dp(a, i) * dv.v(a);
                pdot -= g.dh_dq(a, qi) * dv.v(a);
            }
            dq(qi) = qdot;
            dp(i) = pdot;
        }
        for (int a = 0; a < m; ++a) dq(split_.degenerate(a)) = dv.v(a);
        if (v_out) *v_out = dv.v;
        if (g_out) *g_out = g;
        last_report_ = dv.report;
    }

    const GaugeReport& last_report() const { return last_report_; }

private:
    const ClairautSystem& sys_;
    const IndexSplit& split_;
    Convention convention_;
    GaugeChoice gauge_;
    std::vector<CompiledExpr> gauge_compiled_;
    mutable Eigen::VectorXd guess_;
    mutable GaugeReport last_report_;
};

PhasePoint rk4_step(const Stepper& stepper, const PhasePoint& y0, double dt) {
    Eigen::VectorXd k1q, k1p, k2q, k2p, k3q, k3p, k4q, k4p;
    stepper.rhs(y0.t, y0.q, y0.p, k1q, k1p);
    stepper.rhs(y0.t + 0.5 * dt, y0.q + 0.5 * dt * k1q, y0.p + 0.5 * dt * k1p, k2q, k2p);
    stepper.rhs(y0.t + 0.5 * dt, y0.q + 0.5 * dt * k2q, y0.p + 0.5 * dt * k2p, k3q, k3p);
    stepper.rhs(y0.t + dt, y0.q + dt * k3q, y0.p + dt * k3p, k4q, k4p);
    PhasePoint out;
    out.t = y0.t + dt;
    out.q = y0.q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    out.p = y0.p + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    return out;
}

}  // namespace

DegenerateVelocities resolve_degenerate_velocities(const ClairautSystem& sys, const PhasePoint& at,
                                                   const GaugeChoice& gauge, Convention convention) {
    Stepper stepper(sys, gauge, convention);
    SystemGradients g = sys.derivatives(at.q, at.p);
    return stepper.velocities(at.t, at.q, at.p, g);
}

PhasePoint step(const ClairautSystem& sys, const PhasePoint& state, double dt,
                const GaugeChoice& gauge, Convention convention) {
    if (!(dt > 0.0)) throw Error(ErrorCode::resolution, "step requires dt > 0");
    Stepper stepper(sys, gauge, convention);
    return rk4_step(stepper, state, dt);
}

Trajectory integrate(const ClairautSystem& sys, const PhasePoint& initial, double t0, double t1,
                     double dt, const GaugeChoice& gauge, Convention convention) {
    if (!(t1 > t0)) throw Error(ErrorCode::resolution, "integrate requires t1 > t0");
    if (!(dt > 0.0)) throw Error(ErrorCode::resolution, "integrate requires dt > 0");

    Stepper stepper(sys, gauge, convention);
    Trajectory traj;
    traj.convention = convention;
    traj.dt = dt;

    PhasePoint state = initial;
    state.t = t0;

    auto record = [&](const PhasePoint& pt) {
        Eigen::VectorXd dq, dp, v;
        SystemGradients g;
        stepper.rhs(pt.t, pt.q, pt.p, dq, dp, &v, &g);
        TrajectorySample s;
        s.t = pt.t;
        s.q = pt.q;
        s.p = pt.p;
        s.v_degenerate = v;
        s.h0 = g.h0;
        traj.samples.push_back(std::move(s));
    };

    try {
        record(state);
        traj.gauge = stepper.last_report();
        const long long whole = static_cast<long long>(std::floor((t1 - t0) / dt + 1e-12));
        for (long long k = 1; k <= whole; ++k) {
            state = rk4_step(stepper, state, dt);
            state.t = t0 + static_cast<double>(k) * dt;  // avoid accumulated drift
            record(state);
        }
        traj.uniform_count = traj.size();
        const double remaining = t1 - state.t;
        if (remaining > 1e-12 * std::max(1.0, std::abs(t1))) {
            state = rk4_step(stepper, state, remaining);
            state.t = t1;
            record(state);
        }
    } catch (const IntegrationAbort&) {
        throw;
    } catch (const Error& e) {
        if (traj.uniform_count == 0) traj.uniform_count = traj.size();
        throw IntegrationAbort(e.code(), std::string("integration aborted: ") + e.what(),
                               std::move(traj));
    }
    return traj;
}

ObservableEvolution evolve_observable(const Observable& X, const ClairautSystem& sys,
                                      const Trajectory& trajectory, Convention convention) {
    ObservableEvolution out;
    const int K = std::max(trajectory.uniform_count, 0);
    if (K < 5)
        throw TooFewSamplesError("evolve_observable needs at least 5 uniform samples, got " +
                                 std::to_string(K));
    const double dt = trajectory.dt;
    out.t.reserve(static_cast<size_t>(K));
    out.value.reserve(static_cast<size_t>(K));
    out.bracket_rhs.reserve(static_cast<size_t>(K));
    Observable H0 = Observable::h0(sys);
    for (int k = 0; k < K; ++k) {
        const TrajectorySample& s = trajectory.samples[static_cast<size_t>(k)];
        out.t.push_back(s.t);
        out.value.push_back(X.value(s.q, s.p));
        out.bracket_rhs.push_back(bracket_F(X, H0, sys, s.q, s.p, convention, false));
    }
    out.dvalue_dt.assign(static_cast<size_t>(K), std::numeric_limits<double>::quiet_NaN());
    for (int k = 2; k + 2 < K; ++k) {
        const double d = (out.value[static_cast<size_t>(k - 2)] - 8.0 * out.value[static_cast<size_t>(k - 1)] +
                          8.0 * out.value[static_cast<size_t>(k + 1)] - out.value[static_cast<size_t>(k + 2)]) /
                         (12.0 * dt);
        out.dvalue_dt[static_cast<size_t>(k)] = d;
        out.max_residual = std::max(out.max_residual, std::abs(d - out.bracket_rhs[static_cast<size_t>(k)]));
    }
    return out;
}

}  // namespace clairaut
