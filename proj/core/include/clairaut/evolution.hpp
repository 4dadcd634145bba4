#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include "clairaut/bracket.hpp"
#include "clairaut/transform.hpp"

namespace clairaut {

/// Gauge data: one velocity expression in (t, q, p) per degenerate slot.
/// The expressions fix the kernel projection of the degenerate velocities;
/// components along the image of F are always determined by the dynamics.
struct GaugeChoice {
    bool provided = false;
    std::vector<Expression> velocity;  // size m when provided

    static GaugeChoice none() { return {}; }
    static GaugeChoice zero(int m) {
        GaugeChoice g;
        g.provided = true;
        g.velocity.assign(static_cast<size_t>(m), Expression::constant(0.0));
        return g;
    }
};

struct GaugeReport {
    int rank_F = 0;
    int gauge_count = 0;           // n - r - rank_F
    Eigen::MatrixXd kernel;        // m x gauge_count
};

struct DegenerateVelocities {
    Eigen::VectorXd v;  // size m, by degenerate slot
    GaugeReport report;
};

struct TrajectorySample {
    double t = 0.0;
    Eigen::VectorXd q;
    Eigen::VectorXd p;
    Eigen::VectorXd v_degenerate;
    double h0 = 0.0;
    double el_residual_max = std::numeric_limits<double>::quiet_NaN();
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    Convention convention = Convention::A;
    double dt = 0.0;
    /// Samples [0, uniform_count) are exactly dt apart; a shortened final
    /// step appends one extra sample beyond this range.
    int uniform_count = 0;
    GaugeReport gauge;

    int size() const { return static_cast<int>(samples.size()); }
};

/// Thrown when integration stops mid-run; the partial trajectory survives in
/// the payload.
class IntegrationAbort : public Error {
public:
    IntegrationAbort(ErrorCode cause, const std::string& what, Trajectory partial)
        : Error(cause, what), partial_(std::move(partial)) {}
    const Trajectory& partial() const { return partial_; }

private:
    Trajectory partial_;
};

/// Solve F_ab v^b = D_a H0 at one point: image components via the
/// (pseudo-)inverse under `convention`, kernel components from the gauge.
/// Throws InconsistentSystemError when D_a H0 has a component outside the
/// image of F, and MissingGaugeError when a kernel exists but no gauge was
/// provided.
DegenerateVelocities resolve_degenerate_velocities(const ClairautSystem& sys, const PhasePoint& at,
                                                   const GaugeChoice& gauge = GaugeChoice::none(),
                                                   Convention convention = Convention::A);

/// One explicit RK4 step; degenerate velocities are re-resolved at every
/// stage.
PhasePoint step(const ClairautSystem& sys, const PhasePoint& state, double dt,
                const GaugeChoice& gauge = GaugeChoice::none(),
                Convention convention = Convention::A);

/// Fixed-step RK4 trajectory over [t0, t1]; the final step is shortened to
/// land exactly on t1. Samples carry resolved degenerate velocities and H0.
Trajectory integrate(const ClairautSystem& sys, const PhasePoint& initial, double t0, double t1,
                     double dt, const GaugeChoice& gauge = GaugeChoice::none(),
                     Convention convention = Convention::A);

struct ObservableEvolution {
    std::vector<double> t;
    std::vector<double> value;
    std::vector<double> bracket_rhs;   // {X, H0}_F along the trajectory
    std::vector<double> dvalue_dt;     // 4th-order differenced value series (interior)
    double max_residual = 0.0;         // max |dX/dt - {X,H0}_F| over interior samples
};

/// Probe of dX/dt = {X, H0}_F along a trajectory, using 4th-order central
/// time differencing on the uniform part of the trajectory.
ObservableEvolution evolve_observable(const Observable& X, const ClairautSystem& sys,
                                      const Trajectory& trajectory,
                                      Convention convention = Convention::A);

}  // namespace clairaut
