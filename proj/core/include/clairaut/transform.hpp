#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "clairaut/analysis.hpp"
#include "clairaut/config.hpp"
#include "clairaut/expr.hpp"

namespace clairaut {

/// A point of the restricted phase space: all coordinates plus the regular
/// momenta. `t` is carried for output only; the dynamics is autonomous.
struct PhasePoint {
    double t = 0.0;
    Eigen::VectorXd q;  // size n
    Eigen::VectorXd p;  // size r, ordered like the regular index list
};

struct ResolveResult {
    Eigen::VectorXd v_regular;  // V^i, ordered like the regular index list
    double residual = 0.0;
    int iterations = 0;
};

/// Everything the bracket and evolution layers need at one phase point:
/// values and first derivatives of H0 and every h_alpha, all obtained from a
/// single Newton solve through the implicit-function rule.
struct SystemGradients {
    double h0 = 0.0;
    Eigen::VectorXd h;            // m values h_alpha
    Eigen::VectorXd v_regular;    // V^i at the zero degenerate-velocity probe
    Eigen::VectorXd dH0_dq;       // n, by original coordinate index
    Eigen::VectorXd dH0_dp;       // r, by regular slot
    Eigen::MatrixXd dh_dq;        // m x n
    Eigen::MatrixXd dh_dp;        // m x r
};

/// The transformed system for one Lagrangian: resolved regular velocities,
/// the degenerate-direction Hamiltonians h_alpha, the physical Hamiltonian
/// H0, the mixed Clairaut-Hamilton function, and exact first derivatives.
/// Immutable after construction; evaluation keeps per-call scratch only.
class ClairautSystem {
public:
    ClairautSystem() = default;  // empty; assign from build()
    static ClairautSystem build(const Model& model, const Tolerances& tol = {},
                                const Sampling& sampling = {});
    static ClairautSystem build(const Model& model, const std::vector<PhaseSample>& samples,
                                const Tolerances& tol = {});

    const Model& model() const { return *model_; }
    const SymbolTable& symbols() const { return model_->symbols; }
    const IndexSplit& index_split() const { return split_; }
    const SplitDiagnostics& split_diagnostics() const { return split_diag_; }
    const Tolerances& tolerances() const { return tol_; }
    int n() const { return split_.n; }
    int r() const { return split_.rank; }
    int m() const { return split_.degenerate_count(); }

    /// Newton resolution of p_i = dL/dv^i for the regular velocities, with
    /// the degenerate velocities held at v_degenerate.
    ResolveResult resolve_velocities(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& v_degenerate,
                                     const Eigen::VectorXd& guess) const;
    ResolveResult resolve_velocities(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& v_degenerate) const;

    /// h_alpha = -dL/dv^alpha at resolved regular velocities; the value is
    /// computed for the zero probe and cross-checked against a second probe.
    Eigen::VectorXd h_alpha(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const;
    /// Single-probe variant without the independence cross-check.
    Eigen::VectorXd h_alpha(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                            const Eigen::VectorXd& v_probe) const;

    /// The mixed Clairaut-Hamilton function
    /// H_mix = p_i V^i + pbar_alpha v^alpha - L(q, V, v).
    double h_mix(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                 const Eigen::VectorXd& pbar, const Eigen::VectorXd& v_degenerate) const;

    /// Physical Hamiltonian H0 = H_mix - (pbar + h)·v, evaluated at the zero
    /// probes and cross-checked for probe independence.
    double h_physical(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const;
    /// Explicit-probe variant without the cross-check.
    double h_physical(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                      const Eigen::VectorXd& pbar_probe, const Eigen::VectorXd& v_probe) const;

    /// Full Legendre transform p·V - L; only for nonsingular models (r = n).
    double h_standard(const Eigen::VectorXd& q, const Eigen::VectorXd& p_full) const;

    /// General (linear) solution pbar·c - L(q, c); valid for any model.
    double h_general(const Eigen::VectorXd& q, const Eigen::VectorXd& pbar,
                     const Eigen::VectorXd& c) const;

    /// Values and exact first derivatives of H0 and h_alpha at (q, p).
    SystemGradients derivatives(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const;
    SystemGradients derivatives(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& guess) const;

    /// Lagrangian value at a full velocity vector (by original index).
    double lagrangian_value(const Eigen::VectorXd& q, const Eigen::VectorXd& v_full) const;

    /// Scatters (v_regular, v_degenerate) back to original index order.
    Eigen::VectorXd assemble_velocities(const Eigen::VectorXd& v_regular,
                                        const Eigen::VectorXd& v_degenerate) const;

private:
    struct Workspace;
    void bind_point(Workspace& w, const Eigen::VectorXd& q) const;
    void newton(Workspace& w, const Eigen::VectorXd& p, Eigen::VectorXd& v_regular,
                double* residual, int* iterations) const;
    double second_probe_component(int k) const;

    const Model* model_ = nullptr;
    IndexSplit split_;
    SplitDiagnostics split_diag_;
    Tolerances tol_;

    CompiledExpr lagrangian_;
    std::vector<CompiledExpr> dL_dv_;   // n, by original index
    std::vector<CompiledExpr> dL_dq_;   // n
    std::vector<CompiledExpr> w_;       // n*n Hessian entries
    std::vector<CompiledExpr> dL_dvdq_; // n*n, d2L/dv^A dq^B
};

/// Residual of the multidimensional Clairaut equation
///   H - [ pbar·dH/dpbar - L(q, dH/dpbar) ]
/// for an arbitrary candidate H(q, pbar); derivatives by central differences.
double clairaut_residual(const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& H,
                         const ClairautSystem& system, const Eigen::VectorXd& q,
                         const Eigen::VectorXd& pbar, double fd_step = 1e-6);

}  // namespace clairaut
