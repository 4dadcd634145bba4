#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "clairaut/transform.hpp"

namespace clairaut {

/// Index-contraction convention for the inverse curvature. The antisymmetry
/// of F leaves an overall sign open; the verification layer selects the
/// convention that zeroes the Euler-Lagrange residual.
///   A: v^a = sum_b inv(F)(a,b) D_b H0   (direct solve of F v = D)
///   B: v^a = sum_b D_b H0 inv(F)(b,a)   (transposed contraction)
enum class Convention { A, B };

inline const char* to_string(Convention c) { return c == Convention::A ? "A" : "B"; }

struct ObservableGradient {
    Eigen::VectorXd dq;  // n, by original coordinate index
    Eigen::VectorXd dp;  // r, by regular slot
};

/// A scalar function of the restricted phase space (q, p_i) with gradient
/// access. Gradients are analytic where available and central finite
/// differences otherwise.
class Observable {
public:
    using ValueFn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
    using GradFn = std::function<ObservableGradient(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

    Observable() = default;
    Observable(std::string name, ValueFn value, GradFn gradient)
        : name_(std::move(name)), value_(std::move(value)), grad_(std::move(gradient)) {}

    /// Expression over coordinates, regular momenta, and parameters.
    static Observable from_expression(const ClairautSystem& sys, const Expression& e,
                                      std::string name = "");
    static Observable from_source(const ClairautSystem& sys, std::string_view source);
    static Observable h0(const ClairautSystem& sys);
    static Observable h_component(const ClairautSystem& sys, int alpha_slot);
    static Observable coordinate(const ClairautSystem& sys, int original_index);
    static Observable momentum(const ClairautSystem& sys, int regular_slot);
    /// Arbitrary value function; gradient by central differences.
    static Observable numeric(const ClairautSystem& sys, std::string name, ValueFn value,
                              double fd_step = 1e-6);

    double value(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const { return value_(q, p); }
    ObservableGradient gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
        return grad_(q, p);
    }
    const std::string& name() const { return name_; }

    Observable operator*(const Observable& other) const;
    Observable operator+(const Observable& other) const;

private:
    std::string name_;
    ValueFn value_;
    GradFn grad_;
};

/// Regular Poisson bracket: the sum runs over regular indices only and is
/// empty (zero) when r = 0.
double poisson(const Observable& X, const Observable& Y, const ClairautSystem& sys,
               const Eigen::VectorXd& q, const Eigen::VectorXd& p);

/// q^alpha-total derivative D_alpha X = dX/dq^alpha + {X, h_alpha}.
double d_alpha(const Observable& X, int alpha_slot, const ClairautSystem& sys,
               const Eigen::VectorXd& q, const Eigen::VectorXd& p);

/// Curvature F_ab = dh_a/dq^b - dh_b/dq^a + {h_a, h_b}, an antisymmetric
/// (n-r) x (n-r) matrix field on the restricted phase space.
Eigen::MatrixXd curvature_F(const ClairautSystem& sys, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& p);
Eigen::MatrixXd curvature_F(const ClairautSystem& sys, const SystemGradients& g);

/// Inverse / pseudo-inverse of an antisymmetric matrix, with its rank and an
/// orthonormal kernel basis. Rank deficiency is data, not an error.
struct FInverse {
    Eigen::MatrixXd inverse;  // exact inverse when full_rank, else pseudo-inverse on the image
    Eigen::MatrixXd kernel;   // m x (m - rank), orthonormal columns
    int rank = 0;
    bool full_rank = false;
};

FInverse invert_F(const Eigen::MatrixXd& F, double rel_tol);

/// The F-bracket {X,Y} + {X,h_a} Finv(a,b) D_b Y. Requires full-rank F
/// unless `require_full_rank` is false, in which case kernel contributions
/// are projected out via the pseudo-inverse.
double bracket_F(const Observable& X, const Observable& Y, const ClairautSystem& sys,
                 const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                 Convention convention = Convention::A, bool require_full_rank = true);

}  // namespace clairaut
