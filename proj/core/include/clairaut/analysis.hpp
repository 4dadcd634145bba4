#pragma once

#include <Eigen/Dense>
#include <vector>

#include "clairaut/config.hpp"
#include "clairaut/expr.hpp"

namespace clairaut {

/// One point of velocity phase space (q, v), where the Hessian is evaluated.
struct PhaseSample {
    Eigen::VectorXd q;
    Eigen::VectorXd v;
};

/// The velocity Hessian W_AB = d2L/dv^A dv^B as a field of expressions.
class HessianField {
public:
    HessianField(const Model& model);

    int n() const { return n_; }
    Eigen::MatrixXd eval(const PhaseSample& at) const;
    const Expression& entry(int a, int b) const { return entries_[static_cast<size_t>(a * n_ + b)]; }
    const Model& model() const { return *model_; }

private:
    const Model* model_;
    int n_;
    std::vector<Expression> entries_;
    std::vector<CompiledExpr> compiled_;
};

/// Partition of coordinate indices into regular (leading r, invertible
/// Hessian minor) and degenerate (trailing n-r) sets.
struct IndexSplit {
    int n = 0;
    int rank = 0;
    std::vector<int> permutation;  // original 0-based indices; first `rank` are regular

    int degenerate_count() const { return n - rank; }
    int regular(int i) const { return permutation[static_cast<size_t>(i)]; }
    int degenerate(int a) const { return permutation[static_cast<size_t>(rank + a)]; }
    bool is_identity() const;
};

struct SplitDiagnostics {
    double condition_number = 0.0;   // worst cond(W_regular) over the samples
    double min_minor_sigma = 0.0;    // smallest singular value of the minor seen
    double inversion_residual = 0.0; // worst ||W_rr * inv(W_rr) - I||_inf over the samples
};

/// Numerical rank at one point: singular values above rel_tol * sigma_max.
int rank_at(const HessianField& W, const PhaseSample& at, double rel_tol);

/// Default sample points: `sampling.count` points, every q and v component
/// uniform in [sampling.lo, sampling.hi], deterministic in the seed.
std::vector<PhaseSample> default_samples(int n, const Sampling& sampling = {});

/// Decide the constant rank over the samples and pick a permutation whose
/// leading minor is invertible at all of them. Column pivoting happens at the
/// first sample; ties prefer the lowest original index. Throws
/// RankNotConstantError or SplitUnstableError.
IndexSplit split(const HessianField& W, const std::vector<PhaseSample>& samples,
                 double rel_tol, SplitDiagnostics* diagnostics = nullptr);

}  // namespace clairaut
