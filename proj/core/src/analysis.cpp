#include "clairaut/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace clairaut {

HessianField::HessianField(const Model& model) : model_(&model), n_(model.symbols.n()) {
    entries_.reserve(static_cast<size_t>(n_ * n_));
    compiled_.reserve(static_cast<size_t>(n_ * n_));
    for (int a = 0; a < n_; ++a) {
        Expression dva = model.lagrangian.diff(model.symbols.velocity_id(a));
        for (int b = 0; b < n_; ++b) {
            Expression w = dva.diff(model.symbols.velocity_id(b));
            compiled_.emplace_back(w, model.symbols);
            entries_.push_back(std::move(w));
        }
    }
}

Eigen::MatrixXd HessianField::eval(const PhaseSample& at) const {
    EvalContext ctx(model_->symbols);
    ctx.bind_coordinates(std::span<const double>(at.q.data(), static_cast<size_t>(at.q.size())));
    ctx.bind_velocities(std::span<const double>(at.v.data(), static_cast<size_t>(at.v.size())));
    Eigen::MatrixXd W(n_, n_);
    for (int a = 0; a < n_; ++a)
        for (int b = 0; b < n_; ++b)
            W(a, b) = compiled_[static_cast<size_t>(a * n_ + b)].eval(ctx);
    return W;
}

bool IndexSplit::is_identity() const {
    for (int k = 0; k < n; ++k)
        if (permutation[static_cast<size_t>(k)] != k) return false;
    return true;
}

int rank_at(const HessianField& W, const PhaseSample& at, double rel_tol) {
    Eigen::MatrixXd M = W.eval(at);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sigma = svd.singularValues();
    if (sigma.size() == 0 || sigma(0) == 0.0) return 0;
    int r = 0;
    for (int k = 0; k < sigma.size(); ++k)
        if (sigma(k) > rel_tol * sigma(0)) ++r;
    return r;
}

std::vector<PhaseSample> default_samples(int n, const Sampling& sampling) {
    DeterministicRng rng(sampling.seed);
    std::vector<PhaseSample> out;
    out.reserve(static_cast<size_t>(sampling.count));
    for (int s = 0; s < sampling.count; ++s) {
        PhaseSample p;
        p.q.resize(n);
        p.v.resize(n);
        for (int k = 0; k < n; ++k) p.q(k) = rng.uniform(sampling.lo, sampling.hi);
        for (int k = 0; k < n; ++k) p.v(k) = rng.uniform(sampling.lo, sampling.hi);
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

// Greedy column-pivoted selection of `rank` columns of the symmetric matrix
// M. For a symmetric matrix any linearly independent column set yields a
// nonsingular principal minor, so selecting columns is enough. Ties go to the
// lowest original index.
std::vector<int> pivot_columns(const Eigen::MatrixXd& M, int rank) {
    const int n = static_cast<int>(M.cols());
    std::vector<Eigen::VectorXd> residual(static_cast<size_t>(n));
    for (int c = 0; c < n; ++c) residual[static_cast<size_t>(c)] = M.col(c);
    std::vector<bool> used(static_cast<size_t>(n), false);
    std::vector<int> chosen;
    for (int step = 0; step < rank; ++step) {
        int best = -1;
        double best_norm = -1.0;
        for (int c = 0; c < n; ++c) {
            if (used[static_cast<size_t>(c)]) continue;
            double nrm = residual[static_cast<size_t>(c)].norm();
            if (nrm > best_norm) {
                best_norm = nrm;
                best = c;
            }
        }
        used[static_cast<size_t>(best)] = true;
        chosen.push_back(best);
        Eigen::VectorXd dir = residual[static_cast<size_t>(best)];
        double nn = dir.squaredNorm();
        if (nn == 0.0) break;
        for (int c = 0; c < n; ++c) {
            if (used[static_cast<size_t>(c)]) continue;
            auto& rc = residual[static_cast<size_t>(c)];
            rc -= dir * (dir.dot(rc) / nn);
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

}  // namespace

IndexSplit split(const HessianField& W, const std::vector<PhaseSample>& samples,
                 double rel_tol, SplitDiagnostics* diagnostics) {
    if (samples.empty()) throw RankNotConstantError("rank decision requires at least one sample point");
    const int n = W.n();

    const int r = rank_at(W, samples[0], rel_tol);
    for (size_t s = 1; s < samples.size(); ++s) {
        int rs = rank_at(W, samples[s], rel_tol);
        if (rs != r)
            throw RankNotConstantError("Hessian rank is not constant over the sample points: rank " +
                                       std::to_string(r) + " at sample 0 vs rank " + std::to_string(rs) +
                                       " at sample " + std::to_string(s));
    }

    IndexSplit out;
    out.n = n;
    out.rank = r;
    std::vector<int> regular = pivot_columns(W.eval(samples[0]), r);
    out.permutation = regular;
    for (int k = 0; k < n; ++k)
        if (std::find(regular.begin(), regular.end(), k) == regular.end()) out.permutation.push_back(k);

    SplitDiagnostics diag;
    diag.min_minor_sigma = std::numeric_limits<double>::infinity();
    for (size_t s = 0; s < samples.size(); ++s) {
        Eigen::MatrixXd M = W.eval(samples[s]);
        Eigen::MatrixXd minor(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) minor(i, j) = M(regular[static_cast<size_t>(i)], regular[static_cast<size_t>(j)]);
        if (r == 0) continue;
        Eigen::JacobiSVD<Eigen::MatrixXd> full(M);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(minor, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double sigma_max_full = full.singularValues()(0);
        const double sigma_min = svd.singularValues()(r - 1);
        if (!(sigma_min > rel_tol * sigma_max_full))
            throw SplitUnstableError("chosen Hessian minor is singular at sample " + std::to_string(s) +
                                     " (sigma_min " + std::to_string(sigma_min) + ")");
        diag.condition_number = std::max(diag.condition_number, svd.singularValues()(0) / sigma_min);
        diag.min_minor_sigma = std::min(diag.min_minor_sigma, sigma_min);
        Eigen::MatrixXd identity_residual =
            minor * minor.inverse() - Eigen::MatrixXd::Identity(r, r);
        diag.inversion_residual =
            std::max(diag.inversion_residual, identity_residual.cwiseAbs().maxCoeff());
    }
    if (r == 0) diag.min_minor_sigma = 0.0;
    if (diagnostics) *diagnostics = diag;
    return out;
}

}  // namespace clairaut
