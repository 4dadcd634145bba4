#include "clairaut/metadata.hpp"

#include <json.hpp>

namespace clairaut {

RunMetadata collect_metadata(const RunSetup& run, Convention convention) {
    RunMetadata meta;
    const ModelSpec& spec = *run.spec;
    const IndexSplit& split = run.system.index_split();
    meta.model = spec.name;
    meta.hash = content_hash(spec.raw_text);
    meta.n = split.n;
    meta.r = split.rank;
    for (int k = 0; k < split.n; ++k) meta.permutation.push_back(split.permutation[static_cast<size_t>(k)] + 1);
    for (int i = 0; i < split.rank; ++i)
        meta.regular.push_back(spec.coordinate_names[static_cast<size_t>(split.regular(i))]);
    for (int a = 0; a < split.degenerate_count(); ++a)
        meta.degenerate.push_back(spec.coordinate_names[static_cast<size_t>(split.degenerate(a))]);

    const int m = split.degenerate_count();
    meta.rank_F = 0;
    if (m > 0) {
        DeterministicRng rng(spec.seed + 1);
        for (int s = 0; s < 8; ++s) {
            Eigen::VectorXd q(split.n), p(split.rank);
            for (int k = 0; k < split.n; ++k) q(k) = rng.uniform(-1.0, 1.0);
            for (int i = 0; i < split.rank; ++i) p(i) = rng.uniform(-1.0, 1.0);
            try {
                Eigen::MatrixXd F = curvature_F(run.system, q, p);
                FInverse inv = invert_F(F, run.system.tolerances().rank_relative);
                meta.rank_F = std::max(meta.rank_F, inv.rank);
            } catch (const Error&) {
                // resolution may fail at exotic sample points; rank_F is the max over the rest
            }
        }
    }
    meta.gauge_count = split.n - split.rank - meta.rank_F;
    meta.convention = to_string(convention);
    meta.seed = spec.seed;
    meta.tolerances = run.system.tolerances();
    return meta;
}

std::string metadata_json(const RunMetadata& meta, int indent) {
    nlohmann::ordered_json j;
    j["model"] = meta.model;
    j["hash"] = meta.hash;
    j["tool_version"] = kToolVersion;
    j["n"] = meta.n;
    j["r"] = meta.r;
    j["permutation"] = meta.permutation;
    j["regular"] = meta.regular;
    j["degenerate"] = meta.degenerate;
    j["rank_F"] = meta.rank_F;
    j["gauge_count"] = meta.gauge_count;
    j["convention"] = meta.convention;
    j["seed"] = meta.seed;
    nlohmann::ordered_json tol;
    tol["newton_residual"] = meta.tolerances.newton_residual;
    tol["newton_max_iterations"] = meta.tolerances.newton_max_iterations;
    tol["rank_relative"] = meta.tolerances.rank_relative;
    tol["independence"] = meta.tolerances.independence;
    tol["f_inverse"] = meta.tolerances.f_inverse;
    tol["image_consistency"] = meta.tolerances.image_consistency;
    tol["fd_step"] = meta.tolerances.fd_step;
    tol["el_residual"] = meta.tolerances.el_residual;
    j["tolerances"] = tol;
    return indent >= 0 ? j.dump(indent) : j.dump();
}

}  // namespace clairaut
