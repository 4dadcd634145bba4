#pragma once

#include <optional>
#include <string>

#include "clairaut/bracket.hpp"
#include "clairaut/modelfile.hpp"

namespace clairaut {

inline constexpr const char* kToolVersion = "0.1.0";

/// Reproducibility record emitted with every output artifact.
struct RunMetadata {
    std::string model;
    std::string hash;
    int n = 0;
    int r = 0;
    std::vector<int> permutation;          // 1-based
    std::vector<std::string> regular;      // coordinate names
    std::vector<std::string> degenerate;
    int rank_F = 0;                        // at the metadata sample points
    int gauge_count = 0;
    std::string convention;                // "A" or "B"
    std::uint64_t seed = 42;
    Tolerances tolerances;
};

/// rank_F evaluated at deterministic random phase points (seed + 1); reports
/// the maximal rank seen, which is the generic rank of the curvature.
RunMetadata collect_metadata(const RunSetup& run, Convention convention);

std::string metadata_json(const RunMetadata& meta, int indent = -1);

}  // namespace clairaut
