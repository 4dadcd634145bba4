#pragma once

#include <string>
#include <vector>

#include "clairaut/modelfile.hpp"

namespace clairaut {

struct CorpusEntry {
    std::string name;
    std::string text;
};

/// Built-in model corpus used by the verify suite and shipped under models/
/// as files with identical content:
///   free_particle   L = 1/2 v^2
///   oscillator      L = 1/2 v^2 - 1/2 q^2
///   quartic         L = 1/4 v^4
///   rank1_gauge     L = 1/2 (v1 - q2)^2          (rank 1, F = 0, one gauge dof)
///   first_order     L = 1/2 (q2 v1 - q1 v2) - V  (rank 0, invertible F)
///   first_order_4d  two symplectic pairs, invertible 4x4 F
///   mixed_rank1     rank 1 with two degenerate directions and invertible F;
///                   the witness model for the non-Lie bracket properties
const std::vector<CorpusEntry>& builtin_corpus();

ModelSpec corpus_spec(const std::string& name);
std::vector<RunSetup> prepare_corpus(const Tolerances& tol = {});

}  // namespace clairaut
