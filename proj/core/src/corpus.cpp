#include "clairaut/corpus.hpp"

namespace clairaut {

const std::vector<CorpusEntry>& builtin_corpus() {
    static const std::vector<CorpusEntry> corpus = {
        {"free_particle",
         "[coordinates] q1\n"
         "[lagrangian]  0.5*d(q1)^2\n"
         "[initial]     q1 = 0  v1 = 1\n"
         "[integrate]   t0 = 0  t1 = 10  dt = 1e-3\n"},
        {"oscillator",
         "[coordinates] q1\n"
         "[lagrangian]  0.5*d(q1)^2 - 0.5*q1^2\n"
         "[initial]     q1 = 1  v1 = 0\n"
         "[integrate]   t0 = 0  t1 = 10  dt = 1e-3\n"},
        {"quartic",
         "[coordinates] q1\n"
         "[lagrangian]  0.25*d(q1)^4\n"
         "[initial]     q1 = 0  v1 = 1\n"
         "[integrate]   t0 = 0  t1 = 1  dt = 1e-3\n"},
        {"rank1_gauge",
         "[coordinates] q1 q2\n"
         "[lagrangian]  0.5*(d(q1) - q2)^2\n"
         "# p1 = v1 - q2 = 0: the only surface where the degenerate equation is consistent\n"
         "[initial]     q1 = 0  q2 = 1  v1 = 1  v2 = 0\n"
         "[gauge]       v2 = 0\n"
         "[integrate]   t0 = 0  t1 = 10  dt = 1e-3\n"},
        {"first_order",
         "[coordinates] q1 q2\n"
         "[lagrangian]  0.5*(q2*d(q1) - q1*d(q2)) - 0.5*(q1^2 + q2^2)\n"
         "[initial]     q1 = 1  q2 = 0\n"
         "[integrate]   t0 = 0  t1 = 10  dt = 1e-3\n"},
        {"first_order_4d",
         "[coordinates] q1 q2 q3 q4\n"
         "[lagrangian]  0.5*(q2*d(q1) - q1*d(q2)) + 0.5*(q4*d(q3) - q3*d(q4))"
         " - 0.5*(q1^2 + q2^2 + q3^2 + q4^2)\n"
         "[initial]     q1 = 1  q2 = 0  q3 = 0.5  q4 = -0.5\n"
         "[integrate]   t0 = 0  t1 = 10  dt = 1e-3\n"},
        {"mixed_rank1",
         "[coordinates] q1 q2 q3\n"
         "[lagrangian]  0.5*(2*d(q1) + q3*d(q2) + 2*q2*d(q3))^2 - 0.5*(q2^2 + q3^2)\n"
         "# p1 = 2, so the 2x2 curvature F23 = p1/2 stays invertible along the run\n"
         "[initial]     q1 = 0  q2 = 1  q3 = 0  v1 = 0.5  v2 = 0  v3 = 0\n"
         "[integrate]   t0 = 0  t1 = 10  dt = 1e-3\n"},
    };
    return corpus;
}

ModelSpec corpus_spec(const std::string& name) {
    for (const CorpusEntry& e : builtin_corpus())
        if (e.name == name) return parse_model_text(e.text, e.name);
    throw ModelFileError("no built-in model named \"" + name + "\"");
}

std::vector<RunSetup> prepare_corpus(const Tolerances& tol) {
    std::vector<RunSetup> out;
    out.reserve(builtin_corpus().size());
    for (const CorpusEntry& e : builtin_corpus()) out.push_back(prepare(parse_model_text(e.text, e.name), tol));
    return out;
}

}  // namespace clairaut
