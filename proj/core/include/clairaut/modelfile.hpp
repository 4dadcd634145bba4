#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "clairaut/evolution.hpp"
#include "clairaut/transform.hpp"

namespace clairaut {

struct IntegrationWindow {
    double t0 = 0.0;
    double t1 = 10.0;
    double dt = 1e-3;
};

enum class ConventionOption { automatic, A, B };

/// Parsed model file. Sections: [coordinates], [parameters], [lagrangian],
/// [initial], [gauge], [integrate], [options]; '#' starts a line comment.
/// Initial conditions are either (q, v) over the full velocity space or
/// (q, p_i, v^alpha); velocity keys are spelled v<k> (1-based position) or
/// v_<coordinate>, momentum keys p<k> or p_<coordinate>. Gauge entries are
/// one per line: a degenerate velocity key, '=', and an expression in
/// (t, q, p). Unknown sections and keys are rejected.
struct ModelSpec {
    std::string name;
    std::vector<std::string> coordinate_names;
    std::vector<std::pair<std::string, double>> parameters;
    std::string lagrangian_source;
    std::vector<std::pair<std::string, double>> initial_entries;       // raw key = value
    std::vector<std::pair<std::string, std::string>> gauge_entries;    // velocity key = source
    IntegrationWindow window;
    ConventionOption convention = ConventionOption::automatic;
    std::uint64_t seed = 42;
    std::string raw_text;
};

ModelSpec parse_model_text(const std::string& text, const std::string& name);
ModelSpec load_model(const std::string& path);

/// A spec made runnable: built system, converted initial state, resolved
/// gauge. `warnings` collects non-fatal issues (ignored gauge, defaulted
/// gauge, ...).
struct RunSetup {
    std::shared_ptr<const ModelSpec> spec;
    std::shared_ptr<const Model> model;
    ClairautSystem system;
    PhasePoint initial;
    Eigen::VectorXd initial_regular_guess;  // Newton warm start from given velocities
    GaugeChoice gauge;
    ConventionOption convention = ConventionOption::automatic;
    std::vector<std::string> warnings;

    const std::string& name() const { return spec->name; }
};

RunSetup prepare(ModelSpec spec, const Tolerances& tol = {});

/// FNV-1a 64-bit content hash, hex-encoded; identifies the model text in
/// output metadata.
std::string content_hash(const std::string& text);

}  // namespace clairaut
