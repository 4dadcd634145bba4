#include "clairaut/modelfile.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace clairaut {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double parse_number(const std::string& text, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw ModelFileError("expected a number for " + context + ", got \"" + text + "\"");
    return v;
}

// "name = value" pairs, several per line allowed
std::vector<std::pair<std::string, double>> parse_pairs(const std::string& body,
                                                        const std::string& section) {
    std::vector<std::pair<std::string, double>> out;
    std::vector<std::string> toks = tokens(body);
    // re-join tokens split around '='
    std::vector<std::string> flat;
    for (const std::string& t : toks) {
        size_t eq;
        std::string rest = t;
        while ((eq = rest.find('=')) != std::string::npos) {
            if (eq > 0) flat.push_back(rest.substr(0, eq));
            flat.push_back("=");
            rest = rest.substr(eq + 1);
        }
        if (!rest.empty()) flat.push_back(rest);
    }
    if (flat.size() % 3 != 0)
        throw ModelFileError("malformed [" + section + "] section: entries must be name = value");
    for (size_t i = 0; i < flat.size(); i += 3) {
        if (flat[i + 1] != "=")
            throw ModelFileError("malformed entry in [" + section + "] near \"" + flat[i] + "\"");
        out.emplace_back(flat[i], parse_number(flat[i + 2], "[" + section + "] " + flat[i]));
    }
    return out;
}

}  // namespace

ModelSpec parse_model_text(const std::string& text, const std::string& name) {
    ModelSpec spec;
    spec.name = name;
    spec.raw_text = text;

    // split into sections
    std::vector<std::pair<std::string, std::string>> sections;  // name -> body
    std::istringstream in(text);
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '[') {
            size_t close = t.find(']');
            if (close == std::string::npos)
                throw ModelFileError("line " + std::to_string(lineno) + ": unterminated section header");
            std::string sect = trim(t.substr(1, close - 1));
            static const char* known[] = {"coordinates", "parameters", "lagrangian",
                                          "initial",     "gauge",      "integrate",
                                          "options"};
            if (std::find_if(std::begin(known), std::end(known),
                             [&](const char* k) { return sect == k; }) == std::end(known))
                throw ModelFileError("line " + std::to_string(lineno) + ": unknown section [" + sect + "]");
            sections.emplace_back(sect, trim(t.substr(close + 1)));
            current = sect;
        } else {
            if (current.empty())
                throw ModelFileError("line " + std::to_string(lineno) + ": content before any section");
            std::string& body = sections.back().second;
            if (!body.empty()) body += "\n";
            body += t;
        }
    }

    bool have_lagrangian = false, have_coordinates = false;
    for (auto& [sect, body] : sections) {
        if (sect == "coordinates") {
            have_coordinates = true;
            for (const std::string& c : tokens(body)) spec.coordinate_names.push_back(c);
        } else if (sect == "parameters") {
            for (auto& kv : parse_pairs(body, sect)) spec.parameters.push_back(kv);
        } else if (sect == "lagrangian") {
            have_lagrangian = true;
            std::string src = body;
            std::replace(src.begin(), src.end(), '\n', ' ');
            spec.lagrangian_source = trim(src);
        } else if (sect == "initial") {
            for (auto& kv : parse_pairs(body, sect)) spec.initial_entries.push_back(kv);
        } else if (sect == "gauge") {
            std::istringstream gb(body);
            std::string gl;
            while (std::getline(gb, gl)) {
                gl = trim(gl);
                if (gl.empty()) continue;
                size_t eq = gl.find('=');
                if (eq == std::string::npos)
                    throw ModelFileError("[gauge] entries must be velocity = expression, got \"" + gl + "\"");
                spec.gauge_entries.emplace_back(trim(gl.substr(0, eq)), trim(gl.substr(eq + 1)));
            }
        } else if (sect == "integrate") {
            for (auto& [key, value] : parse_pairs(body, sect)) {
                if (key == "t0") spec.window.t0 = value;
                else if (key == "t1") spec.window.t1 = value;
                else if (key == "dt") spec.window.dt = value;
                else throw ModelFileError("unknown key \"" + key + "\" in [integrate]");
            }
        } else if (sect == "options") {
            // values here may be words, so parse key = token triples by hand
            std::vector<std::string> toks = tokens(body);
            std::vector<std::string> flat;
            for (const std::string& t : toks) {
                size_t eq;
                std::string rest = t;
                while ((eq = rest.find('=')) != std::string::npos) {
                    if (eq > 0) flat.push_back(rest.substr(0, eq));
                    flat.push_back("=");
                    rest = rest.substr(eq + 1);
                }
                if (!rest.empty()) flat.push_back(rest);
            }
            if (flat.size() % 3 != 0)
                throw ModelFileError("malformed [options] section: entries must be key = value");
            for (size_t i = 0; i < flat.size(); i += 3) {
                if (flat[i + 1] != "=")
                    throw ModelFileError("malformed [options] entry near \"" + flat[i] + "\"");
                const std::string& key = flat[i];
                const std::string& value = flat[i + 2];
                if (key == "convention") {
                    if (value == "auto") spec.convention = ConventionOption::automatic;
                    else if (value == "A") spec.convention = ConventionOption::A;
                    else if (value == "B") spec.convention = ConventionOption::B;
                    else throw ModelFileError("convention must be auto, A, or B, got \"" + value + "\"");
                } else if (key == "seed") {
                    spec.seed = static_cast<std::uint64_t>(parse_number(value, "[options] seed"));
                } else {
                    throw ModelFileError("unknown key \"" + key + "\" in [options]");
                }
            }
        }
    }

    if (!have_coordinates || spec.coordinate_names.empty())
        throw ModelFileError("model file is missing the [coordinates] section");
    if (!have_lagrangian || spec.lagrangian_source.empty())
        throw ModelFileError("model file is missing the [lagrangian] section");
    return spec;
}

ModelSpec load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFileError("cannot open model file \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string name = path;
    size_t slash = name.find_last_of("/\\");
    if (slash != std::string::npos) name = name.substr(slash + 1);
    size_t dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
    return parse_model_text(buf.str(), name);
}

namespace {

// classify an [initial] key against the coordinate list:
//   plain coordinate name, v<k> / v_<name>, p<k> / p_<name>
enum class KeyKind { coordinate, velocity, momentum };

struct ClassifiedKey {
    KeyKind kind;
    int index;  // 0-based coordinate index
};

ClassifiedKey classify_key(const std::string& key, const std::vector<std::string>& coords) {
    auto coord_index = [&coords](const std::string& name) {
        for (size_t k = 0; k < coords.size(); ++k)
            if (coords[k] == name) return static_cast<int>(k);
        return -1;
    };
    int ci = coord_index(key);
    if (ci >= 0) return {KeyKind::coordinate, ci};
    for (auto [prefix, kind] : {std::pair<char, KeyKind>{'v', KeyKind::velocity},
                                std::pair<char, KeyKind>{'p', KeyKind::momentum}}) {
        if (key.size() >= 2 && key[0] == prefix) {
            std::string rest = key.substr(1);
            if (rest[0] == '_') {
                int idx = coord_index(rest.substr(1));
                if (idx >= 0) return {kind, idx};
            } else if (std::all_of(rest.begin(), rest.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
                int pos = std::stoi(rest) - 1;
                if (pos >= 0 && pos < static_cast<int>(coords.size())) return {kind, pos};
            }
        }
    }
    throw ModelFileError("unknown [initial]/[gauge] key \"" + key +
                         "\" (expected a coordinate, v<k>, v_<name>, p<k>, or p_<name>)");
}

}  // namespace

RunSetup prepare(ModelSpec spec, const Tolerances& tol) {
    RunSetup run;
    run.spec = std::make_shared<const ModelSpec>(std::move(spec));
    const ModelSpec& s = *run.spec;

    auto model = std::make_shared<Model>(
        make_model(s.name, s.coordinate_names, s.lagrangian_source, s.parameters));
    run.model = model;
    Sampling sampling;
    sampling.seed = s.seed;
    run.system = ClairautSystem::build(*model, tol, sampling);
    run.convention = s.convention;

    const IndexSplit& split = run.system.index_split();
    const int n = split.n;
    const int r = split.rank;
    const int m = n - r;

    // --- initial conditions ---
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    std::vector<bool> p_given_slot(static_cast<size_t>(r), false);
    Eigen::VectorXd p_slots = Eigen::VectorXd::Zero(r);
    bool any_p = false, any_v = false;
    for (const auto& [key, value] : s.initial_entries) {
        ClassifiedKey ck = classify_key(key, s.coordinate_names);
        switch (ck.kind) {
            case KeyKind::coordinate: q(ck.index) = value; break;
            case KeyKind::velocity:
                any_v = true;
                v(ck.index) = value;
                break;
            case KeyKind::momentum: {
                any_p = true;
                int slot = -1;
                for (int i = 0; i < r; ++i)
                    if (split.regular(i) == ck.index) slot = i;
                if (slot < 0)
                    throw ModelFileError("initial momentum \"" + key +
                                         "\" refers to a degenerate coordinate; only regular momenta "
                                         "exist on the restricted phase space");
                p_slots(slot) = value;
                p_given_slot[static_cast<size_t>(slot)] = true;
                break;
            }
        }
    }

    run.initial.t = s.window.t0;
    run.initial.q = q;
    run.initial_regular_guess = Eigen::VectorXd::Zero(r);
    if (any_p) {
        for (int i = 0; i < r; ++i)
            if (!p_given_slot[static_cast<size_t>(i)])
                throw ModelFileError("initial conditions use momenta but p_" +
                                     s.coordinate_names[static_cast<size_t>(split.regular(i))] +
                                     " is missing");
        run.initial.p = p_slots;
        // degenerate v entries, if present, seed nothing but are accepted
        for (int i = 0; i < r; ++i) run.initial_regular_guess(i) = v(split.regular(i));
    } else {
        // momenta from the supremum condition p_i = dL/dv^i at t0
        const SymbolTable& st = model->symbols;
        EvalContext ctx(st);
        ctx.bind_coordinates(std::span<const double>(q.data(), static_cast<size_t>(q.size())));
        ctx.bind_velocities(std::span<const double>(v.data(), static_cast<size_t>(v.size())));
        run.initial.p.resize(r);
        for (int i = 0; i < r; ++i) {
            Expression dLdv = model->lagrangian.diff(st.velocity_id(split.regular(i)));
            run.initial.p(i) = dLdv.eval(ctx);
            run.initial_regular_guess(i) = v(split.regular(i));
        }
        (void)any_v;
    }

    // --- gauge ---
    if (!s.gauge_entries.empty()) {
        GaugeChoice g;
        g.provided = true;
        g.velocity.assign(static_cast<size_t>(m), Expression::constant(0.0));
        for (const auto& [key, source] : s.gauge_entries) {
            ClassifiedKey ck = classify_key(key, s.coordinate_names);
            if (ck.kind != KeyKind::velocity)
                throw ModelFileError("[gauge] keys must be velocities, got \"" + key + "\"");
            int slot = -1;
            for (int a = 0; a < m; ++a)
                if (split.degenerate(a) == ck.index) slot = a;
            if (slot < 0)
                throw ModelFileError("[gauge] entry \"" + key +
                                     "\" refers to a regular velocity; only degenerate velocities "
                                     "admit gauge choices");
            g.velocity[static_cast<size_t>(slot)] = parse(source, model->symbols, kGaugeSymbols);
        }
        run.gauge = std::move(g);
    }

    // gauge bookkeeping at the initial point
    if (m > 0) {
        SystemGradients grad = run.system.derivatives(run.initial.q, run.initial.p,
                                                      run.initial_regular_guess);
        Eigen::MatrixXd F = curvature_F(run.system, grad);
        FInverse inv = invert_F(F, tol.rank_relative);
        if (inv.full_rank && run.gauge.provided)
            run.warnings.push_back("gauge ignored: curvature F has full rank at the initial point");
        if (!inv.full_rank && !run.gauge.provided) {
            run.warnings.push_back("no [gauge] section: defaulting " +
                                   std::to_string(m - inv.rank) +
                                   " kernel velocity component(s) to 0");
            run.gauge = GaugeChoice::zero(m);
        }
    }
    return run;
}

std::string content_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace clairaut
