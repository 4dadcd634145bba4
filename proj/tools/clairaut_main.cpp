// Command-line front end: analyze | transform | evolve | verify over model
// files in the bracketed-section format (see README).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <clairaut/corpus.hpp>
#include <clairaut/metadata.hpp>
#include <clairaut/verification.hpp>

using namespace clairaut;

namespace {

std::string format_value(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::parse, "cannot write to \"" + path + "\"");
    out << text;
}

void print_warnings(const RunSetup& run) {
    for (const std::string& w : run.warnings) std::cerr << "warning: " << w << "\n";
}

Convention resolve_convention(ConventionOption opt) {
    if (opt == ConventionOption::A) return Convention::A;
    if (opt == ConventionOption::B) return Convention::B;
    static std::optional<Convention> calibrated;
    if (!calibrated) calibrated = calibrate_convention(prepare_corpus());
    return *calibrated;
}

// --- analyze ---------------------------------------------------------------

int run_analyze(const std::string& model_path, const std::string& out_path, bool pretty) {
    RunSetup run = prepare(load_model(model_path));
    print_warnings(run);
    Convention conv = resolve_convention(run.convention);
    RunMetadata meta = collect_metadata(run, conv);

    nlohmann::ordered_json j;
    j["model"] = meta.model;
    j["n"] = meta.n;
    j["r"] = meta.r;
    j["regular"] = meta.regular;
    j["degenerate"] = meta.degenerate;
    j["condition_number"] = run.system.split_diagnostics().condition_number;
    j["rank_F"] = meta.rank_F;
    j["gauge_count"] = meta.gauge_count;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    Sampling sampling;
    sampling.seed = run.spec->seed;
    for (const PhaseSample& s : default_samples(meta.n, sampling)) {
        nlohmann::ordered_json pt;
        pt["q"] = std::vector<double>(s.q.data(), s.q.data() + s.q.size());
        pt["v"] = std::vector<double>(s.v.data(), s.v.data() + s.v.size());
        pts.push_back(pt);
    }
    j["sample_points"] = pts;
    j["metadata"] = nlohmann::ordered_json::parse(metadata_json(meta));
    emit(j.dump(pretty ? 2 : -1) + "\n", out_path);
    return 0;
}

// --- transform --------------------------------------------------------------

struct GridSpec {
    double lo = -1.0, hi = 1.0;
    int count = 5;
};

GridSpec parse_grid(const std::string& text) {
    GridSpec g;
    if (text.empty()) return g;
    double lo, hi;
    int count;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 2 || !(hi > lo))
        throw Error(ErrorCode::parse, "grid must be lo:hi:count with count >= 2, got \"" + text + "\"");
    g.lo = lo;
    g.hi = hi;
    g.count = count;
    return g;
}

// polynomial total degree over all symbols, or -1 for non-polynomial trees
int polynomial_degree(const ExprNode& node) {
    switch (node.op) {
        case ExprOp::constant: return 0;
        case ExprOp::symbol: return 1;
        case ExprOp::neg: return polynomial_degree(*node.lhs);
        case ExprOp::add:
        case ExprOp::sub: {
            int a = polynomial_degree(*node.lhs), b = polynomial_degree(*node.rhs);
            return (a < 0 || b < 0) ? -1 : std::max(a, b);
        }
        case ExprOp::mul: {
            int a = polynomial_degree(*node.lhs), b = polynomial_degree(*node.rhs);
            return (a < 0 || b < 0) ? -1 : a + b;
        }
        case ExprOp::pow: {
            int a = polynomial_degree(*node.lhs);
            return (a < 0 || node.exponent < 0) ? -1 : a * node.exponent;
        }
        case ExprOp::div: {
            int b = polynomial_degree(*node.rhs);
            if (b != 0) return -1;
            return polynomial_degree(*node.lhs);
        }
        default: return -1;
    }
}

// polynomial degree counting velocity symbols only; -1 when velocities enter
// non-polynomially
int velocity_degree(const ExprNode& n, const SymbolTable& st) {
    switch (n.op) {
        case ExprOp::constant: return 0;
        case ExprOp::symbol: return st.kind(n.symbol) == SymbolKind::velocity ? 1 : 0;
        case ExprOp::neg: return velocity_degree(*n.lhs, st);
        case ExprOp::add:
        case ExprOp::sub: {
            int a = velocity_degree(*n.lhs, st), b = velocity_degree(*n.rhs, st);
            return (a < 0 || b < 0) ? -1 : std::max(a, b);
        }
        case ExprOp::mul: {
            int a = velocity_degree(*n.lhs, st), b = velocity_degree(*n.rhs, st);
            return (a < 0 || b < 0) ? -1 : a + b;
        }
        case ExprOp::pow: {
            int a = velocity_degree(*n.lhs, st);
            if (a < 0 || n.exponent < 0) return -1;
            return a * n.exponent;
        }
        case ExprOp::div: {
            int b = velocity_degree(*n.rhs, st);
            if (b != 0) return -1;
            return velocity_degree(*n.lhs, st);
        }
        default: {
            int a = velocity_degree(*n.lhs, st);
            return a == 0 ? 0 : -1;
        }
    }
}

void enumerate_monomials(int dims, int degree_left, std::vector<int>& current,
                         std::vector<std::vector<int>>& out) {
    if (static_cast<int>(current.size()) == dims) {
        out.push_back(current);
        return;
    }
    for (int e = 0; e <= degree_left; ++e) {
        current.push_back(e);
        enumerate_monomials(dims, degree_left - e, current, out);
        current.pop_back();
    }
}

struct PolynomialFit {
    std::string rendered;
    double max_residual = 0.0;
};

PolynomialFit fit_polynomial(const std::vector<Eigen::VectorXd>& points,
                             const std::vector<double>& values,
                             const std::vector<std::string>& var_names, int degree) {
    const int d = static_cast<int>(var_names.size());
    std::vector<std::vector<int>> monomials;
    std::vector<int> scratch;
    enumerate_monomials(d, degree, scratch, monomials);

    Eigen::MatrixXd A(static_cast<int>(points.size()), static_cast<int>(monomials.size()));
    for (size_t row = 0; row < points.size(); ++row)
        for (size_t col = 0; col < monomials.size(); ++col) {
            double term = 1.0;
            for (int k = 0; k < d; ++k)
                for (int e = 0; e < monomials[col][static_cast<size_t>(k)]; ++e)
                    term *= points[row](k);
            A(static_cast<int>(row), static_cast<int>(col)) = term;
        }
    Eigen::VectorXd b(static_cast<int>(values.size()));
    for (size_t k = 0; k < values.size(); ++k) b(static_cast<int>(k)) = values[k];
    Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);

    PolynomialFit fit;
    fit.max_residual = (A * coef - b).cwiseAbs().maxCoeff();
    std::string s;
    for (size_t col = 0; col < monomials.size(); ++col) {
        const double c = coef(static_cast<int>(col));
        if (std::abs(c) <= 1e-8) continue;
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.10g", c);
        std::string term = buf;
        for (int k = 0; k < d; ++k) {
            const int e = monomials[col][static_cast<size_t>(k)];
            if (e == 0) continue;
            term += "*" + var_names[static_cast<size_t>(k)];
            if (e > 1) term += "^" + std::to_string(e);
        }
        if (!s.empty()) s += " + ";
        s += term;
    }
    if (s.empty()) s = "0";
    fit.rendered = s;
    return fit;
}

int run_transform(const std::string& model_path, const std::string& grid_text,
                  const std::string& out_path) {
    RunSetup run = prepare(load_model(model_path));
    print_warnings(run);
    Convention conv = resolve_convention(run.convention);
    const ClairautSystem& sys = run.system;
    const IndexSplit& split = sys.index_split();
    const int n = sys.n();
    const int r = sys.r();
    const int m = sys.m();
    GridSpec grid = parse_grid(grid_text);

    const int dims = n + r;
    double total = 1;
    for (int k = 0; k < dims; ++k) total *= grid.count;
    if (total > 100000)
        throw Error(ErrorCode::parse, "grid has " + std::to_string(static_cast<long long>(total)) +
                                          " points over " + std::to_string(dims) +
                                          " variables; use a smaller count");

    std::vector<std::string> var_names;
    for (int k = 0; k < n; ++k) var_names.push_back(sys.symbols().coordinates()[static_cast<size_t>(k)]);
    for (int i = 0; i < r; ++i)
        var_names.push_back("p_" + sys.symbols().coordinates()[static_cast<size_t>(split.regular(i))]);

    std::string out;
    out += "# metadata: " + metadata_json(collect_metadata(run, conv)) + "\n";
    out += "# columns:";
    for (const std::string& v : var_names) out += " " + v;
    out += " H0";
    for (int a = 0; a < m; ++a)
        out += " h_" + sys.symbols().coordinates()[static_cast<size_t>(split.degenerate(a))];
    out += "\n";

    std::vector<Eigen::VectorXd> grid_points;
    std::vector<double> h0_values;
    std::vector<std::vector<double>> h_values(static_cast<size_t>(m));
    std::vector<int> index(static_cast<size_t>(dims), 0);
    const double step = (grid.hi - grid.lo) / (grid.count - 1);
    bool done = false;
    while (!done) {
        Eigen::VectorXd x(dims);
        for (int k = 0; k < dims; ++k) x(k) = grid.lo + step * index[static_cast<size_t>(k)];
        Eigen::VectorXd q = x.head(n), p = x.tail(r);
        SystemGradients g = sys.derivatives(q, p);
        grid_points.push_back(x);
        h0_values.push_back(g.h0);
        for (int a = 0; a < m; ++a) h_values[static_cast<size_t>(a)].push_back(g.h(a));
        std::string row;
        for (int k = 0; k < dims; ++k) row += (k ? " " : "") + format_value(x(k));
        row += " " + format_value(g.h0);
        for (int a = 0; a < m; ++a) row += " " + format_value(g.h(a));
        out += row + "\n";

        int k = dims - 1;
        while (k >= 0 && ++index[static_cast<size_t>(k)] == grid.count) {
            index[static_cast<size_t>(k)] = 0;
            --k;
        }
        done = k < 0;
    }

    const int lag_degree = polynomial_degree(run.model->lagrangian.root());
    const int v_degree = velocity_degree(run.model->lagrangian.root(), sys.symbols());
    if (lag_degree >= 0 && v_degree >= 0 && v_degree <= 2) {
        const int fit_degree = std::min(4, grid.count - 1);
        PolynomialFit f = fit_polynomial(grid_points, h0_values, var_names, fit_degree);
        out += "# fit H0 = " + f.rendered + "   (max residual " + format_value(f.max_residual) + ")\n";
        for (int a = 0; a < m; ++a) {
            PolynomialFit fh =
                fit_polynomial(grid_points, h_values[static_cast<size_t>(a)], var_names, fit_degree);
            out += "# fit h_" + sys.symbols().coordinates()[static_cast<size_t>(split.degenerate(a))] +
                   " = " + fh.rendered + "   (max residual " + format_value(fh.max_residual) + ")\n";
        }
    } else {
        out += "# no polynomial fit: the Lagrangian is " +
               std::string(lag_degree < 0 ? "not polynomial"
                                          : "more than quadratic in the velocities") +
               "\n";
    }
    emit(out, out_path);
    return 0;
}

// --- evolve -----------------------------------------------------------------

std::string trajectory_csv(const RunSetup& run, const Trajectory& traj) {
    const ClairautSystem& sys = run.system;
    const IndexSplit& split = sys.index_split();
    const auto& coords = sys.symbols().coordinates();
    std::string out = "t";
    for (int k = 0; k < sys.n(); ++k) out += "," + coords[static_cast<size_t>(k)];
    for (int i = 0; i < sys.r(); ++i) out += ",p_" + coords[static_cast<size_t>(split.regular(i))];
    for (int a = 0; a < sys.m(); ++a) out += ",v_" + coords[static_cast<size_t>(split.degenerate(a))];
    out += ",H0,el_residual_max\n";
    for (const TrajectorySample& s : traj.samples) {
        out += format_value(s.t);
        for (int k = 0; k < sys.n(); ++k) out += "," + format_value(s.q(k));
        for (int i = 0; i < sys.r(); ++i) out += "," + format_value(s.p(i));
        for (int a = 0; a < sys.m(); ++a) out += "," + format_value(s.v_degenerate(a));
        out += "," + format_value(s.h0);
        out += "," + format_value(s.el_residual_max);
        out += "\n";
    }
    return out;
}

int run_evolve(const std::string& model_path, std::string out_path) {
    RunSetup run = prepare(load_model(model_path));
    print_warnings(run);
    Convention conv = resolve_convention(run.convention);
    const IntegrationWindow& w = run.spec->window;
    if (out_path.empty()) out_path = run.spec->name + "_trajectory.csv";

    Trajectory traj;
    std::optional<std::pair<int, std::string>> abort;
    try {
        traj = integrate(run.system, run.initial, w.t0, w.t1, w.dt, run.gauge, conv);
    } catch (const IntegrationAbort& e) {
        traj = e.partial();
        abort = {static_cast<int>(e.code()), e.what()};
    }
    if (traj.uniform_count >= 5) attach_el_residuals(run.system, traj);

    emit(trajectory_csv(run, traj), out_path);
    RunMetadata meta = collect_metadata(run, conv);
    nlohmann::ordered_json sidecar = nlohmann::ordered_json::parse(metadata_json(meta));
    sidecar["t0"] = w.t0;
    sidecar["t1"] = w.t1;
    sidecar["dt"] = w.dt;
    sidecar["samples"] = traj.size();
    if (abort) sidecar["aborted"] = abort->second;
    emit(sidecar.dump(2) + "\n", out_path + ".meta.json");

    if (abort) {
        std::cerr << "error: " << abort->second << " (partial trajectory written to " << out_path
                  << ")\n";
        return abort->first;
    }
    std::cerr << out_path << ": " << traj.size() << " samples\n";
    return 0;
}

// --- verify -----------------------------------------------------------------

int run_verify(const std::vector<std::string>& model_paths, const std::string& out_path,
               bool pretty) {
    auto t_start = std::chrono::steady_clock::now();
    std::vector<RunSetup> runs = prepare_corpus();
    for (const std::string& path : model_paths) {
        runs.push_back(prepare(load_model(path)));
        print_warnings(runs.back());
    }
    VerificationReport report = run_suite(runs);
    emit(report.to_json(pretty ? 2 : -1) + "\n", out_path);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    int failures = 0;
    for (const CheckResult& c : report.checks)
        if (!c.informational && !c.pass) {
            ++failures;
            std::cerr << "FAIL " << c.model << "/" << c.name << ": residual "
                      << format_value(c.max_residual) << " vs tolerance "
                      << format_value(c.tolerance)
                      << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
        }
    std::cerr << "verify: " << report.checks.size() << " checks, " << failures << " failure(s), "
              << format_value(seconds) << " s\n";
    return report.all_pass ? 0 : static_cast<int>(ErrorCode::verification);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clairaut-Legendre transform engine for singular Lagrangians"};
    app.set_version_flag("--version", std::string("clairaut ") + kToolVersion);
    app.require_subcommand(1);

    std::string model_path, out_path, grid_text;
    bool pretty = false;
    std::vector<std::string> verify_models;

    CLI::App* analyze = app.add_subcommand("analyze", "Hessian rank, index split, gauge counting");
    analyze->add_option("model", model_path, "model file")->required();
    analyze->add_option("-o,--output", out_path, "write the JSON report here instead of stdout");
    analyze->add_flag("--pretty", pretty, "indent the JSON output");

    CLI::App* transform = app.add_subcommand("transform", "tabulate H0 and h_alpha on a grid");
    transform->add_option("model", model_path, "model file")->required();
    transform->add_option("--grid", grid_text, "grid as lo:hi:count per variable (default -1:1:5)");
    transform->add_option("-o,--output", out_path, "write the table here instead of stdout");

    CLI::App* evolve = app.add_subcommand("evolve", "integrate the equations of motion to CSV");
    evolve->add_option("model", model_path, "model file")->required();
    evolve->add_option("-o,--output", out_path, "CSV path (default <model>_trajectory.csv)");

    CLI::App* verify = app.add_subcommand("verify", "run the oracle suite on the built-in corpus");
    verify->add_option("model", verify_models, "additional model files to include");
    verify->add_option("-o,--output", out_path, "write the JSON report here instead of stdout");
    verify->add_flag("--pretty", pretty, "indent the JSON output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorCode::parse);
    }

    try {
        if (app.got_subcommand(analyze)) return run_analyze(model_path, out_path, pretty);
        if (app.got_subcommand(transform)) return run_transform(model_path, grid_text, out_path);
        if (app.got_subcommand(evolve)) return run_evolve(model_path, out_path);
        if (app.got_subcommand(verify)) return run_verify(verify_models, out_path, pretty);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorCode::verification);
    }
    return 0;
}
