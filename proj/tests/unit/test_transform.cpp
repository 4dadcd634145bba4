#include <doctest.h>

#include <clairaut/transform.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace clairaut;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<int>(xs.size()));
    int k = 0;
    for (double x : xs) v(k++) = x;
    return v;
}

ClairautSystem gauge_system() {
    static Model m = make_model("rank1_gauge", {"q1", "q2"}, "0.5*(d(q1) - q2)^2");
    return ClairautSystem::build(m);
}

ClairautSystem first_order_system() {
    static Model m = make_model("first_order", {"q1", "q2"},
                                "0.5*(q2*d(q1) - q1*d(q2)) - 0.5*(q1^2 + q2^2)");
    return ClairautSystem::build(m);
}

ClairautSystem oscillator_system() {
    static Model m = make_model("oscillator", {"q1"}, "0.5*d(q1)^2 - 0.5*q1^2");
    return ClairautSystem::build(m);
}

ClairautSystem quartic_system() {
    static Model m = make_model("quartic", {"q1"}, "0.25*d(q1)^4");
    return ClairautSystem::build(m);
}

}  // namespace

TEST_CASE("resolve_velocities inverts the supremum condition") {
    // p1 = v1 - q2 resolved by hand
    ClairautSystem g = gauge_system();
    ResolveResult r = g.resolve_velocities(vec({0.0, 0.3}), vec({0.5}), vec({0.0}));
    CHECK(r.v_regular(0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.residual <= 1e-12);

    // identity resolution for the free particle
    Model free = make_model("free", {"q1"}, "0.5*d(q1)^2");
    ClairautSystem f = ClairautSystem::build(free);
    CHECK(f.resolve_velocities(vec({0.0}), vec({1.2}), Eigen::VectorXd()).v_regular(0) ==
          doctest::Approx(1.2).epsilon(1e-12));

    // cube root through the singular-at-zero Jacobian
    ClairautSystem q = quartic_system();
    CHECK(q.resolve_velocities(vec({0.0}), vec({8.0}), Eigen::VectorXd()).v_regular(0) ==
          doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("resolver failure modes") {
    // p = exp(v) has no solution for negative momentum; the iteration drives
    // v to -inf until the Hessian underflows to singular
    Model m = make_model("exp", {"q1"}, "exp(d(q1))");
    ClairautSystem sys = ClairautSystem::build(m);
    try {
        sys.resolve_velocities(vec({0.0}), vec({-1.0}), Eigen::VectorXd());
        FAIL("expected a resolution error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::resolution);
    }

    // an iteration budget too small for the cube root reports the best residual
    Model quartic = make_model("quartic", {"q1"}, "0.25*d(q1)^4");
    Tolerances strict;
    strict.newton_max_iterations = 3;
    ClairautSystem capped = ClairautSystem::build(quartic, strict);
    try {
        capped.resolve_velocities(vec({0.0}), vec({8.0}), Eigen::VectorXd());
        FAIL("expected NoConvergenceError");
    } catch (const NoConvergenceError& e) {
        CHECK(e.best_residual() > 0.0);
        CHECK(e.best_residual() < 8.0);
    }

    // dimension mismatch is caught
    ClairautSystem g = gauge_system();
    CHECK_THROWS_AS(g.resolve_velocities(vec({0.0, 0.0}), vec({0.0}), Eigen::VectorXd()), Error);
}

TEST_CASE("h_alpha values and velocity independence") {
    ClairautSystem g = gauge_system();
    Eigen::VectorXd h = g.h_alpha(vec({0.4, -0.2}), vec({0.7}));
    REQUIRE(h.size() == 1);
    CHECK(h(0) == doctest::Approx(0.0));

    ClairautSystem fo = first_order_system();
    Eigen::VectorXd h2 = fo.h_alpha(vec({1.0, 2.0}), Eigen::VectorXd());
    REQUIRE(h2.size() == 2);
    CHECK(h2(0) == doctest::Approx(-1.0));
    CHECK(h2(1) == doctest::Approx(0.5));

    ClairautSystem osc = oscillator_system();
    CHECK(osc.h_alpha(vec({1.0}), vec({0.5})).size() == 0);
}

TEST_CASE("h_mix matches hand substitution") {
    // nonsingular: reduces to the standard Hamiltonian
    ClairautSystem osc = oscillator_system();
    CHECK(osc.h_mix(vec({0.0}), vec({1.0}), Eigen::VectorXd(), Eigen::VectorXd()) ==
          doctest::Approx(0.5));

    // gauge model with explicit probes: 1*1 + 3*2 - 1/2 = 6.5
    ClairautSystem g = gauge_system();
    CHECK(g.h_mix(vec({0.0, 0.0}), vec({1.0}), vec({3.0}), vec({2.0})) == doctest::Approx(6.5));

    // zero-velocity case of the first-order model
    ClairautSystem fo = first_order_system();
    const double L0 = -0.5 * (1.0 + 4.0);  // L(q, 0) is just minus the potential
    CHECK(fo.h_mix(vec({1.0, 2.0}), Eigen::VectorXd(), vec({1.0, 1.0}), vec({0.0, 0.0})) ==
          doctest::Approx(-L0));

    // without the potential the zero-velocity mixed function vanishes
    Model bare = make_model("bare", {"q1", "q2"}, "0.5*(q2*d(q1) - q1*d(q2))");
    ClairautSystem bs = ClairautSystem::build(bare);
    CHECK(bs.h_mix(vec({1.0, 2.0}), Eigen::VectorXd(), vec({1.0, 1.0}), vec({0.0, 0.0})) ==
          doctest::Approx(0.0));
}

TEST_CASE("h_physical reproduces the hand forms") {
    ClairautSystem g = gauge_system();
    DeterministicRng rng(5);
    for (int k = 0; k < 50; ++k) {
        const double q2 = rng.uniform(-1, 1), p1 = rng.uniform(-1, 1);
        CHECK(g.h_physical(vec({rng.uniform(-1, 1), q2}), vec({p1})) ==
              doctest::Approx(0.5 * p1 * p1 + p1 * q2).epsilon(1e-12));
    }

    // first-order Lagrangian collapses to the potential
    ClairautSystem fo = first_order_system();
    for (int k = 0; k < 50; ++k) {
        const double q1 = rng.uniform(-1, 1), q2 = rng.uniform(-1, 1);
        CHECK(fo.h_physical(vec({q1, q2}), Eigen::VectorXd()) ==
              doctest::Approx(0.5 * (q1 * q1 + q2 * q2)).epsilon(1e-12));
    }

    ClairautSystem osc = oscillator_system();
    CHECK(osc.h_physical(vec({1.0}), vec({1.0})) == doctest::Approx(1.0));
}

TEST_CASE("h_standard is the full Legendre transform") {
    Model free = make_model("free", {"q1"}, "0.5*d(q1)^2");
    ClairautSystem f = ClairautSystem::build(free);
    CHECK(f.h_standard(vec({0.0}), vec({2.0})) == doctest::Approx(2.0));

    ClairautSystem osc = oscillator_system();
    CHECK(osc.h_standard(vec({1.0}), vec({1.0})) == doctest::Approx(1.0));

    ClairautSystem q = quartic_system();
    CHECK(q.h_standard(vec({0.0}), vec({8.0})) == doctest::Approx(12.0));

    ClairautSystem g = gauge_system();
    CHECK_THROWS_AS(g.h_standard(vec({0.0, 0.0}), vec({1.0, 1.0})), ModelSingularError);
}

TEST_CASE("h_general is linear in pbar") {
    Model free = make_model("free", {"q1"}, "0.5*d(q1)^2");
    ClairautSystem f = ClairautSystem::build(free);
    CHECK(f.h_general(vec({0.0}), vec({3.0}), vec({2.0})) == doctest::Approx(4.0));
    CHECK(f.h_general(vec({0.7}), vec({3.0}), vec({0.0})) == doctest::Approx(0.0));

    // exact affinity: the second difference in pbar vanishes identically
    ClairautSystem fo = first_order_system();
    DeterministicRng rng(9);
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd q = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Eigen::VectorXd c = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Eigen::VectorXd pb = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Eigen::VectorXd dir = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const double second_difference = fo.h_general(q, pb + dir, c) -
                                         2.0 * fo.h_general(q, pb, c) +
                                         fo.h_general(q, pb - dir, c);
        CHECK(std::abs(second_difference) <= 1e-12);
    }
}

TEST_CASE("clairaut_residual vanishes for true solutions and flags impostors") {
    ClairautSystem osc = oscillator_system();
    auto h_st = [&osc](const Eigen::VectorXd& q, const Eigen::VectorXd& pb) {
        return osc.h_standard(q, pb);
    };
    CHECK(std::abs(clairaut_residual(h_st, osc, vec({0.4}), vec({0.9}))) <= 1e-9);

    Eigen::VectorXd c = vec({0.6});
    auto h_gen = [&osc, &c](const Eigen::VectorXd& q, const Eigen::VectorXd& pb) {
        return osc.h_general(q, pb, c);
    };
    CHECK(std::abs(clairaut_residual(h_gen, osc, vec({0.4}), vec({0.9}))) <= 1e-9);

    // negative control: H = pbar^2 + q solves nothing
    auto impostor = [](const Eigen::VectorXd& q, const Eigen::VectorXd& pb) {
        return pb(0) * pb(0) + q(0);
    };
    CHECK(std::abs(clairaut_residual(impostor, osc, vec({0.4}), vec({0.9}))) > 1e-3);
}

TEST_CASE("derivatives follow the implicit-function rule") {
    ClairautSystem g = gauge_system();
    DeterministicRng rng(21);
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd q = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Eigen::VectorXd p = vec({rng.uniform(-1, 1)});
        SystemGradients d = g.derivatives(q, p);
        // from H0 = 1/2 p1^2 + p1 q2
        CHECK(d.dH0_dp(0) == doctest::Approx(p(0) + q(1)).epsilon(1e-12));
        CHECK(d.dH0_dq(0) == doctest::Approx(0.0));
        CHECK(d.dH0_dq(1) == doctest::Approx(p(0)).epsilon(1e-12));
        CHECK(d.dh_dq.cwiseAbs().maxCoeff() <= 1e-12);  // h2 = 0 identically
    }

    ClairautSystem fo = first_order_system();
    SystemGradients d = fo.derivatives(vec({1.0, 2.0}), Eigen::VectorXd());
    CHECK(d.dh_dq(0, 1) == doctest::Approx(-0.5));  // h1 = -q2/2
    CHECK(d.dh_dq(1, 0) == doctest::Approx(0.5));   // h2 = +q1/2
    CHECK(d.dH0_dq(0) == doctest::Approx(1.0));     // H0 = V
}

TEST_CASE("derivatives match central finite differences") {
    // a model exercising every branch of the chain rule: rank 1 of 3 with
    // momentum-dependent h
    Model m = make_model("mixed", {"q1", "q2", "q3"},
                         "0.5*(2*d(q1) + q3*d(q2) + 2*q2*d(q3))^2 - 0.5*(q2^2 + q3^2)");
    ClairautSystem sys = ClairautSystem::build(m);
    REQUIRE(sys.r() == 1);
    DeterministicRng rng(23);
    const double h = 1e-6;
    for (int k = 0; k < 10; ++k) {
        Eigen::VectorXd q = vec({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Eigen::VectorXd p = vec({rng.uniform(0.5, 1.5)});
        SystemGradients d = sys.derivatives(q, p);
        for (int B = 0; B < 3; ++B) {
            Eigen::VectorXd qh = q, ql = q;
            qh(B) += h;
            ql(B) -= h;
            const double fd_h0 = (sys.h_physical(qh, p) - sys.h_physical(ql, p)) / (2 * h);
            CHECK(std::abs(d.dH0_dq(B) - fd_h0) <= 1e-6 * (1.0 + std::abs(fd_h0)));
            for (int a = 0; a < 2; ++a) {
                const double fd_ha =
                    (sys.h_alpha(qh, p)(a) - sys.h_alpha(ql, p)(a)) / (2 * h);
                CHECK(std::abs(d.dh_dq(a, B) - fd_ha) <= 1e-6 * (1.0 + std::abs(fd_ha)));
            }
        }
        Eigen::VectorXd ph = p, pl = p;
        ph(0) += h;
        pl(0) -= h;
        const double fd_hp = (sys.h_physical(q, ph) - sys.h_physical(q, pl)) / (2 * h);
        CHECK(std::abs(d.dH0_dp(0) - fd_hp) <= 1e-6 * (1.0 + std::abs(fd_hp)));
        for (int a = 0; a < 2; ++a) {
            const double fd_hap = (sys.h_alpha(q, ph)(a) - sys.h_alpha(q, pl)(a)) / (2 * h);
            CHECK(std::abs(d.dh_dp(a, 0) - fd_hap) <= 1e-6 * (1.0 + std::abs(fd_hap)));
        }
    }
}

TEST_CASE("independence probes and envelope equivalence") {
    ClairautSystem g = gauge_system();
    DeterministicRng rng(31);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd q = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Eigen::VectorXd p = vec({rng.uniform(-1, 1)});
        Eigen::VectorXd v1 = vec({rng.uniform(-1, 1)}), v2 = vec({rng.uniform(-1, 1)});
        Eigen::VectorXd pb1 = vec({rng.uniform(-1, 1)}), pb2 = vec({rng.uniform(-1, 1)});
        worst = std::max(worst, (g.h_alpha(q, p, v1) - g.h_alpha(q, p, v2)).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(g.h_physical(q, p, pb1, v1) - g.h_physical(q, p, pb2, v2)));
    }
    CHECK(worst <= 1e-8);

    ClairautSystem osc = oscillator_system();
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd q = vec({rng.uniform(-1, 1)});
        Eigen::VectorXd p = vec({rng.uniform(-1, 1)});
        CHECK(std::abs(osc.h_physical(q, p) - osc.h_standard(q, p)) <= 1e-10);
    }
}

TEST_CASE("probe comparison detects an invalid split") {
    // W = diag(1, q1) has rank 1 exactly on the q1 = 0 slice. Sampling only
    // that slice yields a split that is wrong elsewhere, and h_alpha then
    // depends on the probe velocity; the two-probe cross-check must throw.
    Model m = make_model("slice", {"q1", "q2"}, "0.5*d(q1)^2 + 0.5*q1*d(q2)^2");
    std::vector<PhaseSample> slice;
    for (int k = 0; k < 4; ++k) {
        PhaseSample s;
        s.q = vec({0.0, 0.3 * k});
        s.v = vec({0.1 * k, -0.2 * k});
        slice.push_back(s);
    }
    ClairautSystem sys = ClairautSystem::build(m, slice);
    REQUIRE(sys.r() == 1);
    REQUIRE(sys.m() == 1);
    // off the sampled slice the "degenerate" direction is not degenerate
    CHECK_THROWS_AS(sys.h_alpha(vec({0.8, 0.0}), vec({0.2})), DependenceOnVelocityError);
    CHECK_THROWS_AS(sys.h_physical(vec({0.8, 0.0}), vec({0.2})), DependenceOnVelocityError);
}

TEST_CASE("supremum law on a grid for 1-d convex models") {
    ClairautSystem osc = oscillator_system();
    DeterministicRng rng(37);
    for (int k = 0; k < 5; ++k) {
        const double q = rng.uniform(-1, 1), p = rng.uniform(-1, 1);
        double best = -1e300;
        for (int j = 0; j <= 20000; ++j) {
            const double v = -10.0 + 1e-3 * j;
            best = std::max(best, p * v - (0.5 * v * v - 0.5 * q * q));
        }
        CHECK(std::abs(best - osc.h_standard(vec({q}), vec({p}))) <= 1e-5);
    }
}
