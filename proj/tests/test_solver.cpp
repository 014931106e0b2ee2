#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "dbe/functionals.hpp"
#include "dbe/solver.hpp"
#include "support/oracles.hpp"

using Catch::Approx;
using namespace dbe;

namespace {

double sum(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
}

}  // namespace

TEST_CASE("SchemeParams and SolverOptions validation", "[solver]") {
    CHECK_NOTHROW(SchemeParams{2.0, 0.5, 1e-4}.validate());
    CHECK_THROWS_AS((SchemeParams{1.0, 0.5, 1e-4}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SchemeParams{2.0, 0.0, 1e-4}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SchemeParams{2.0, 1.0, 0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SolverOptions{0.0, 10, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SolverOptions{1e-10, 0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SolverOptions{1e-10, 10, 0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SolverOptions{1e-10, 10, 1.5}.validate()), std::invalid_argument);
}

TEST_CASE("states reject negative, non-finite and mis-sized data", "[solver]") {
    const GridSpec g(3);
    CHECK_THROWS_AS(StateV(g, {1.0, -1e-300, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(StateV(g, {1.0, NAN, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(StateV(g, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(StateU(g, {1.0, INFINITY, 2.0}), std::invalid_argument);
    const StateV v(g, {1.0, 4.0, 9.0});
    const StateU u = to_u(v, 2.0);
    CHECK(u[0] == 1.0);
    CHECK(u[1] == 2.0);
    CHECK(u[2] == 3.0);
    CHECK(to_v(u, 2.0) == v);
}

TEST_CASE("fast Barenblatt data peaks at one", "[solver][init]") {
    const GridSpec g(128);
    const StateU u = barenblatt_init(g, 0.5, InitialCase::fast);
    double mx = 0.0;
    for (double x : u.values()) mx = std::max(mx, x);
    CHECK(mx == Approx(1.0).epsilon(1e-12));
    // x = 0.5 is node 64 (index 63).
    CHECK(u[63] == Approx(1.0).epsilon(1e-12));
    for (double x : u.values()) CHECK(x > 0.0);
}

TEST_CASE("slow Barenblatt data has compact support and the closed-form peak", "[solver][init]") {
    const double beta = 4.0;
    const GridSpec g(256);
    const StateU u = barenblatt_init(g, beta, InitialCase::slow);
    const BarenblattProfile p = BarenblattProfile::make(beta, InitialCase::slow);
    const double t0 = 1e-4, t_end = 5e-4;
    const double C = (beta - 1.0) / (2.0 * beta) * 0.25 / std::pow(t_end + t0, 2.0 / (beta + 1.0));
    CHECK(p.C == Approx(C).epsilon(1e-15));
    const double r2 = 2.0 * beta * C * std::pow(t0, 2.0 / (beta + 1.0)) / (beta - 1.0);
    CHECK(p.support_radius_sq() == Approx(r2).epsilon(1e-14));
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        const double d2 = (g.node(i) - 0.5) * (g.node(i) - 0.5);
        if (d2 > r2) {
            CHECK(u[i] == 0.0);
            ++zeros;
        } else {
            CHECK(u[i] >= 0.0);
        }
    }
    CHECK(zeros > 0);
    const double peak = std::pow(C, 1.0 / (beta - 1.0)) / std::pow(t0, 1.0 / (beta + 1.0));
    CHECK(u[127] == Approx(peak).epsilon(1e-13));
}

TEST_CASE("Barenblatt case and beta must agree", "[solver][init]") {
    const GridSpec g(8);
    CHECK_THROWS_AS(barenblatt_init(g, 0.5, InitialCase::slow), std::invalid_argument);
    CHECK_THROWS_AS(barenblatt_init(g, 1.0, InitialCase::slow), std::invalid_argument);
    CHECK_THROWS_AS(barenblatt_init(g, 2.0, InitialCase::fast), std::invalid_argument);
    CHECK_THROWS_AS(barenblatt_init(g, 1.0, InitialCase::fast), std::invalid_argument);
}

TEST_CASE("constant states are fixed points of the step", "[solver]") {
    for (double alpha : {1.5, 2.0, 3.0}) {
        for (double beta : {0.5, 1.0, 4.0}) {
            const StateV v = StateV::constant(GridSpec(16), 0.7);
            const StepResult r = step(v, {alpha, beta, 1e-3});
            CHECK(r.state == v);
            CHECK(r.diagnostics.iterations <= 1);
            CHECK(r.diagnostics.residual == 0.0);
        }
    }
}

TEST_CASE("two-node step matches the bracketing oracle", "[solver][oracle]") {
    // v_prev = (1, 4), alpha = beta = 2, tau = h^2/8.
    const double tau = 0.25 / 8.0;
    const StateV v(GridSpec(2), {1.0, 4.0});
    const StepResult r = step(v, {2.0, 2.0, tau});
    const auto ref = oracle::two_node_step(1.0, 4.0, 2.0, 2.0, tau);
    REQUIRE(ref);
    CHECK(r.state[0] == Approx(ref->first).margin(1e-10));
    CHECK(r.state[1] == Approx(ref->second).margin(1e-10));
    CHECK(r.state[0] > 1.0);
    CHECK(r.state[1] < 4.0);
}

TEST_CASE("step residual contract, nonnegativity and mass bounds", "[solver]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(0.0, 2.0);
    const SolverOptions opts;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 8 + 4 * static_cast<std::size_t>(trial);
        const GridSpec g(n);
        std::vector<double> vals(n);
        for (double& x : vals) x = dist(rng);
        if (trial % 3 == 0) vals[n / 2] = 0.0;
        const StateV v(g, vals);
        const double alpha = 1.5 + 0.1 * trial, beta = 0.3 + 0.2 * trial;
        const SchemeParams params{alpha, beta, 1e-4};
        const StepResult r = step(v, params, opts);
        const double pmax = *std::max_element(vals.begin(), vals.end());
        const auto res = scheme_residual(r.state.values(), v.values(), g, params);
        CHECK(max_abs(res) <= opts.residual_tol * (1.0 + pmax));
        CHECK(r.diagnostics.residual == Approx(max_abs(res)).margin(1e-300));
        for (double x : r.state.values()) CHECK(x >= 0.0);
        const double slack = 10.0 * opts.residual_tol * (1.0 + pmax);
        CHECK(sum(r.state.values()) <= sum(v.values()) + static_cast<double>(n) * slack);
        CHECK(total_mass_u(r.state, alpha) >= total_mass_u(v, alpha) - slack);
    }
}

TEST_CASE("non-convergence raises ConvergenceError with the last iterate", "[solver]") {
    const StateU u = barenblatt_init(GridSpec(64), 4.0, InitialCase::slow);
    const StateV v = to_v(u, 3.0);
    SolverOptions opts;
    opts.max_iterations = 1;
    try {
        (void)step(v, {3.0, 4.0, 1e-4}, opts);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_iterate().size() == 64);
        CHECK(e.residual() > 0.0);
        CHECK_FALSE(e.step_index().has_value());
    }
    try {
        (void)simulate(v, {3.0, 4.0, 1e-4}, 3, opts);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        REQUIRE(e.step_index().has_value());
        CHECK(*e.step_index() == 1);
    }
}

TEST_CASE("simulate with zero steps returns only the initial state", "[solver]") {
    const StateV v(GridSpec(4), {1, 2, 3, 4});
    const Trajectory t = simulate(v, {2.0, 1.0, 1e-3}, 0);
    REQUIRE(t.states.size() == 1);
    CHECK(t.states[0] == v);
    CHECK(t.diagnostics.empty());
}

TEST_CASE("simulate keeps constant states fixed", "[solver]") {
    const StateV v = StateV::constant(GridSpec(10), 2.5);
    const Trajectory t = simulate(v, {3.0, 4.0, 1e-2}, 5);
    REQUIRE(t.states.size() == 6);
    for (const auto& s : t.states) CHECK(s == v);
}

TEST_CASE("fast diffusion run: entropy strictly decreasing, masses monotone", "[solver][slow-test]") {
    const double alpha = 2.0, beta = 0.5, tau = 1e-5;
    const StateV v0 = to_v(barenblatt_init(GridSpec(128), beta, InitialCase::fast), alpha);
    const Trajectory t = simulate(v0, {alpha, beta, tau}, 500);
    REQUIRE(t.states.size() == 501);
    REQUIRE(t.diagnostics.size() == 500);
    const double tol = SolverOptions{}.residual_tol;
    for (std::size_t k = 1; k < t.states.size(); ++k) {
        const double slack = 10.0 * tol * (1.0 + 1.0);
        CHECK(entropy_H(t.states[k], alpha, 0.0) < entropy_H(t.states[k - 1], alpha, 0.0));
        CHECK(total_mass_u(t.states[k], alpha) >= total_mass_u(t.states[k - 1], alpha) - slack);
        CHECK(total_mass_v(t.states[k]) <= total_mass_v(t.states[k - 1]) + slack);
        CHECK(t.diagnostics[k - 1].residual <= t.diagnostics[k - 1].residual_bound);
    }
}

TEST_CASE("slow diffusion run preserves nonnegativity and never shrinks the support", "[solver]") {
    const double alpha = 3.0, beta = 4.0, tau = 1e-5;
    const StateV v0 = to_v(barenblatt_init(GridSpec(128), beta, InitialCase::slow), alpha);
    const Trajectory t = simulate(v0, {alpha, beta, tau}, 50);
    for (const auto& s : t.states) {
        for (double x : s.values()) CHECK(x >= 0.0);
    }
    auto support = [](const StateV& s) {
        std::size_t n = 0;
        for (double x : s.values()) n += x > 0.0 ? 1 : 0;
        return n;
    };
    CHECK(support(t.states.back()) >= support(t.states.front()));
    CHECK(support(t.states.front()) < 128);
}
