#pragma once

// Implicit Euler finite-difference step for the porous-medium equation written
// in the variable v = u^alpha on the periodic unit interval:
//
//   v_i - v_i^prev = (alpha tau / h^2) v_i^{(alpha-1)/alpha} (s_{i+1} - 2 s_i + s_{i-1}),
//   s = v^{beta/alpha}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dbe/cyclic_tridiagonal.hpp"
#include "dbe/grid.hpp"

namespace dbe {

struct SchemeParams {
    double alpha = 2.0;
    double beta = 1.0;
    double tau = 1e-4;

    void validate() const {
        if (!(alpha > 1.0)) throw std::invalid_argument("SchemeParams: alpha must be > 1");
        if (!(beta > 0.0)) throw std::invalid_argument("SchemeParams: beta must be > 0");
        if (!(tau > 0.0)) throw std::invalid_argument("SchemeParams: tau must be > 0");
    }
};

namespace detail {
inline std::vector<double> checked_nonnegative(std::vector<double> values, const GridSpec& grid,
                                               const char* what) {
    if (values.size() != grid.n_cells()) {
        throw std::invalid_argument(std::string(what) + ": expected " +
                                    std::to_string(grid.n_cells()) + " values, got " +
                                    std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
            throw std::invalid_argument(std::string(what) + ": entry " + std::to_string(i) +
                                        " is negative or not finite");
        }
    }
    return values;
}
}  // namespace detail

/// Nonnegative nodal values of the transformed variable v = u^alpha.
class StateV {
public:
    StateV(GridSpec grid, std::vector<double> values)
        : grid_(grid), values_(detail::checked_nonnegative(std::move(values), grid, "StateV")) {}

    static StateV constant(GridSpec grid, double value) {
        return StateV(grid, std::vector<double>(grid.n_cells(), value));
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const noexcept { return values_.size(); }

    friend bool operator==(const StateV&, const StateV&) = default;

private:
    GridSpec grid_;
    std::vector<double> values_;
};

/// Nonnegative nodal values of the physical variable u.
class StateU {
public:
    StateU(GridSpec grid, std::vector<double> values)
        : grid_(grid), values_(detail::checked_nonnegative(std::move(values), grid, "StateU")) {}

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const noexcept { return values_.size(); }

private:
    GridSpec grid_;
    std::vector<double> values_;
};

inline StateV to_v(const StateU& u, double alpha) {
    std::vector<double> v(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) v[i] = pos_pow(u[i], alpha);
    return StateV(u.grid(), std::move(v));
}

inline StateU to_u(const StateV& v, double alpha) {
    std::vector<double> u(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) u[i] = pos_pow(v[i], 1.0 / alpha);
    return StateU(v.grid(), std::move(u));
}

// ---------------------------------------------------------------------------
// Barenblatt initial data
// ---------------------------------------------------------------------------

enum class InitialCase { slow, fast };

struct BarenblattProfile {
    double beta;
    double x0;
    double t0;
    double C;

    static constexpr double slow_t0 = 1e-4;
    static constexpr double slow_t_end = 5e-4;
    static constexpr double fast_t0 = 1e-2;
    static constexpr double center = 0.5;

    static BarenblattProfile make(double beta, InitialCase which) {
        if (which == InitialCase::slow) {
            if (!(beta > 1.0)) {
                throw std::invalid_argument("barenblatt: slow case requires beta > 1");
            }
            const double C = (beta - 1.0) / (2.0 * beta) * center * center /
                             std::pow(slow_t_end + slow_t0, 2.0 / (beta + 1.0));
            return {beta, center, slow_t0, C};
        }
        if (!(beta > 0.0 && beta < 1.0)) {
            throw std::invalid_argument("barenblatt: fast case requires 0 < beta < 1");
        }
        return {beta, center, fast_t0, std::pow(fast_t0, (beta - 1.0) / (beta + 1.0))};
    }

    double operator()(double x) const {
        const double d2 = (x - x0) * (x - x0);
        const double bracket =
            C - (beta - 1.0) / (2.0 * beta) * d2 / std::pow(t0, 2.0 / (beta + 1.0));
        const double clamped = std::max(0.0, bracket);
        return pos_pow(clamped, 1.0 / (beta - 1.0)) / std::pow(t0, 1.0 / (beta + 1.0));
    }

    /// Squared radius of the support (slow case); infinite for fast diffusion.
    double support_radius_sq() const {
        if (beta < 1.0) return std::numeric_limits<double>::infinity();
        return 2.0 * beta * C * std::pow(t0, 2.0 / (beta + 1.0)) / (beta - 1.0);
    }
};

/// Barenblatt profile evaluated pointwise at the nodes x_i = i*h.
inline StateU barenblatt_init(const GridSpec& grid, double beta, InitialCase which) {
    const BarenblattProfile profile = BarenblattProfile::make(beta, which);
    std::vector<double> u(grid.n_cells());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = profile(grid.node(i));
    return StateU(grid, std::move(u));
}

// ---------------------------------------------------------------------------
// Nonlinear step
// ---------------------------------------------------------------------------

struct SolverOptions {
    double residual_tol = 1e-10;
    int max_iterations = 200;
    double damping = 1.0;

    void validate() const {
        if (!(residual_tol > 0.0)) throw std::invalid_argument("SolverOptions: residual_tol must be > 0");
        if (max_iterations < 1) throw std::invalid_argument("SolverOptions: max_iterations must be >= 1");
        if (!(damping > 0.0 && damping <= 1.0)) {
            throw std::invalid_argument("SolverOptions: damping must lie in (0, 1]");
        }
    }
};

struct StepDiagnostics {
    int iterations = 0;
    /// Max-norm of the scheme residual of the returned state.
    double residual = 0.0;
    /// residual_tol * (1 + max v_prev), the bound the residual was held to.
    double residual_bound = 0.0;
    int picard_sweeps = 0;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& msg, std::vector<double> last_iterate, double residual,
                     std::optional<std::size_t> step_index = std::nullopt)
        : std::runtime_error(msg),
          last_iterate_(std::move(last_iterate)),
          residual_(residual),
          step_index_(step_index) {}

    std::span<const double> last_iterate() const noexcept { return last_iterate_; }
    double residual() const noexcept { return residual_; }
    std::optional<std::size_t> step_index() const noexcept { return step_index_; }

private:
    std::vector<double> last_iterate_;
    double residual_;
    std::optional<std::size_t> step_index_;
};

struct StepResult {
    StateV state;
    StepDiagnostics diagnostics;
};

/// Pointwise scheme residual v_i - v_i^prev - (alpha tau/h^2) v_i^{(alpha-1)/alpha} D2(v^{beta/alpha})_i.
inline std::vector<double> scheme_residual(std::span<const double> v, std::span<const double> v_prev,
                                           const GridSpec& grid, const SchemeParams& params) {
    if (v.size() != grid.n_cells() || v_prev.size() != grid.n_cells()) {
        throw std::invalid_argument("scheme_residual: size mismatch");
    }
    const double h = grid.h();
    const double coeff = params.alpha * params.tau / (h * h);
    const double a = (params.alpha - 1.0) / params.alpha;
    const double b = params.beta / params.alpha;
    std::vector<double> s(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) s[i] = pos_pow(v[i], b);
    const std::vector<double> d2 = second_difference(s, grid);
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        r[i] = v[i] - v_prev[i] - coeff * pos_pow(v[i], a) * d2[i];
    }
    return r;
}

inline double max_abs(std::span<const double> xs) {
    double m = 0.0;
    for (double x : xs) m = std::max(m, std::abs(x));
    return m;
}

namespace detail {

// The step is solved in u = v^{1/alpha}. Dividing the scheme by u_i^{alpha-1}
// gives
//   G_i(u) = u_i - p_i u_i^{1-alpha} - c D2(u^beta)_i,   c = alpha tau / h^2,
// whose Jacobian I + diag(...) - c D2 diag(beta u^{beta-1}) is a column
// diagonally dominant M-matrix. Nodes with p_i = 0 form a complementarity
// problem: either u_i = 0 (and G_i >= 0) or G_i = 0 with u_i > 0.
class StepSolver {
public:
    StepSolver(const StateV& v_prev, const SchemeParams& params, const SolverOptions& opts)
        : grid_(v_prev.grid()),
          params_(params),
          opts_(opts),
          n_(v_prev.size()),
          p_(v_prev.values().begin(), v_prev.values().end()),
          coeff_(params.alpha * params.tau / (grid_.h() * grid_.h())) {
        residual_bound_ = opts.residual_tol * (1.0 + max_abs(p_));
    }

    StepResult solve() {
        std::vector<double> u(n_);
        for (std::size_t i = 0; i < n_; ++i) u[i] = pos_pow(p_[i], 1.0 / params_.alpha);

        StepDiagnostics diag;
        diag.residual_bound = residual_bound_;

        if (evaluate(u).accepted) {
            // v_prev itself solves the scheme (e.g. constant states).
            diag.residual = max_abs(scheme_residual(p_, p_, grid_, params_));
            if (diag.residual <= residual_bound_) return {StateV(grid_, p_), diag};
        }

        Candidate last{};
        for (int it = 1; it <= opts_.max_iterations; ++it) {
            diag.iterations = it;
            if (!newton_iteration(u)) {
                picard_sweeps(u, 5);
                diag.picard_sweeps += 5;
            }
            last = evaluate(u);
            if (last.accepted) {
                polish(u, last);
                diag.residual = last.residual;
                return {StateV(grid_, std::move(last.v)), diag};
            }
        }
        throw ConvergenceError("step: no convergence after " + std::to_string(opts_.max_iterations) +
                                   " iterations (residual " + std::to_string(last.residual) +
                                   ", bound " + std::to_string(residual_bound_) + ")",
                               std::move(last.v), last.residual);
    }

private:
    std::vector<double> powers(std::span<const double> u, double e) const {
        std::vector<double> out(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = pos_pow(u[i], e);
        return out;
    }

    std::vector<double> g_residual(std::span<const double> u) const {
        const std::vector<double> d2 = second_difference(powers(u, params_.beta), grid_);
        std::vector<double> g(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double source = p_[i] > 0.0 ? p_[i] * std::pow(u[i], 1.0 - params_.alpha) : 0.0;
            g[i] = u[i] - source - coeff_ * d2[i];
        }
        return g;
    }

    bool is_active(std::size_t i, std::span<const double> u, std::span<const double> g) const {
        return p_[i] == 0.0 && u[i] == 0.0 && g[i] >= 0.0;
    }

    /// Merit: G on free nodes, complementarity violation on zero nodes.
    double merit(std::span<const double> u, std::span<const double> g) const {
        double m = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double gi = (p_[i] == 0.0 && u[i] == 0.0) ? std::max(0.0, -g[i]) : std::abs(g[i]);
            m = std::max(m, gi);
        }
        return m;
    }

    struct Candidate;

    /// Extra Newton steps after acceptance, kept while they at least halve the
    /// residual, so returned states sit near the rounding floor.
    void polish(std::vector<double>& u, Candidate& best) {
        for (int extra = 0; extra < 3 && best.residual > 0.0; ++extra) {
            std::vector<double> trial = u;
            if (!newton_iteration(trial)) return;
            Candidate c = evaluate(trial);
            if (!c.accepted || !(c.residual < 0.5 * best.residual)) return;
            u.swap(trial);
            best = std::move(c);
        }
    }

    struct Candidate {
        std::vector<double> v;
        double residual;
        bool accepted;
    };

    /// Maps u back to v and measures the scheme residual in v, which is the
    /// quantity the step contract is stated in.
    Candidate evaluate(std::span<const double> u) const {
        Candidate c{std::vector<double>(n_), 0.0, true};
        for (std::size_t i = 0; i < n_; ++i) {
            if (p_[i] > 0.0 && u[i] <= 0.0) c.accepted = false;
            c.v[i] = pos_pow(u[i], params_.alpha);
        }
        c.residual = max_abs(scheme_residual(c.v, p_, grid_, params_));
        const std::vector<double> d2 = second_difference(powers(u, params_.beta), grid_);
        for (std::size_t i = 0; i < n_; ++i) {
            // A zero node is accepted only if the positive root it competes
            // with is negligible at the residual scale.
            if (u[i] == 0.0 && p_[i] == 0.0 &&
                pos_pow(std::max(0.0, coeff_ * d2[i]), params_.alpha) > residual_bound_) {
                c.accepted = false;
            }
        }
        c.accepted = c.accepted && c.residual <= residual_bound_;
        return c;
    }

    double derivative_base(double ui, double umax) const {
        // beta < 1 makes u^{beta-1} singular at zero; evaluate it at a floor.
        if (params_.beta < 1.0) return std::max(ui, 1e-14 * std::max(umax, 1.0));
        return ui;
    }

    /// One damped Newton step. Returns false when the line search stalls.
    bool newton_iteration(std::vector<double>& u) {
        const std::vector<double> g = g_residual(u);
        const double m0 = merit(u, g);
        const double umax = max_abs(u);

        std::vector<double> sub(n_), diag(n_), sup(n_), rhs(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            if (is_active(i, u, g)) {
                diag[i] = 1.0;
                rhs[i] = 0.0;
                continue;
            }
            const double ui = derivative_base(u[i], umax);
            const double up = derivative_base(u[grid_.next(i)], umax);
            const double um = derivative_base(u[grid_.prev(i)], umax);
            const double dsrc = p_[i] > 0.0
                                    ? (params_.alpha - 1.0) * p_[i] * std::pow(u[i], -params_.alpha)
                                    : 0.0;
            diag[i] = 1.0 + dsrc + 2.0 * coeff_ * params_.beta * pos_pow(ui, params_.beta - 1.0);
            sup[i] = -coeff_ * params_.beta * pos_pow(up, params_.beta - 1.0);
            sub[i] = -coeff_ * params_.beta * pos_pow(um, params_.beta - 1.0);
            rhs[i] = -g[i];
        }
        const std::vector<double> du = linalg::solve_cyclic_tridiagonal(sub, diag, sup, rhs);

        double theta = opts_.damping;
        std::vector<double> trial(n_);
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t i = 0; i < n_; ++i) {
                const double candidate = u[i] + theta * du[i];
                if (p_[i] > 0.0) {
                    trial[i] = candidate > 0.0 ? candidate : 0.1 * u[i];
                } else {
                    trial[i] = std::max(0.0, candidate);
                }
            }
            const double m1 = merit(trial, g_residual(trial));
            if (m1 < m0 || (m1 == 0.0 && m0 == 0.0)) {
                u.swap(trial);
                return true;
            }
            theta *= 0.5;
        }
        return false;
    }

    /// Lagged-coefficient fixed point: [I - c D2 diag(u^{beta-1})] u_new = p u^{1-alpha}.
    void picard_sweeps(std::vector<double>& u, int sweeps) {
        for (int k = 0; k < sweeps; ++k) {
            const double umax = max_abs(u);
            std::vector<double> sub(n_), diag(n_), sup(n_), rhs(n_);
            for (std::size_t i = 0; i < n_; ++i) {
                const double wi = pos_pow(derivative_base(u[i], umax), params_.beta - 1.0);
                const double wp = pos_pow(derivative_base(u[grid_.next(i)], umax), params_.beta - 1.0);
                const double wm = pos_pow(derivative_base(u[grid_.prev(i)], umax), params_.beta - 1.0);
                diag[i] = 1.0 + 2.0 * coeff_ * wi;
                sup[i] = -coeff_ * wp;
                sub[i] = -coeff_ * wm;
                rhs[i] = p_[i] > 0.0 ? p_[i] * std::pow(u[i], 1.0 - params_.alpha) : 0.0;
            }
            const std::vector<double> next = linalg::solve_cyclic_tridiagonal(sub, diag, sup, rhs);
            for (std::size_t i = 0; i < n_; ++i) {
                const double blended = (1.0 - opts_.damping) * u[i] + opts_.damping * next[i];
                u[i] = p_[i] > 0.0 ? std::max(blended, 0.1 * u[i]) : std::max(0.0, blended);
            }
        }
    }

    GridSpec grid_;
    SchemeParams params_;
    SolverOptions opts_;
    std::size_t n_;
    std::vector<double> p_;
    double coeff_;
    double residual_bound_ = 0.0;
};

}  // namespace detail

/// One implicit Euler step. Throws ConvergenceError (carrying the last iterate)
/// when the nonlinear solve does not reach the residual bound.
inline StepResult step(const StateV& v_prev, const SchemeParams& params,
                       const SolverOptions& opts = {}) {
    params.validate();
    opts.validate();
    return detail::StepSolver(v_prev, params, opts).solve();
}

struct Trajectory {
    GridSpec grid;
    SchemeParams params;
    std::vector<StateV> states;
    /// diagnostics[k] belongs to the step producing states[k + 1].
    std::vector<StepDiagnostics> diagnostics;
};

inline Trajectory simulate(const StateV& v0, const SchemeParams& params, std::size_t n_steps,
                           const SolverOptions& opts = {}) {
    params.validate();
    opts.validate();
    Trajectory traj{v0.grid(), params, {v0}, {}};
    traj.states.reserve(n_steps + 1);
    traj.diagnostics.reserve(n_steps);
    for (std::size_t k = 1; k <= n_steps; ++k) {
        try {
            StepResult r = step(traj.states.back(), params, opts);
            traj.states.push_back(std::move(r.state));
            traj.diagnostics.push_back(r.diagnostics);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("simulate: step " + std::to_string(k) + " failed: " + e.what(),
                                   std::vector<double>(e.last_iterate().begin(), e.last_iterate().end()),
                                   e.residual(), k);
        }
    }
    return traj;
}

}  // namespace dbe
