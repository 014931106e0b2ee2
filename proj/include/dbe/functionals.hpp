#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "dbe/grid.hpp"
#include "dbe/solver.hpp"

namespace dbe {

/// gamma = (alpha + beta - 1) / (2 alpha), the exponent of the Fisher information.
inline double gamma_exponent(double alpha, double beta) {
    if (!(alpha > 0.0)) throw std::invalid_argument("gamma_exponent: alpha must be > 0");
    return (alpha + beta - 1.0) / (2.0 * alpha);
}

/// H(v) = h/(alpha-1) * sum_i (v_i - V).
inline double entropy_H(const StateV& v, double alpha, double V) {
    if (!(alpha > 1.0)) throw std::invalid_argument("entropy_H: alpha must be > 1");
    CompensatedSum acc;
    for (double vi : v.values()) acc.add(vi - V);
    return v.grid().h() / (alpha - 1.0) * acc.value();
}

/// Relative entropy h/(alpha-1) * sum_i (u_i^alpha - U^alpha).
inline double rel_entropy(const StateU& u, double alpha, double U) {
    if (!(alpha > 1.0)) throw std::invalid_argument("rel_entropy: alpha must be > 1");
    if (!(U >= 0.0)) throw std::invalid_argument("rel_entropy: U must be >= 0");
    return entropy_H(to_v(u, alpha), alpha, std::pow(U, alpha));
}

/// F(v) = (1/h) sum_i (v_{i+1}^gamma - v_i^gamma)^2, periodic.
inline double fisher_F(const StateV& v, double alpha, double beta) {
    const double gamma = gamma_exponent(alpha, beta);
    if (!(gamma > 0.0)) throw std::invalid_argument("fisher_F: need alpha + beta > 1");
    const GridSpec& grid = v.grid();
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = pos_pow(v[i], gamma);
    CompensatedSum acc;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = w[grid.next(i)] - w[i];
        acc.add(d * d);
    }
    return acc.value() / grid.h();
}

/// Entropy production -(H(v_new) - H(v_old))/tau; the reference level cancels.
inline double production_P(const StateV& v_new, const StateV& v_old, double alpha, double tau) {
    if (!(v_new.grid() == v_old.grid())) throw std::invalid_argument("production_P: grid mismatch");
    if (!(alpha > 1.0)) throw std::invalid_argument("production_P: alpha must be > 1");
    if (!(tau > 0.0)) throw std::invalid_argument("production_P: tau must be > 0");
    CompensatedSum acc;
    for (std::size_t i = 0; i < v_new.size(); ++i) acc.add(v_old[i] - v_new[i]);
    return v_new.grid().h() / (alpha - 1.0) * acc.value() / tau;
}

/// Summed-by-parts form of the production on a scheme solution:
///   alpha/((alpha-1) h) sum_i (v_{i+1}^a - v_i^a)(v_{i+1}^b - v_i^b),
/// a = (alpha-1)/alpha, b = beta/alpha. Equals production_P whenever v solves
/// the scheme from its predecessor.
inline double production_P_summed(const StateV& v, double alpha, double beta) {
    if (!(alpha > 1.0)) throw std::invalid_argument("production_P_summed: alpha must be > 1");
    const GridSpec& grid = v.grid();
    const double a = (alpha - 1.0) / alpha;
    const double b = beta / alpha;
    CompensatedSum acc;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = v[grid.next(i)], y = v[i];
        acc.add((pos_pow(x, a) - pos_pow(y, a)) * (pos_pow(x, b) - pos_pow(y, b)));
    }
    return alpha / ((alpha - 1.0) * grid.h()) * acc.value();
}

/// Total mass h * sum_i v_i^{1/alpha} of u.
inline double total_mass_u(const StateV& v, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("total_mass_u: alpha must be > 0");
    CompensatedSum acc;
    for (double vi : v.values()) acc.add(pos_pow(vi, 1.0 / alpha));
    return v.grid().h() * acc.value();
}

inline double total_mass_v(const StateV& v) {
    return v.grid().h() * compensated_sum(v.values());
}

/// Sharp constant of the discrete Poincare-Wirtinger inequality, h^2 / (4 sin^2(pi h)).
inline double poincare_discrete(const GridSpec& grid) {
    const double h = grid.h();
    const double s = std::sin(std::numbers::pi * h);
    return h * h / (4.0 * s * s);
}

struct PowerMeanBounds {
    double lower;  // (x^a - y^a)(x^b - y^b)
    double mid;    // (x^{(a+b)/2} - y^{(a+b)/2})^2
    double upper;  // (a+b)^2/(4ab) * lower
};

inline PowerMeanBounds power_mean_bounds(double x, double y, double a, double b) {
    if (!(x >= 0.0) || !(y >= 0.0)) throw std::invalid_argument("power_mean_bounds: x, y must be >= 0");
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("power_mean_bounds: a, b must be > 0");
    const double lower = (pos_pow(x, a) - pos_pow(y, a)) * (pos_pow(x, b) - pos_pow(y, b));
    const double g = 0.5 * (a + b);
    const double d = pos_pow(x, g) - pos_pow(y, g);
    return {lower, d * d, (a + b) * (a + b) / (4.0 * a * b) * lower};
}

// ---------------------------------------------------------------------------
// Per-step records along a trajectory
// ---------------------------------------------------------------------------

struct FunctionalRecord {
    std::size_t step_index = 0;
    double time = 0.0;
    /// h/(alpha-1) sum v_i, i.e. the entropy with reference level 0.
    double entropy_H = 0.0;
    /// Relative entropy with respect to the equilibrium level U^alpha.
    double rel_entropy = 0.0;
    double fisher_F = 0.0;
    /// Zero at k = 0 (no predecessor).
    double production_P = 0.0;
    double mass_u = 0.0;
    double mass_v = 0.0;
    double residual = 0.0;
    int newton_iters = 0;
};

struct EquilibriumRef {
    double U = 0.0;
    double V = 0.0;

    static EquilibriumRef make(double U, double alpha) {
        if (!(U >= 0.0)) throw std::invalid_argument("EquilibriumRef: U must be >= 0");
        return {U, std::pow(U, alpha)};
    }
};

/// Evaluates all functionals along a trajectory; U is the equilibrium mass
/// used for the relative entropy.
inline std::vector<FunctionalRecord> evaluate_trajectory(const Trajectory& traj, double U) {
    const double alpha = traj.params.alpha;
    const double beta = traj.params.beta;
    const double tau = traj.params.tau;
    const EquilibriumRef eq = EquilibriumRef::make(U, alpha);
    std::vector<FunctionalRecord> out;
    out.reserve(traj.states.size());
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const StateV& v = traj.states[k];
        FunctionalRecord r;
        r.step_index = k;
        r.time = static_cast<double>(k) * tau;
        r.entropy_H = entropy_H(v, alpha, 0.0);
        r.rel_entropy = entropy_H(v, alpha, eq.V);
        r.fisher_F = fisher_F(v, alpha, beta);
        r.production_P = k == 0 ? 0.0 : production_P(v, traj.states[k - 1], alpha, tau);
        r.mass_u = total_mass_u(v, alpha);
        r.mass_v = total_mass_v(v);
        if (k > 0) {
            r.residual = traj.diagnostics[k - 1].residual;
            r.newton_iters = traj.diagnostics[k - 1].iterations;
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace dbe
