#pragma once

// Discrete Bakry-Emery checks. Given a sequence of entropies H, Fisher
// informations F and productions P = -(H_k - H_{k-1})/tau, the three
// assumptions
//   A1  C_m F_k <= P_k <= C_M F_k
//   A2  F_k - F_{k-1} <= -tau kappa F_k
//   A3  H_k -> 0
// imply H_k <= (1 + lambda tau)^{-k} H_0 = exp(-eta lambda k tau) H_0 with
// lambda = (C_m / C_M) kappa and eta = log(1 + tau lambda) / (tau lambda).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbe/functionals.hpp"

namespace dbe {

/// Relative floor below which F is treated as zero (ratios are meaningless there).
inline constexpr double kFisherFloor = 1e-14;

class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct A1Constants {
    double C_m;
    double C_M;
    /// C_m <= C_M, i.e. lambda <= kappa.
    bool ordered;
};

inline A1Constants a1_constants(double alpha, double beta) {
    if (!(alpha > 1.0)) throw std::invalid_argument("a1_constants: alpha must be > 1");
    if (!(beta > 0.0)) throw std::invalid_argument("a1_constants: beta must be > 0");
    if (!(alpha + beta > 1.0)) throw std::invalid_argument("a1_constants: need alpha + beta > 1");
    const double s = alpha + beta - 1.0;
    const double C_m = 4.0 * alpha * beta / (s * s);
    const double C_M = alpha / (alpha - 1.0);
    return {C_m, C_M, C_m <= C_M};
}

struct A1Check {
    bool pass = true;
    /// Index of the worst violation (or of the extreme ratio when passing).
    std::optional<std::size_t> worst_index;
    double min_ratio = std::numeric_limits<double>::infinity();
    double max_ratio = -std::numeric_limits<double>::infinity();
    std::size_t checked = 0;
};

/// Checks C_m F_k (1 - slack) <= P_k <= C_M F_k (1 + slack) for k >= 1.
/// Records with F below the floor must have |P| <= C_M * floor.
inline A1Check check_a1(std::span<const FunctionalRecord> records, double C_m, double C_M,
                        double slack) {
    if (records.empty()) throw std::invalid_argument("check_a1: empty record sequence");
    const double floor = kFisherFloor * records.front().fisher_F;
    A1Check out;
    double worst_excess = 0.0;
    for (std::size_t k = 1; k < records.size(); ++k) {
        const double F = records[k].fisher_F;
        const double P = records[k].production_P;
        double excess;
        if (F <= floor) {
            excess = std::abs(P) - C_M * floor;
        } else {
            ++out.checked;
            const double ratio = P / F;
            if (ratio < out.min_ratio) out.min_ratio = ratio;
            if (ratio > out.max_ratio) out.max_ratio = ratio;
            excess = std::max(C_m * F * (1.0 - slack) - P, P - C_M * F * (1.0 + slack)) / F;
        }
        if (excess > 0.0 && excess > worst_excess) {
            worst_excess = excess;
            out.pass = false;
            out.worst_index = k;
        }
    }
    return out;
}

/// kappa_hat = min_k (F_{k-1}/F_k - 1)/tau over steps with F_k above the floor.
/// Throws DegenerateInput when no step qualifies (already at equilibrium).
inline double estimate_kappa(std::span<const double> F, double tau) {
    if (F.size() < 2) throw std::invalid_argument("estimate_kappa: need at least two values");
    if (!(tau > 0.0)) throw std::invalid_argument("estimate_kappa: tau must be > 0");
    const double floor = kFisherFloor * F.front();
    double kappa = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t k = 1; k < F.size(); ++k) {
        if (!(F[k] > floor)) continue;
        any = true;
        kappa = std::min(kappa, (F[k - 1] / F[k] - 1.0) / tau);
    }
    if (!any) throw DegenerateInput("estimate_kappa: all Fisher values below floor");
    return kappa;
}

/// kappa_0 = 2 alpha gamma (eps A) min_u^{beta-1} / C_p with A = 2 beta/(alpha+beta-1).
inline double kappa0_theoretical(double alpha, double beta, double eps, double C_p, double min_u) {
    if (!(alpha > 1.0) || !(beta > 0.0)) {
        throw std::invalid_argument("kappa0_theoretical: need alpha > 1, beta > 0");
    }
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("kappa0_theoretical: eps must lie in (0, 1]");
    if (!(C_p > 0.0)) throw std::invalid_argument("kappa0_theoretical: C_p must be > 0");
    if (!(min_u >= 0.0)) throw std::invalid_argument("kappa0_theoretical: min_u must be >= 0");
    const double gamma = gamma_exponent(alpha, beta);
    const double A = 2.0 * beta / (alpha + beta - 1.0);
    return 2.0 * alpha * gamma * eps * A * pos_pow(min_u, beta - 1.0) / C_p;
}

struct DecayParams {
    double lambda;
    double eta;
};

inline DecayParams decay_params(double C_m, double C_M, double kappa, double tau) {
    if (!(C_m > 0.0 && C_M > 0.0 && kappa > 0.0 && tau > 0.0)) {
        throw std::invalid_argument("decay_params: C_m, C_M, kappa and tau must be > 0");
    }
    const double lambda = C_m / C_M * kappa;
    const double x = tau * lambda;
    return {lambda, std::log1p(x) / x};
}

struct BoundCheck {
    bool pass = true;
    std::optional<std::size_t> worst_index;
    /// max_k H_k / bound_k.
    double worst_ratio = 0.0;
};

/// Checks H_k <= H_0 exp(-eta lambda k tau) (1 + slack). The exponential is
/// evaluated as (1 + lambda tau)^{-k}, which is the same number when
/// eta = log(1 + tau lambda)/(tau lambda); eta is accepted for completeness
/// and must be consistent with lambda.
inline BoundCheck verify_decay_bound(std::span<const double> H, double lambda, double eta,
                                     double tau, double slack) {
    if (H.empty()) throw std::invalid_argument("verify_decay_bound: empty input");
    if (!(lambda >= 0.0)) throw std::invalid_argument("verify_decay_bound: lambda must be >= 0");
    if (!(tau > 0.0)) throw std::invalid_argument("verify_decay_bound: tau must be > 0");
    if (lambda > 0.0) {
        const double expected = std::log1p(tau * lambda) / (tau * lambda);
        if (std::abs(eta - expected) > 1e-12 * expected) {
            throw std::invalid_argument("verify_decay_bound: eta inconsistent with lambda");
        }
    }
    BoundCheck out;
    const double log_factor = std::log1p(lambda * tau);
    for (std::size_t k = 0; k < H.size(); ++k) {
        const double bound = H.front() * std::exp(-static_cast<double>(k) * log_factor);
        const double ratio = bound > 0.0 ? H[k] / bound : (H[k] > 0.0 ? 1e300 : 0.0);
        if (ratio > out.worst_ratio) {
            out.worst_ratio = ratio;
            out.worst_index = k;
        }
        if (H[k] > bound * (1.0 + slack)) out.pass = false;
    }
    return out;
}

/// Least-squares decay rate r of log H_k ~ c - r k tau.
inline double fit_rate(std::span<const double> H, double tau) {
    if (H.size() < 2) throw std::invalid_argument("fit_rate: need at least two values");
    double st = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < H.size(); ++k) {
        if (!(H[k] > 0.0)) throw std::invalid_argument("fit_rate: values must be positive");
        st += static_cast<double>(k) * tau;
        sy += std::log(H[k]);
    }
    const double n = static_cast<double>(H.size());
    const double tm = st / n, ym = sy / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < H.size(); ++k) {
        const double dt = static_cast<double>(k) * tau - tm;
        sxy += dt * (std::log(H[k]) - ym);
        sxx += dt * dt;
    }
    return -sxy / sxx;
}

// ---------------------------------------------------------------------------
// Certificate
// ---------------------------------------------------------------------------

struct DecayCertificate {
    double C_m_theoretical = 0.0;
    double C_M_theoretical = 0.0;
    double C_m_empirical = 0.0;
    double C_M_empirical = 0.0;
    double kappa_empirical = 0.0;
    double kappa0_theoretical = 0.0;
    double lambda_theoretical = 0.0;
    /// Empirical lambda = (C_m/C_M)_emp * kappa_emp, used for the bound check.
    double lambda = 0.0;
    double eta = 1.0;
    double fitted_rate = 0.0;
    bool a1_pass = false;
    bool a1_empirical_pass = false;
    bool a2_pass = false;
    bool a3_pass = false;
    bool bound_pass = false;
    /// False when the run is too short (or already at equilibrium) to estimate anything.
    bool sufficient_data = false;
    double U = 0.0;
    std::size_t k_max = 0;
    double min_u = 0.0;
    double eps = 0.0;
    double C_p = 0.0;
    /// 1/2 <= gamma <= 1, i.e. 1 <= beta <= alpha + 1.
    bool gamma_in_range = false;
    /// beta >= 1 and (alpha, beta) admissible; filled in by the caller that owns the region scan.
    bool theorem_hypotheses_met = false;
    std::string notes;

    std::string to_key_value() const {
        std::ostringstream os;
        os.precision(17);
        auto b = [](bool x) { return x ? "true" : "false"; };
        os << "C_m_theoretical=" << C_m_theoretical << '\n'
           << "C_M_theoretical=" << C_M_theoretical << '\n'
           << "C_m_empirical=" << C_m_empirical << '\n'
           << "C_M_empirical=" << C_M_empirical << '\n'
           << "kappa_empirical=" << kappa_empirical << '\n'
           << "kappa0_theoretical=" << kappa0_theoretical << '\n'
           << "lambda_theoretical=" << lambda_theoretical << '\n'
           << "lambda=" << lambda << '\n'
           << "eta=" << eta << '\n'
           << "fitted_rate=" << fitted_rate << '\n'
           << "a1_pass=" << b(a1_pass) << '\n'
           << "a1_empirical_pass=" << b(a1_empirical_pass) << '\n'
           << "a2_pass=" << b(a2_pass) << '\n'
           << "a3_pass=" << b(a3_pass) << '\n'
           << "bound_pass=" << b(bound_pass) << '\n'
           << "sufficient_data=" << b(sufficient_data) << '\n'
           << "U=" << U << '\n'
           << "k_max=" << k_max << '\n'
           << "min_u=" << min_u << '\n'
           << "eps=" << eps << '\n'
           << "C_p=" << C_p << '\n'
           << "gamma_in_range=" << b(gamma_in_range) << '\n'
           << "theorem_hypotheses_met=" << b(theorem_hypotheses_met) << '\n'
           << "notes=" << notes << '\n';
        return os.str();
    }
};

struct CertificateOptions {
    double eps = 0.25;
    /// Relative slack of the A1 sandwich.
    double a1_slack = 1e-8;
    /// A3 is reported as H(k_max) <= a3_tol * H(0).
    double a3_tol = 1e-3;
    /// Relative slack of the decay bound.
    double bound_slack = 1e-8;
};

/// Builds the certificate from per-step records. `min_u` is the minimum of u
/// over all nodes and recorded steps; U is the reference mass used for the
/// relative entropy in the records.
inline DecayCertificate build_certificate(std::span<const FunctionalRecord> records,
                                          const SchemeParams& params, const GridSpec& grid,
                                          double U, double min_u,
                                          const CertificateOptions& opts = {}) {
    if (records.empty()) throw std::invalid_argument("build_certificate: no records");
    DecayCertificate cert;
    cert.U = U;
    cert.k_max = records.size() - 1;
    cert.min_u = min_u;
    cert.eps = opts.eps;
    cert.C_p = poincare_discrete(grid);
    const double gamma = gamma_exponent(params.alpha, params.beta);
    cert.gamma_in_range = gamma >= 0.5 && gamma <= 1.0;

    const A1Constants theo = a1_constants(params.alpha, params.beta);
    cert.C_m_theoretical = theo.C_m;
    cert.C_M_theoretical = theo.C_M;
    cert.kappa0_theoretical =
        kappa0_theoretical(params.alpha, params.beta, opts.eps, cert.C_p, min_u);
    cert.lambda_theoretical = theo.C_m / theo.C_M * cert.kappa0_theoretical;
    if (!theo.ordered) cert.notes += "C_m>C_M;";

    if (records.size() < 2) {
        cert.notes += "insufficient data (no steps);";
        return cert;
    }

    const A1Check a1 = check_a1(records, theo.C_m, theo.C_M, opts.a1_slack);
    cert.a1_pass = a1.pass;

    std::vector<double> F(records.size()), H(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        F[k] = records[k].fisher_F;
        H[k] = records[k].rel_entropy;
    }

    if (a1.checked == 0) {
        cert.notes += "insufficient data (Fisher information at floor);";
        cert.a1_empirical_pass = a1.pass;
        return cert;
    }
    cert.sufficient_data = true;
    cert.C_m_empirical = a1.min_ratio;
    cert.C_M_empirical = a1.max_ratio;
    cert.a1_empirical_pass =
        check_a1(records, cert.C_m_empirical, cert.C_M_empirical, opts.a1_slack).pass;

    cert.kappa_empirical = estimate_kappa(F, params.tau);
    cert.a2_pass = cert.kappa_empirical > 0.0;
    cert.a3_pass = H.back() <= opts.a3_tol * H.front();

    if (cert.a2_pass && cert.C_m_empirical > 0.0 && H.front() > 0.0) {
        const DecayParams dp =
            decay_params(cert.C_m_empirical, cert.C_M_empirical, cert.kappa_empirical, params.tau);
        cert.lambda = dp.lambda;
        cert.eta = dp.eta;
        cert.bound_pass = verify_decay_bound(H, dp.lambda, dp.eta, params.tau, opts.bound_slack).pass;
    } else {
        cert.notes += "decay bound not evaluated;";
    }

    // Fit over the first half of the run, where H is well above the noise floor.
    const std::size_t half = std::max<std::size_t>(2, records.size() / 2 + 1);
    std::vector<double> head;
    for (std::size_t k = 0; k < std::min(half, H.size()) && H[k] > 0.0; ++k) head.push_back(H[k]);
    if (head.size() >= 2) cert.fitted_rate = fit_rate(head, params.tau);
    return cert;
}

}  // namespace dbe
