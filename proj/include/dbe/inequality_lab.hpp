#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dbe/grid.hpp"

namespace dbe::ineq {

struct ABPoint {
    double A = 0.0;
    double B = 0.0;
    friend bool operator==(const ABPoint&, const ABPoint&) = default;
};

/// A > 0 and (2A - B - 1)(A + B - 2) < 0.
inline bool rc_membership(ABPoint ab) {
    return ab.A > 0.0 && (2.0 * ab.A - ab.B - 1.0) * (ab.A + ab.B - 2.0) < 0.0;
}

/// Closure of the continuous region with an absolute slack on the product.
inline bool rc_closure_membership(ABPoint ab, double slack) {
    return ab.A > 0.0 && (2.0 * ab.A - ab.B - 1.0) * (ab.A + ab.B - 2.0) <= slack;
}

/// -A(2A - B - 1)/(A + B - 2), or A on the line A + B = 2. No cap.
inline double kappa_c_uncapped(ABPoint ab) {
    const double s = ab.A + ab.B - 2.0;
    const bool on_line = s == 0.0 && ab.A > 0.0;
    if (!rc_membership(ab) && !on_line) {
        throw std::domain_error("kappa_c: (A,B) outside the continuous admissible region");
    }
    if (on_line) return ab.A;
    return -ab.A * (2.0 * ab.A - ab.B - 1.0) / s;
}

/// Largest kappa for which the biquadratic form can be made nonnegative.
/// The closed-form value exceeds A when (A - 1)(A + B - 2) < 0; the
/// leading coefficient A - kappa then turns negative, so the value is capped at A.
inline double kappa_c(ABPoint ab) { return std::min(kappa_c_uncapped(ab), ab.A); }

/// c = -(1/3)(A(A-1) - (2/3)(A - kappa)(A + B - 2)), which expands to
/// -(A/9)(A - 2B + 1) - (2/9) kappa (A + B - 2). The factored form is exact
/// on A = kappa = 1.
inline double c_shift(ABPoint ab, double kappa) {
    return -(ab.A * (ab.A - 1.0) - 2.0 / 3.0 * (ab.A - kappa) * (ab.A + ab.B - 2.0)) / 3.0;
}

/// Sum of the absolute values of the terms in c_shift, used as a rounding scale.
inline double c_shift_magnitude(ABPoint ab, double kappa) {
    return (std::abs(ab.A) * (std::abs(ab.A) + 1.0) +
            2.0 / 3.0 * (std::abs(ab.A) + std::abs(kappa)) * (std::abs(ab.A) + std::abs(ab.B) + 2.0)) /
           3.0;
}

struct QuadraticForm {
    double a;  // coefficient of xi2^2
    double b;  // coefficient of xi2 xi1^2
    double e;  // coefficient of xi1^4
    double operator()(double xi1, double xi2) const {
        const double t = xi1 * xi1;
        return a * xi2 * xi2 + b * xi2 * t + e * t * t;
    }
};

inline QuadraticForm quadratic_form(ABPoint ab, double kappa, double c) {
    return {ab.A - kappa, ab.A * ab.A - ab.A + 3.0 * c, c * (ab.A + ab.B - 2.0)};
}

/// Nonnegativity of (A - kappa) x^2 + (A^2 - A + 3c) x t + c(A + B - 2) t^2 over
/// all real x and t >= 0; since (x, t) -> (-x, -t) leaves the form unchanged this
/// is positive semidefiniteness of the 2x2 symmetric matrix. `tol` is relative
/// to the coefficient magnitudes.
inline bool quadratic_form_check(ABPoint ab, double kappa, double c, double tol = 1e-12) {
    const QuadraticForm q = quadratic_form(ab, kappa, c);
    const double m = std::max({std::abs(ab.A) + std::abs(kappa), ab.A * ab.A + std::abs(ab.A) + 3.0 * std::abs(c),
                               std::abs(c) * (std::abs(ab.A) + std::abs(ab.B) + 2.0), 1e-300});
    if (q.a < -tol * m || q.e < -tol * m) return false;
    return q.b * q.b - 4.0 * std::max(q.a, 0.0) * std::max(q.e, 0.0) <= tol * m * m;
}

// ---------------------------------------------------------------------------
// Mean values and the pointwise function T(X, Y)
// ---------------------------------------------------------------------------

enum class MeanKind { arithmetic, geometric, canonical };

inline std::string_view to_string(MeanKind k) {
    switch (k) {
        case MeanKind::arithmetic: return "arithmetic";
        case MeanKind::geometric: return "geometric";
        case MeanKind::canonical: return "canonical";
    }
    return "?";
}

/// Symmetric, 1-homogeneous mean with M(x, x) = x. The canonical choice only
/// appears with a vanishing exponent, so any mean would do; it returns the
/// arithmetic mean.
inline double mean_value(double x, double y, MeanKind kind) {
    if (!(x >= 0.0) || !(y >= 0.0)) throw std::invalid_argument("mean_value: arguments must be >= 0");
    if (kind == MeanKind::geometric) return std::sqrt(x * y);
    return 0.5 * (x + y);
}

/// How the shift constant c is chosen in region scans.
enum class ShiftRule {
    /// c = c_shift(ab, kappa_c(ab)) where kappa_c is defined, else c_shift(ab, eps A).
    kappa_c,
    /// c = c_shift(ab, eps A).
    kappa,
};

inline double canonical_rho(ABPoint ab) { return (ab.A + ab.B + 1.0) / 3.0; }

struct InequalityConfig {
    ABPoint ab;
    double kappa = 0.0;
    double eps = 1.0;
    double c = 0.0;
    double rho = 0.0;
    MeanKind mean = MeanKind::canonical;
    /// Set when c was supplied explicitly instead of derived from the shift rule.
    bool c_overridden = false;
    /// Rounding scale of c (sum of magnitudes of its terms).
    double c_magnitude = 0.0;

    static InequalityConfig make(ABPoint ab, double eps, ShiftRule rule = ShiftRule::kappa_c) {
        if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("InequalityConfig: eps must lie in (0, 1]");
        if (!std::isfinite(ab.A) || !std::isfinite(ab.B)) {
            throw std::invalid_argument("InequalityConfig: A and B must be finite");
        }
        InequalityConfig cfg;
        cfg.ab = ab;
        cfg.eps = eps;
        cfg.kappa = eps * ab.A;
        if (cfg.kappa < 0.0) throw std::invalid_argument("InequalityConfig: kappa = eps A must be >= 0");
        double kappa_for_c = cfg.kappa;
        if (rule == ShiftRule::kappa_c) {
            const bool on_line = ab.A + ab.B - 2.0 == 0.0 && ab.A > 0.0;
            if (rc_membership(ab) || on_line) kappa_for_c = kappa_c(ab);
        }
        cfg.c = c_shift(ab, kappa_for_c);
        cfg.c_magnitude = c_shift_magnitude(ab, kappa_for_c);
        cfg.rho = canonical_rho(ab);
        return cfg;
    }

    InequalityConfig with_c(double c_value) const {
        InequalityConfig out = *this;
        out.c = c_value;
        out.c_magnitude = std::abs(c_value);
        out.c_overridden = true;
        return out;
    }

    InequalityConfig with_kappa(double kappa_value) const {
        if (!(kappa_value >= 0.0)) throw std::invalid_argument("InequalityConfig: kappa must be >= 0");
        InequalityConfig out = *this;
        out.kappa = kappa_value;
        return out;
    }

    /// Non-canonical rho with an explicit mean function.
    InequalityConfig with_mean(MeanKind kind, double rho_value) const {
        InequalityConfig out = *this;
        out.mean = kind;
        out.rho = rho_value;
        out.validate();
        return out;
    }

    /// Exponent A + B + 1 - 3 rho of the mean factor. Values within rounding of
    /// zero are returned as exactly zero, so rho = canonical_rho(ab) with any mean
    /// reproduces the canonical T bit for bit.
    double mean_exponent() const {
        if (mean == MeanKind::canonical) return 0.0;
        const double e = ab.A + ab.B + 1.0 - 3.0 * rho;
        const double scale = std::abs(ab.A) + std::abs(ab.B) + 1.0 + 3.0 * std::abs(rho);
        return std::abs(e) <= 8.0 * std::numeric_limits<double>::epsilon() * scale ? 0.0 : e;
    }

    void validate() const {
        if (!(kappa >= 0.0)) throw std::invalid_argument("InequalityConfig: kappa must be >= 0");
        if (!std::isfinite(c)) throw std::invalid_argument("InequalityConfig: c must be finite");
        if (mean == MeanKind::canonical) {
            if (rho != canonical_rho(ab)) {
                throw std::invalid_argument("InequalityConfig: canonical mean requires rho = (A+B+1)/3");
            }
        } else if (!(rho > 0.0) || !std::isfinite(rho)) {
            throw std::invalid_argument("InequalityConfig: rho must be positive");
        }
    }
};

namespace detail {

/// (X^rho - 1)/rho from log X, with the rho -> 0 limit log X.
inline double rho_difference(double logx, double rho) {
    if (std::abs(rho) < 1e-12) return logx;
    return std::expm1(rho * logx) / rho;
}

/// Shift contribution M(X,1)^e ((X^rho - 1)/rho)^3 for a single argument.
inline double shift_term(double X, double logx, const InequalityConfig& cfg) {
    const double d = rho_difference(logx, cfg.rho);
    double out = d * d * d;
    const double e = cfg.mean_exponent();
    if (e != 0.0) out *= std::pow(mean_value(X, 1.0, cfg.mean), e);
    return out;
}

/// min{1, X^p} evaluated in the log domain, so X -> 0 with p < 0 saturates at 1.
inline double capped_power(double logx, double p) {
    const double z = p * logx;
    return z >= 0.0 ? 1.0 : std::exp(z);
}

}  // namespace detail

/// The three terms of T plus magnitude bounds used for rounding-aware comparisons.
struct TTerms {
    double first;     // (X^A + Y^A - 2)(X + Y - 2)
    double shift;     // c (s(X) + s(Y))
    double min_term;  // kappa min{1, X^{A+B-1}, Y^{A+B-1}} (X + Y - 2)^2
    /// Magnitude bound for first + shift, taken before any cancellation.
    double scale12;
    /// min{1, X^{A+B-1}, Y^{A+B-1}}.
    double weight;
    /// (X + Y - 2)^2 and its cancellation-free bound (|X - 1| + |Y - 1|)^2.
    double d2;
    double d2_bound;

    double value() const { return first + shift - min_term; }
};

/// Per-argument precomputation shared by t_terms and the scanner.
struct TArg {
    double offset;  // X - 1
    double pow_a;   // X^A - 1
    double shift;   // s(X)
    double q;       // min{1, X^{A+B-1}}
};

inline TArg t_arg(double X, const InequalityConfig& cfg) {
    const double L = std::log(X);
    return {X - 1.0, std::expm1(cfg.ab.A * L), detail::shift_term(X, L, cfg),
            detail::capped_power(L, cfg.ab.A + cfg.ab.B - 1.0)};
}

inline TTerms t_terms_from(const TArg& x, const TArg& y, const InequalityConfig& cfg) {
    const double d = x.offset + y.offset;
    const double dm = std::abs(x.offset) + std::abs(y.offset);
    const double weight = std::min(x.q, y.q);
    TTerms t;
    t.first = (x.pow_a + y.pow_a) * d;
    t.shift = cfg.c * (x.shift + y.shift);
    t.weight = weight;
    t.d2 = d * d;
    t.d2_bound = dm * dm;
    t.min_term = cfg.kappa * (weight * t.d2);
    t.scale12 = (std::abs(x.pow_a) + std::abs(y.pow_a)) * dm +
                cfg.c_magnitude * (std::abs(x.shift) + std::abs(y.shift));
    return t;
}

/// T < -tol * scale, arranged so that the right-hand side is kappa times a
/// kappa-independent factor; larger kappa can then only add violations.
inline bool t_violates(const TTerms& t, double kappa, double tol) {
    const double lhs = (t.first + t.shift) + tol * t.scale12;
    const double w = t.weight * t.d2 - tol * (t.weight * t.d2_bound);
    return lhs < kappa * w;
}

inline TTerms t_terms(double X, double Y, const InequalityConfig& cfg) {
    if (!(X > 0.0) || !(Y > 0.0)) throw std::domain_error("t_value: X and Y must be positive");
    return t_terms_from(t_arg(X, cfg), t_arg(Y, cfg), cfg);
}

/// T(X, Y) with the configured kappa, c, rho and mean.
inline double t_value(double X, double Y, const InequalityConfig& cfg) {
    return t_terms(X, Y, cfg).value();
}

// ---------------------------------------------------------------------------
// Scanning T over a truncated (X, Y) domain
// ---------------------------------------------------------------------------

/// Log-spaced points on [lo, hi] plus a uniform patch 1 +- patch_halfwidth and
/// the point 1 itself, sorted and deduplicated.
struct XYDomain {
    double lo = 1e-3;
    double hi = 1e3;
    std::size_t log_points = 400;
    std::size_t patch_points = 201;
    double patch_halfwidth = 0.2;

    void validate() const {
        if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("XYDomain: need 0 < lo < hi");
        if (log_points < 2) throw std::invalid_argument("XYDomain: need at least 2 log points");
        if (patch_points == 1) throw std::invalid_argument("XYDomain: patch needs 0 or >= 2 points");
        if (patch_points > 0 && !(patch_halfwidth > 0.0 && 1.0 - patch_halfwidth > lo &&
                                  1.0 + patch_halfwidth < hi)) {
            throw std::invalid_argument("XYDomain: patch must lie inside (lo, hi)");
        }
    }

    std::vector<double> points() const {
        validate();
        std::vector<double> g;
        g.reserve(log_points + patch_points + 1);
        const double a = std::log(lo), b = std::log(hi);
        for (std::size_t i = 0; i < log_points; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(log_points - 1);
            g.push_back(i + 1 == log_points ? hi : (i == 0 ? lo : std::exp(a + (b - a) * t)));
        }
        for (std::size_t i = 0; i < patch_points; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(patch_points - 1);
            g.push_back(1.0 - patch_halfwidth + 2.0 * patch_halfwidth * t);
        }
        if (lo <= 1.0 && 1.0 <= hi) g.push_back(1.0);
        std::sort(g.begin(), g.end());
        g.erase(std::unique(g.begin(), g.end()), g.end());
        return g;
    }
};

enum class Verdict { admissible, inadmissible, boundary_suspect };

inline std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::admissible: return "admissible";
        case Verdict::inadmissible: return "inadmissible";
        case Verdict::boundary_suspect: return "boundary_suspect";
    }
    return "?";
}

struct ScanResult {
    /// Minimum of T over the grid and where it occurs.
    double min_T = std::numeric_limits<double>::infinity();
    double argmin_X = 1.0;
    double argmin_Y = 1.0;
    /// Minimum of T/scale (0 where scale vanishes) and where it occurs; scale is
    /// the sum of the magnitudes of all terms before cancellation.
    double min_margin = std::numeric_limits<double>::infinity();
    double margin_X = 1.0;
    double margin_Y = 1.0;
    /// Some grid point has T < -tol * scale.
    bool violated = false;
    /// The worst relative margin sits on the truncation edge and is strictly
    /// below every interior margin.
    bool boundary_flag = false;

    Verdict verdict() const {
        if (violated) return Verdict::inadmissible;
        return boundary_flag ? Verdict::boundary_suspect : Verdict::admissible;
    }
};

inline ScanResult scan_t_min_on(const InequalityConfig& cfg, std::span<const double> grid, double tol) {
    const std::size_t n = grid.size();
    if (n == 0) throw std::invalid_argument("scan_t_min: empty grid");
    std::vector<TArg> args(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(grid[i] > 0.0)) throw std::domain_error("scan_t_min: grid points must be positive");
        args[i] = t_arg(grid[i], cfg);
    }
    ScanResult out;
    double edge_margin = std::numeric_limits<double>::infinity();
    double inner_margin = std::numeric_limits<double>::infinity();
    std::size_t mi = 0, mj = 0;
    // T is symmetric in (X, Y), so the upper triangle suffices.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const TTerms t = t_terms_from(args[i], args[j], cfg);
            const double value = t.value();
            if (t_violates(t, cfg.kappa, tol)) out.violated = true;
            if (value < out.min_T) {
                out.min_T = value;
                out.argmin_X = grid[i];
                out.argmin_Y = grid[j];
            }
            const double scale = t.scale12 + cfg.kappa * (t.weight * t.d2_bound);
            const double margin = scale > 0.0 ? value / scale : 0.0;
            const bool edge = i == 0 || j == 0 || i + 1 == n || j + 1 == n;
            if (edge) {
                edge_margin = std::min(edge_margin, margin);
            } else {
                inner_margin = std::min(inner_margin, margin);
            }
            if (margin < out.min_margin) {
                out.min_margin = margin;
                mi = i;
                mj = j;
            }
        }
    }
    out.margin_X = grid[mi];
    out.margin_Y = grid[mj];
    out.boundary_flag = edge_margin < inner_margin;
    return out;
}

inline ScanResult scan_t_min(const InequalityConfig& cfg, const XYDomain& domain = {}, double tol = 1e-9) {
    cfg.validate();
    const std::vector<double> g = domain.points();
    return scan_t_min_on(cfg, g, tol);
}

// ---------------------------------------------------------------------------
// Region scans in (A, B) and (alpha, beta)
// ---------------------------------------------------------------------------

/// Axis range `lo:hi:count`, sampled at lo + (hi - lo) i / count for i = 1..count.
struct AxisRange {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t count = 1;

    void validate() const {
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
            throw std::invalid_argument("AxisRange: need finite lo < hi");
        }
        if (count == 0) throw std::invalid_argument("AxisRange: count must be >= 1");
    }

    double at(std::size_t i) const {
        return lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(count);
    }

    std::vector<double> points() const {
        validate();
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = at(i);
        return out;
    }

    static AxisRange parse(std::string_view text) {
        const auto c1 = text.find(':');
        const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
        if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
            text.find(':', c2 + 1) != std::string_view::npos) {
            throw std::invalid_argument("range '" + std::string(text) + "' must have the form lo:hi:count");
        }
        auto num = [&](std::string_view s) {
            try {
                std::size_t used = 0;
                const std::string str(s);
                const double v = std::stod(str, &used);
                if (used != str.size()) throw std::invalid_argument("");
                return v;
            } catch (const std::exception&) {
                throw std::invalid_argument("range '" + std::string(text) + "': bad number '" +
                                            std::string(s) + "'");
            }
        };
        AxisRange r;
        r.lo = num(text.substr(0, c1));
        r.hi = num(text.substr(c1 + 1, c2 - c1 - 1));
        const std::string_view cnt = text.substr(c2 + 1);
        std::size_t count = 0;
        const auto res = std::from_chars(cnt.data(), cnt.data() + cnt.size(), count);
        if (res.ec != std::errc{} || res.ptr != cnt.data() + cnt.size()) {
            throw std::invalid_argument("range '" + std::string(text) + "': bad count '" + std::string(cnt) + "'");
        }
        r.count = count;
        r.validate();
        return r;
    }
};

/// A = 2 beta/(alpha + beta - 1), B = (alpha + beta - 3)/(alpha + beta - 1).
inline ABPoint map_ab(double alpha, double beta) {
    const double s = alpha + beta - 1.0;
    if (s == 0.0) throw std::domain_error("map_ab: alpha + beta = 1");
    return {2.0 * beta / s, (alpha + beta - 3.0) / s};
}

/// alpha + beta > 1 and -1 < alpha - beta < 2.
inline bool sc_membership(double alpha, double beta) {
    const double d = alpha - beta;
    return alpha + beta > 1.0 && d > -1.0 && d < 2.0;
}

inline bool sc_closure_membership(double alpha, double beta, double slack) {
    const double d = alpha - beta;
    return alpha + beta > 1.0 && d >= -1.0 - slack && d <= 2.0 + slack;
}

struct ScanOptions {
    XYDomain domain;
    double tol = 1e-9;
    /// Worker threads; 0 means hardware concurrency.
    unsigned workers = 0;
    ShiftRule shift = ShiftRule::kappa_c;
};

enum class ScanAxes { ab, alphabeta };

struct RegionCell {
    /// Axis coordinates: (A, B) or (alpha, beta).
    double p = 0.0;
    double q = 0.0;
    /// Mapped point; absent where the (alpha, beta) map is undefined.
    std::optional<ABPoint> ab;
    ScanResult result;
    Verdict verdict = Verdict::inadmissible;

    /// Any verdict other than a found violation.
    bool admissible() const { return verdict != Verdict::inadmissible; }
};

struct RegionScan {
    ScanAxes axes = ScanAxes::ab;
    AxisRange first;
    AxisRange second;
    double eps = 0.25;
    ScanOptions options;
    /// Row-major: cell (i, j) at index i * second.count + j.
    std::vector<RegionCell> cells;

    const RegionCell& at(std::size_t i, std::size_t j) const { return cells.at(i * second.count + j); }

    void write_csv(std::ostream& os) const {
        const char* h1 = axes == ScanAxes::ab ? "A" : "alpha";
        const char* h2 = axes == ScanAxes::ab ? "B" : "beta";
        os << h1 << ',' << h2 << ",min_T,verdict,boundary_flag\n";
        char buf[64];
        auto put = [&](double x) {
            const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
            os.write(buf, r.ptr - buf);
        };
        for (const RegionCell& c : cells) {
            put(c.p);
            os << ',';
            put(c.q);
            os << ',';
            put(c.result.min_T);
            os << ',' << to_string(c.verdict) << ',' << (c.result.boundary_flag ? 1 : 0) << '\n';
        }
    }
};

namespace detail {

template <class CellFn>
void parallel_cells(std::size_t total, unsigned workers, CellFn&& fn) {
    unsigned w = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
    w = static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(total, 1)));
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < total;) fn(k);
    };
    if (w <= 1) {
        body();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(w);
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&] {
            try {
                body();
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                next.store(total);
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline RegionScan run_scan(ScanAxes axes, const AxisRange& r1, const AxisRange& r2, double eps,
                           const ScanOptions& opts) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("region scan: eps must lie in (0, 1]");
    if (!(opts.tol >= 0.0)) throw std::invalid_argument("region scan: tol must be >= 0");
    const std::vector<double> p = r1.points();
    const std::vector<double> q = r2.points();
    const std::vector<double> grid = opts.domain.points();
    RegionScan scan{axes, r1, r2, eps, opts, std::vector<RegionCell>(p.size() * q.size())};
    parallel_cells(scan.cells.size(), opts.workers, [&](std::size_t k) {
        RegionCell& cell = scan.cells[k];
        cell.p = p[k / q.size()];
        cell.q = q[k % q.size()];
        if (axes == ScanAxes::ab) {
            cell.ab = ABPoint{cell.p, cell.q};
        } else if (cell.p + cell.q - 1.0 != 0.0) {
            cell.ab = map_ab(cell.p, cell.q);
        }
        if (!cell.ab || !(cell.ab->A > 0.0)) {
            // kappa = eps A must be positive for the inequality to be meaningful.
            cell.result.min_T = std::numeric_limits<double>::quiet_NaN();
            cell.result.violated = true;
            cell.verdict = Verdict::inadmissible;
            return;
        }
        const InequalityConfig cfg = InequalityConfig::make(*cell.ab, eps, opts.shift);
        cell.result = scan_t_min_on(cfg, grid, opts.tol);
        cell.verdict = cell.result.verdict();
    });
    return scan;
}

}  // namespace detail

/// Admissibility of every (A, B) cell with kappa = eps A.
inline RegionScan region_scan_ab(const AxisRange& A_range, const AxisRange& B_range, double eps,
                                 const ScanOptions& opts = {}) {
    return detail::run_scan(ScanAxes::ab, A_range, B_range, eps, opts);
}

/// Admissibility of every (alpha, beta) cell through map_ab. Cells with
/// alpha + beta = 1 or A <= 0 are inadmissible with min_T = NaN.
inline RegionScan region_scan_alphabeta(const AxisRange& alpha_range, const AxisRange& beta_range,
                                        double eps, const ScanOptions& opts = {}) {
    return detail::run_scan(ScanAxes::alphabeta, alpha_range, beta_range, eps, opts);
}

/// Whether (alpha, beta) satisfies the hypotheses of the decay theorem:
/// alpha > 1, beta >= 1 and the mapped (A, B) passes the T scan.
inline bool theorem_hypotheses_met(double alpha, double beta, double eps, const ScanOptions& opts = {}) {
    if (!(alpha > 1.0) || !(beta >= 1.0)) return false;
    const ABPoint ab = map_ab(alpha, beta);
    if (!(ab.A > 0.0)) return false;
    const InequalityConfig cfg = InequalityConfig::make(ab, eps, opts.shift);
    return scan_t_min(cfg, opts.domain, opts.tol).verdict() != Verdict::inadmissible;
}

// ---------------------------------------------------------------------------
// Vector-level discrete inequality
// ---------------------------------------------------------------------------

struct SbpCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = true;
};

/// lhs = sum_i (D2 w)_i (D2 w^A)_i w_i^B and
/// rhs = kappa sum_i min_{j=i,i+-1} w_j^{A+B-1} (D2 w)_i^2 on a periodic vector.
/// holds = lhs >= rhs - tol * max(|lhs|, |rhs|). Plain left-to-right summation
/// keeps termwise dominance exact in floating point.
inline SbpCheck sbp_inequality_check(std::span<const double> w, ABPoint ab, double kappa, double tol = 0.0) {
    const std::size_t n = w.size();
    if (n < 2) throw std::invalid_argument("sbp_inequality_check: need at least 2 entries");
    if (!(kappa >= 0.0)) throw std::invalid_argument("sbp_inequality_check: kappa must be >= 0");
    bool has_zero = false;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw std::invalid_argument("sbp_inequality_check: entries must be finite and >= 0");
        }
        has_zero = has_zero || x == 0.0;
    }
    const double p = ab.A + ab.B - 1.0;
    if (has_zero && (ab.B < 0.0 || p < 0.0 || !(ab.A > 0.0))) {
        throw std::domain_error("sbp_inequality_check: zero entries need A > 0, B >= 0 and A + B >= 1");
    }
    std::vector<double> wa(n), wb(n), wp(n);
    for (std::size_t i = 0; i < n; ++i) {
        wa[i] = pos_pow(w[i], ab.A);
        wb[i] = pos_pow(w[i], ab.B);
        wp[i] = pos_pow(w[i], p);
    }
    SbpCheck out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = i + 1 == n ? 0 : i + 1;
        const std::size_t im = i == 0 ? n - 1 : i - 1;
        const double d = w[ip] - 2.0 * w[i] + w[im];
        const double da = wa[ip] - 2.0 * wa[i] + wa[im];
        const double m = std::min({wp[i], wp[ip], wp[im]});
        out.lhs += d * da * wb[i];
        out.rhs += kappa * m * (d * d);
    }
    out.holds = out.lhs >= out.rhs - tol * std::max(std::abs(out.lhs), std::abs(out.rhs));
    return out;
}

// ---------------------------------------------------------------------------
// Local expansion near (1, 1)
// ---------------------------------------------------------------------------

struct LocalExpansionReport {
    std::vector<double> h;
    /// T(X, Y)/h^4 at X = 1 + h v + h^2 u/2, Y = 1 - h v + h^2 u/2.
    std::vector<double> scaled;
    std::vector<double> error;
    /// (A - kappa) u^2 + (A(A-1) + 3c) u v^2 + c(A + B - 2) v^4.
    double limit = 0.0;
    /// Least-squares slope of log(error) against log(h); NaN when the errors vanish.
    double observed_order = std::numeric_limits<double>::quiet_NaN();
};

inline LocalExpansionReport local_expansion_check(ABPoint ab, double kappa, double c, double rho, double u,
                                                  double v, std::span<const double> h_values,
                                                  MeanKind mean = MeanKind::canonical) {
    if (h_values.empty()) throw std::invalid_argument("local_expansion_check: no step sizes");
    for (std::size_t k = 0; k < h_values.size(); ++k) {
        if (!(h_values[k] > 0.0)) throw std::invalid_argument("local_expansion_check: h must be positive");
        if (k > 0 && !(h_values[k] < h_values[k - 1])) {
            throw std::invalid_argument("local_expansion_check: h values must be decreasing");
        }
    }
    InequalityConfig cfg;
    cfg.ab = ab;
    cfg.kappa = kappa;
    cfg.c = c;
    cfg.c_magnitude = std::abs(c);
    cfg.c_overridden = true;
    cfg.rho = rho;
    cfg.mean = mean;
    cfg.validate();

    LocalExpansionReport rep;
    const QuadraticForm q = quadratic_form(ab, kappa, c);
    rep.limit = q.a * u * u + q.b * u * v * v + q.e * v * v * v * v;
    for (double h : h_values) {
        const double X = 1.0 + h * v + h * h * u / 2.0;
        const double Y = 1.0 - h * v + h * h * u / 2.0;
        if (!(X > 0.0) || !(Y > 0.0)) throw std::domain_error("local_expansion_check: X or Y not positive");
        // Offsets from 1 are formed directly to avoid cancellation in X - 1.
        const double ox = h * v + h * h * u / 2.0, oy = -h * v + h * h * u / 2.0;
        const double lx = std::log1p(ox), ly = std::log1p(oy);
        TArg ax{ox, std::expm1(ab.A * lx), detail::shift_term(X, lx, cfg), detail::capped_power(lx, ab.A + ab.B - 1.0)};
        TArg ay{oy, std::expm1(ab.A * ly), detail::shift_term(Y, ly, cfg), detail::capped_power(ly, ab.A + ab.B - 1.0)};
        const double T = t_terms_from(ax, ay, cfg).value();
        const double h4 = h * h * h * h;
        rep.h.push_back(h);
        rep.scaled.push_back(T / h4);
        rep.error.push_back(std::abs(T / h4 - rep.limit));
    }
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < rep.h.size(); ++k) {
        if (rep.error[k] > 0.0) {
            lx.push_back(std::log(rep.h[k]));
            ly.push_back(std::log(rep.error[k]));
        }
    }
    if (lx.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < lx.size(); ++k) {
            mx += lx[k];
            my += ly[k];
        }
        mx /= static_cast<double>(lx.size());
        my /= static_cast<double>(lx.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t k = 0; k < lx.size(); ++k) {
            sxy += (lx[k] - mx) * (ly[k] - my);
            sxx += (lx[k] - mx) * (lx[k] - mx);
        }
        rep.observed_order = sxy / sxx;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Continuous decay rate
// ---------------------------------------------------------------------------

/// kappa_c written in (alpha, beta): -4 beta (alpha - beta - 2)/((alpha + beta - 1)(alpha - beta + 1)).
inline double kappa_c_alphabeta(double alpha, double beta) {
    return -4.0 * beta * (alpha - beta - 2.0) / ((alpha + beta - 1.0) * (alpha - beta + 1.0));
}

/// 16 pi^2 alpha beta kappa_c/(alpha + beta - 1) * min_u^{beta - 1}, with
/// kappa_c = kappa_c(map_ab(alpha, beta)) (capped at A). The edge alpha - beta = -1
/// is accepted and uses the degenerate value kappa_c = A.
inline double lambda_c_continuous(double alpha, double beta, double min_u) {
    if (!(beta > 0.0) || beta == 1.0) throw std::domain_error("lambda_c: need beta > 0, beta != 1");
    if (!(alpha + beta - 1.0 > 0.0)) throw std::domain_error("lambda_c: need alpha + beta > 1");
    const double d = alpha - beta;
    if (!(d >= -1.0 && d < 2.0)) throw std::domain_error("lambda_c: need -1 <= alpha - beta < 2");
    if (!(min_u >= 0.0)) throw std::domain_error("lambda_c: min_u must be >= 0");
    if (min_u == 0.0) {
        if (beta < 1.0) throw std::domain_error("lambda_c: min_u = 0 with beta < 1 gives an unbounded rate");
        return 0.0;
    }
    // alpha - beta = -1 is the line A + B = 2, where kappa_c = A; the mapped
    // point need not land on that line exactly in floating point.
    const ABPoint ab = map_ab(alpha, beta);
    const double kc = d == -1.0 ? ab.A : kappa_c(ab);
    return 16.0 * std::numbers::pi * std::numbers::pi * alpha * beta * kc / (alpha + beta - 1.0) *
           std::pow(min_u, beta - 1.0);
}

}  // namespace dbe::ineq
