#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dbe::linalg {

/// Solves a periodic tridiagonal system
///   sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]   (indices mod n)
/// by the Thomas algorithm plus a Sherman-Morrison correction for the corners.
/// For n == 2 both neighbours of a node coincide and the couplings are summed.
/// No pivoting; intended for (column) diagonally dominant matrices.
inline std::vector<double> solve_cyclic_tridiagonal(std::span<const double> sub,
                                                    std::span<const double> diag,
                                                    std::span<const double> sup,
                                                    std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (sub.size() != n || sup.size() != n || rhs.size() != n) {
        throw std::invalid_argument("solve_cyclic_tridiagonal: size mismatch");
    }
    if (n < 2) throw std::invalid_argument("solve_cyclic_tridiagonal: need n >= 2");

    if (n == 2) {
        const double a00 = diag[0], a01 = sub[0] + sup[0];
        const double a10 = sub[1] + sup[1], a11 = diag[1];
        const double det = a00 * a11 - a01 * a10;
        if (det == 0.0) throw std::runtime_error("solve_cyclic_tridiagonal: singular 2x2 system");
        return {(rhs[0] * a11 - a01 * rhs[1]) / det, (a00 * rhs[1] - a10 * rhs[0]) / det};
    }

    auto thomas = [&](std::span<const double> b, std::span<const double> r) {
        std::vector<double> cp(n), x(n);
        double denom = b[0];
        if (denom == 0.0) throw std::runtime_error("solve_cyclic_tridiagonal: zero pivot");
        cp[0] = sup[0] / denom;
        x[0] = r[0] / denom;
        for (std::size_t i = 1; i < n; ++i) {
            denom = b[i] - sub[i] * cp[i - 1];
            if (denom == 0.0) throw std::runtime_error("solve_cyclic_tridiagonal: zero pivot");
            cp[i] = (i + 1 < n) ? sup[i] / denom : 0.0;
            x[i] = (r[i] - sub[i] * x[i - 1]) / denom;
        }
        for (std::size_t i = n - 1; i-- > 0;) x[i] -= cp[i] * x[i + 1];
        return x;
    };

    // Corner entries: A[0][n-1] = sub[0], A[n-1][0] = sup[n-1].
    const double corner_top = sub[0];
    const double corner_bottom = sup[n - 1];
    const double gamma = -diag[0];

    std::vector<double> b(diag.begin(), diag.end());
    b[0] -= gamma;
    b[n - 1] -= corner_bottom * corner_top / gamma;

    const std::vector<double> x = thomas(b, rhs);

    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = corner_bottom;
    const std::vector<double> z = thomas(b, u);

    const double fact = (x[0] + corner_top * x[n - 1] / gamma) /
                        (1.0 + z[0] + corner_top * z[n - 1] / gamma);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - fact * z[i];
    return out;
}

}  // namespace dbe::linalg
