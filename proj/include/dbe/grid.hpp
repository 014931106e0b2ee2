#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbe {

/// Uniform periodic grid on the unit torus. The cell width is always derived
/// from the cell count, so `n_cells() * h() == 1` up to rounding.
class GridSpec {
public:
    explicit GridSpec(std::size_t n_cells) : n_(n_cells) {
        if (n_cells < 2) {
            throw std::invalid_argument("GridSpec: need at least 2 cells, got " +
                                        std::to_string(n_cells));
        }
    }

    std::size_t n_cells() const noexcept { return n_; }
    double h() const noexcept { return 1.0 / static_cast<double>(n_); }

    /// Node position x_i = i*h (right cell endpoints, i = 1..N stored at index i-1).
    double node(std::size_t index) const noexcept {
        return static_cast<double>(index + 1) * h();
    }

    std::size_t next(std::size_t i) const noexcept { return i + 1 == n_ ? 0 : i + 1; }
    std::size_t prev(std::size_t i) const noexcept { return i == 0 ? n_ - 1 : i - 1; }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;

private:
    std::size_t n_;
};

/// z^p for z >= 0 with the conventions 0^p = 0 (p > 0), 0^0 = 1, 0^p = inf (p < 0).
inline double pos_pow(double z, double p) {
    if (z > 0.0) return std::pow(z, p);
    if (p > 0.0) return 0.0;
    if (p == 0.0) return 1.0;
    return std::numeric_limits<double>::infinity();
}

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

/// Periodic three-point stencil w_{i+1} - 2 w_i + w_{i-1}.
inline std::vector<double> second_difference(std::span<const double> w, const GridSpec& grid) {
    if (w.size() != grid.n_cells()) {
        throw std::invalid_argument("second_difference: vector length " + std::to_string(w.size()) +
                                    " does not match grid size " +
                                    std::to_string(grid.n_cells()));
    }
    const std::size_t n = w.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = w[grid.next(i)] - 2.0 * w[i] + w[grid.prev(i)];
    }
    return out;
}

}  // namespace dbe
