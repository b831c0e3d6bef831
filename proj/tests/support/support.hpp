#pragma once

// Fixtures and independent oracles shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lddm/grid.hpp"
#include "lddm/kernels.hpp"

namespace lddm::test {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    // Uniform in [lo, hi) from the top 53 bits.
    double uniform(double lo = -1.0, double hi = 1.0) {
        return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 engine_;
};

inline VectorField random_field(const Grid2D &g, Rng &rng, double amplitude = 1.0) {
    VectorField f(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        f.ux()[k] = amplitude * rng.uniform();
        f.uy()[k] = amplitude * rng.uniform();
    }
    return f;
}

inline Image random_image(const Grid2D &g, Rng &rng) {
    Image img(g);
    for (double &v : img.data()) {
        v = rng.uniform(0.0, 1.0);
    }
    return img;
}

// Gaussian-smoothed noise rescaled so max |component| = max_abs.
inline VectorField smooth_random_field(const Grid2D &g, Rng &rng, double max_abs_value, double sigma) {
    const VectorField noise = random_field(g, rng);
    Image ux(g), uy(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        ux.data()[k] = noise.ux()[k];
        uy.data()[k] = noise.uy()[k];
    }
    ux = gaussian_smooth(ux, sigma);
    uy = gaussian_smooth(uy, sigma);
    VectorField f(g);
    double m = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        f.ux()[k] = ux.data()[k];
        f.uy()[k] = uy.data()[k];
        m = std::max({m, std::abs(ux.data()[k]), std::abs(uy.data()[k])});
    }
    f *= max_abs_value / m;
    return f;
}

// amplitude * exp(-|x - c|^2 / (2 s^2)) with c, s in pixel units.
inline VectorField bump_field(const Grid2D &g, Vec2 center, double sigma_px, Vec2 amplitude) {
    VectorField f(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const double dx = i - center.x;
            const double dy = j - center.y;
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_px * sigma_px));
            f.set(i, j, w * amplitude);
        }
    }
    return f;
}

inline Image blob_image(const Grid2D &g, Vec2 center, double sigma_px) {
    Image img(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const double dx = i - center.x;
            const double dy = j - center.y;
            img(i, j) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_px * sigma_px));
        }
    }
    return img;
}

// Direct O(N^2) evaluation of sum_y a exp(-|x - y|^2 / (2 sigma^2)) p(y),
// no truncation, physical distances.
inline VectorField dense_gaussian(const VectorField &p, double sigma, double amplitude = 1.0) {
    const Grid2D &g = p.grid();
    VectorField out(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            double sx = 0.0, sy = 0.0;
            for (int jj = 0; jj < g.height(); ++jj) {
                for (int ii = 0; ii < g.width(); ++ii) {
                    const double dx = (i - ii) * g.spacing();
                    const double dy = (j - jj) * g.spacing();
                    const double w = amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                    const Vec2 v = p.at(ii, jj);
                    sx += w * v.x;
                    sy += w * v.y;
                }
            }
            out.set(i, j, {sx, sy});
        }
    }
    return out;
}

inline double max_abs(const Image &img) {
    double m = 0.0;
    for (double v : img.data()) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

inline double max_abs_difference(const Image &a, const Image &b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k) {
        m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    }
    return m;
}

} // namespace lddm::test
