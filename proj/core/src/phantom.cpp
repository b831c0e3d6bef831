#include "lddm/phantom.hpp"

#include <array>
#include <cmath>
#include <random>

#include "lddm/error.hpp"

namespace lddm {

namespace {

struct Blob {
    Vec2 center;
    double width;
    double amplitude;
};

// Uniform in [-1, 1) from the raw 64-bit stream, independent of the
// standard library's distribution implementations.
double jitter(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
}

struct Subject {
    std::array<Blob, 6> blobs;
    Vec2 head_center;
    Vec2 head_axes;
};

Subject make_subject(int size, std::uint64_t seed, double outward_shift) {
    std::mt19937_64 rng(seed);
    const double n = size;
    const double cx = 0.5 * (n - 1.0);
    const double cy = 0.5 * (n - 1.0);
    // Left-hemisphere template positions (fractions of the size); mirrored to the right.
    const std::array<Vec2, 3> layout = {Vec2{0.22, -0.20}, Vec2{0.24, 0.02}, Vec2{0.18, 0.22}};
    const std::array<double, 3> widths = {0.055, 0.065, 0.05};
    const std::array<double, 3> amplitudes = {0.55, 0.6, 0.5};

    Subject s;
    s.head_center = {cx, cy};
    s.head_axes = {0.40 * n + outward_shift, 0.44 * n};
    for (std::size_t b = 0; b < layout.size(); ++b) {
        for (int side = 0; side < 2; ++side) {
            const double sign = side == 0 ? -1.0 : 1.0;
            Blob blob;
            blob.center.x = cx + sign * (layout[b].x * n + outward_shift) + 0.01 * n * jitter(rng);
            blob.center.y = cy + layout[b].y * n + 0.01 * n * jitter(rng);
            blob.width = widths[b] * n * (1.0 + 0.05 * jitter(rng));
            blob.amplitude = amplitudes[b] * (1.0 + 0.05 * jitter(rng));
            s.blobs[2 * b + static_cast<std::size_t>(side)] = blob;
        }
    }
    return s;
}

Image render(const Subject &s, const Grid2D &grid) {
    Image img(grid);
    for (int j = 0; j < grid.height(); ++j) {
        for (int i = 0; i < grid.width(); ++i) {
            const double ex = (i - s.head_center.x) / s.head_axes.x;
            const double ey = (j - s.head_center.y) / s.head_axes.y;
            const double r = std::sqrt(ex * ex + ey * ey);
            // Soft head boundary about 1.5 px wide.
            const double edge = (1.0 - r) * std::min(s.head_axes.x, s.head_axes.y) / 1.5;
            double value = 0.3 / (1.0 + std::exp(-edge));
            for (const Blob &b : s.blobs) {
                const double dx = i - b.center.x;
                const double dy = j - b.center.y;
                value += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.width * b.width));
            }
            img(i, j) = std::min(value, 1.0);
        }
    }
    return img;
}

} // namespace

Phantom make_phantom(const PhantomOptions &options) {
    if (options.size < 32) {
        throw Error(ErrorKind::invalid_argument, "phantom: size must be >= 32");
    }
    const Grid2D grid(options.size, options.size, 1.0);
    const Subject a = make_subject(options.size, options.seed, 0.0);
    const Subject b = make_subject(options.size, options.seed ^ 0x9E3779B97F4A7C15ull, 0.035 * options.size);

    Phantom ph;
    ph.source_clean = render(a, grid);
    ph.target = render(b, grid);
    ph.source = ph.source_clean;
    ph.lesion = Mask(grid);
    // Middle left blob.
    ph.lesion_center = a.blobs[2].center;
    ph.lesion_radius = 0.09 * options.size;
    if (options.lesion) {
        for (int j = 0; j < grid.height(); ++j) {
            for (int i = 0; i < grid.width(); ++i) {
                const double dx = i - ph.lesion_center.x;
                const double dy = j - ph.lesion_center.y;
                if (dx * dx + dy * dy <= ph.lesion_radius * ph.lesion_radius) {
                    ph.lesion.set(i, j, true);
                    ph.source(i, j) = 0.0;
                }
            }
        }
    }
    ph.lesion_dilated = dilate(ph.lesion, options.dilations);
    return ph;
}

} // namespace lddm
