#include "lddm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "lddm/error.hpp"

namespace lddm {

namespace {

// exp(-r^2 / 2 sigma^2) drops below 1e-18 beyond this many sigmas, far under
// the precision any caller compares against.
constexpr double truncation_sigmas = 9.2;

std::vector<double> gaussian_taps(double sigma_px, int max_radius) {
    const int radius = std::min(max_radius, static_cast<int>(std::ceil(truncation_sigmas * sigma_px)));
    std::vector<double> taps(static_cast<std::size_t>(radius) + 1);
    for (int d = 0; d <= radius; ++d) {
        taps[static_cast<std::size_t>(d)] = std::exp(-(static_cast<double>(d) * d) / (2.0 * sigma_px * sigma_px));
    }
    return taps;
}

// In-place separable convolution of one row-major scalar plane, zero extension.
void convolve_plane(std::span<double> plane, int width, int height, double sigma_px, std::vector<double> &scratch) {
    const auto taps_x = gaussian_taps(sigma_px, width - 1);
    const auto taps_y = gaussian_taps(sigma_px, height - 1);
    const int rx = static_cast<int>(taps_x.size()) - 1;
    const int ry = static_cast<int>(taps_y.size()) - 1;
    scratch.assign(plane.size(), 0.0);

    // Along x.
    for (int j = 0; j < height; ++j) {
        const double *row = plane.data() + static_cast<std::size_t>(j) * width;
        double *dst = scratch.data() + static_cast<std::size_t>(j) * width;
        for (int i = 0; i < width; ++i) {
            const int lo = std::max(0, i - rx);
            const int hi = std::min(width - 1, i + rx);
            double acc = 0.0;
            for (int k = lo; k <= hi; ++k) {
                acc += taps_x[static_cast<std::size_t>(std::abs(i - k))] * row[k];
            }
            dst[i] = acc;
        }
    }

    // Along y, row-at-a-time so the inner loop is contiguous.
    std::fill(plane.begin(), plane.end(), 0.0);
    for (int j = 0; j < height; ++j) {
        double *dst = plane.data() + static_cast<std::size_t>(j) * width;
        const int lo = std::max(0, j - ry);
        const int hi = std::min(height - 1, j + ry);
        for (int k = lo; k <= hi; ++k) {
            const double w = taps_y[static_cast<std::size_t>(std::abs(j - k))];
            const double *src = scratch.data() + static_cast<std::size_t>(k) * width;
            for (int i = 0; i < width; ++i) {
                dst[i] += w * src[i];
            }
        }
    }
}

VectorField apply_gaussian(const GaussianKernel &k, const VectorField &p) {
    const Grid2D &g = p.grid();
    VectorField out = p;
    std::vector<double> scratch;
    const double sigma_px = k.sigma / g.spacing();
    convolve_plane(out.ux(), g.width(), g.height(), sigma_px, scratch);
    convolve_plane(out.uy(), g.width(), g.height(), sigma_px, scratch);
    if (k.amplitude != 1.0) {
        out *= k.amplitude;
    }
    return out;
}

bool mirror_symmetric(const Image &img) {
    const Grid2D &g = img.grid();
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width() / 2; ++i) {
            if (std::abs(img(i, j) - img(g.width() - 1 - i, j)) > 1e-12) {
                return false;
            }
        }
    }
    return true;
}

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

} // namespace

// ---- construction --------------------------------------------------------

KernelSpec KernelSpec::gaussian(double sigma, double amplitude) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorKind::invalid_argument, "gaussian kernel: sigma must be positive");
    }
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
        throw Error(ErrorKind::invalid_argument, "gaussian kernel: amplitude must be positive");
    }
    return KernelSpec(GaussianKernel{sigma, amplitude});
}

KernelSpec KernelSpec::sum(std::vector<KernelSpec> terms) {
    if (terms.empty()) {
        throw Error(ErrorKind::invalid_argument, "sum kernel: needs at least one term");
    }
    return KernelSpec(SumKernel{std::move(terms)});
}

KernelSpec KernelSpec::symmetrized(double c, KernelSpec inner) {
    if (!(c >= 0.0 && c <= 1.0)) {
        throw Error(ErrorKind::invalid_argument, "symmetrized kernel: c must lie in [0,1]");
    }
    if (!reflection_equivariant(inner)) {
        throw Error(ErrorKind::invalid_argument,
                    "symmetrized kernel: inner kernel does not commute with the reflection");
    }
    return KernelSpec(SymmetrizedKernel{c, std::make_shared<const KernelSpec>(std::move(inner))});
}

KernelSpec KernelSpec::partition(std::vector<std::pair<Image, KernelSpec>> parts) {
    if (parts.empty()) {
        throw Error(ErrorKind::invalid_argument, "partition kernel: needs at least one part");
    }
    const Grid2D &g = parts.front().first.grid();
    std::vector<double> total(g.size(), 0.0);
    PartitionKernel node;
    for (auto &[weights, inner] : parts) {
        require_same_grid(g, weights.grid(), "partition kernel weights");
        const auto w = weights.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (w[k] < -1e-6 || w[k] > 1.0 + 1e-6) {
                throw Error(ErrorKind::invalid_argument, "partition kernel: weight outside [0,1]");
            }
            total[k] += w[k];
        }
        node.parts.push_back({std::move(weights), std::make_shared<const KernelSpec>(std::move(inner))});
    }
    for (double t : total) {
        if (std::abs(t - 1.0) > 1e-6) {
            throw Error(ErrorKind::invalid_argument, "partition kernel: weights do not sum to one");
        }
    }
    return KernelSpec(std::move(node));
}

bool reflection_equivariant(const KernelSpec &spec) {
    return std::visit(overloaded{
                          [](const GaussianKernel &) { return true; },
                          [](const SumKernel &s) {
                              return std::all_of(s.terms.begin(), s.terms.end(),
                                                 [](const KernelSpec &t) { return reflection_equivariant(t); });
                          },
                          [](const SymmetrizedKernel &s) { return reflection_equivariant(*s.inner); },
                          [](const PartitionKernel &pk) {
                              return std::all_of(pk.parts.begin(), pk.parts.end(), [](const PartitionPart &part) {
                                  return mirror_symmetric(part.weights) && reflection_equivariant(*part.inner);
                              });
                          },
                      },
                      spec.node());
}

// ---- operators -----------------------------------------------------------

VectorField reflect(const VectorField &field) {
    const Grid2D &g = field.grid();
    VectorField out(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const Vec2 v = field.at(g.width() - 1 - i, j);
            out.set(i, j, {-v.x, v.y});
        }
    }
    return out;
}

Image reflect(const Image &img) {
    const Grid2D &g = img.grid();
    Image out(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            out(i, j) = img(g.width() - 1 - i, j);
        }
    }
    return out;
}

VectorField apply_kernel(const KernelSpec &spec, const VectorField &p) {
    return std::visit(overloaded{
                          [&](const GaussianKernel &k) { return apply_gaussian(k, p); },
                          [&](const SumKernel &s) {
                              VectorField out = apply_kernel(s.terms.front(), p);
                              for (std::size_t t = 1; t < s.terms.size(); ++t) {
                                  out += apply_kernel(s.terms[t], p);
                              }
                              return out;
                          },
                          [&](const SymmetrizedKernel &s) {
                              VectorField kp = apply_kernel(*s.inner, p);
                              if (s.c == 0.0) {
                                  return kp;
                              }
                              VectorField mirrored = reflect(kp);
                              if (s.c != 1.0) {
                                  mirrored *= s.c;
                              }
                              kp += mirrored;
                              return kp;
                          },
                          [&](const PartitionKernel &pk) {
                              std::optional<VectorField> out;
                              for (const auto &part : pk.parts) {
                                  require_same_grid(part.weights.grid(), p.grid(), "partition kernel");
                                  VectorField term =
                                      multiply(part.weights, apply_kernel(*part.inner, multiply(part.weights, p)));
                                  if (out) {
                                      *out += term;
                                  } else {
                                      out = std::move(term);
                                  }
                              }
                              return std::move(*out);
                          },
                      },
                      spec.node());
}

double vnorm_sq(const KernelSpec &spec, const VectorField &p) {
    const double value = l2_inner(p, apply_kernel(spec, p));
    const double p_sq = l2_inner(p, p);
    if (value < -1e-9 * p_sq) {
        throw Error(ErrorKind::not_psd, "vnorm_sq: negative squared norm " + std::to_string(value));
    }
    return value;
}

Image gaussian_smooth(const Image &img, double sigma) {
    if (!(sigma > 0.0)) {
        return img;
    }
    Image out = img;
    std::vector<double> scratch;
    const Grid2D &g = img.grid();
    convolve_plane(out.data(), g.width(), g.height(), sigma / g.spacing(), scratch);
    return out;
}

std::vector<Image> make_partition_weights(const std::vector<Mask> &masks, double blur_sigma) {
    if (masks.empty()) {
        throw Error(ErrorKind::invalid_argument, "make_partition_weights: no masks");
    }
    const Grid2D &g = masks.front().grid();
    std::vector<Image> blurred;
    blurred.reserve(masks.size());
    for (const auto &m : masks) {
        require_same_grid(g, m.grid(), "make_partition_weights");
        blurred.push_back(gaussian_smooth(m.to_image(), blur_sigma));
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        double total = 0.0;
        for (const auto &b : blurred) {
            total += b.data()[k];
        }
        if (!(total >= 1e-6)) {
            throw Error(ErrorKind::degenerate_partition,
                        "make_partition_weights: blurred masks vanish at pixel " + std::to_string(k));
        }
        for (auto &b : blurred) {
            b.data()[k] = std::clamp(b.data()[k] / total, 0.0, 1.0);
        }
    }
    return blurred;
}

} // namespace lddm
