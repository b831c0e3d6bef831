#pragma once

// Reproducing-kernel algebra for velocity fields: v = K * p.
//
// Four families compose recursively:
//   gaussian     g(r) = a * exp(-r^2 / (2 sigma^2)), peak a at r = 0 (a = 1 by default)
//   sum          K_1 + ... + K_n
//   symmetrized  (Id + c Pi) o K, with Pi the mirror about the vertical mid-line
//   partition    sum_i chi_i K_i chi_i, with sum_i chi_i = 1 pointwise
//
// The half-weighted perfectly symmetric kernel 1/2 (Id + Pi) o K is written as
// symmetrized(1, gaussian(sigma, 0.5)).

#include <memory>
#include <variant>
#include <vector>

#include "lddm/grid.hpp"

namespace lddm {

class KernelSpec;

struct GaussianKernel {
    double sigma = 1.0;     // physical length
    double amplitude = 1.0; // g(0)
};

struct SumKernel {
    std::vector<KernelSpec> terms;
};

struct SymmetrizedKernel {
    double c = 0.0;
    std::shared_ptr<const KernelSpec> inner;
};

struct PartitionPart {
    Image weights;
    std::shared_ptr<const KernelSpec> inner;
};

struct PartitionKernel {
    std::vector<PartitionPart> parts;
};

class KernelSpec {
public:
    using Node = std::variant<GaussianKernel, SumKernel, SymmetrizedKernel, PartitionKernel>;

    // Factories validate their arguments and throw Error(invalid_argument) /
    // Error(grid_mismatch) on violation.
    static KernelSpec gaussian(double sigma, double amplitude = 1.0);
    static KernelSpec sum(std::vector<KernelSpec> terms);
    // The inner kernel must commute with the reflection (see reflection_equivariant).
    static KernelSpec symmetrized(double c, KernelSpec inner);
    // Weights must lie in [0,1] and sum to 1 at every pixel (tolerance 1e-6).
    static KernelSpec partition(std::vector<std::pair<Image, KernelSpec>> parts);

    [[nodiscard]] const Node &node() const noexcept { return node_; }

private:
    explicit KernelSpec(Node node) : node_(std::move(node)) {}
    Node node_;
};

// True when Pi o K = K o Pi, which makes symmetrized kernels self-adjoint.
// Gaussians always qualify; partitions only if every weight image is mirror symmetric.
bool reflection_equivariant(const KernelSpec &spec);

// ux(i,j) -> -ux(W-1-i, j), uy(i,j) -> uy(W-1-i, j).
VectorField reflect(const VectorField &field);
Image reflect(const Image &img);

// Throws Error(grid_mismatch) if partition weights do not share p's grid.
VectorField apply_kernel(const KernelSpec &spec, const VectorField &p);

// <p, K * p>_{L2}. Throws Error(not_psd) if the value is below -1e-9 * ||p||^2.
double vnorm_sq(const KernelSpec &spec, const VectorField &p);

// Separable Gaussian smoothing of a scalar image with the peak-1 kernel, zero
// extension outside the grid. sigma <= 0 returns the input unchanged.
Image gaussian_smooth(const Image &img, double sigma);

// Blur each mask, renormalise so the weights sum to one pixelwise, clamp to
// [0,1]. Throws Error(degenerate_partition) where the blurred sum is < 1e-6.
std::vector<Image> make_partition_weights(const std::vector<Mask> &masks, double blur_sigma);

} // namespace lddm
