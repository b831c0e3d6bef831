#pragma once

// Inexact image matching
//
//   J(p) = 1/2 dt sum_k <p_k, K p_k> + sim_weight * SSD(I o phi_1^{-1}, J; mask)
//
// optimised over time-discretised momenta p_k with v_k = K p_k. phi is the
// spatial (right-invariant) flow of v. Its inverse endpoint is integrated as
// the inverse flow of the time-reversed velocities,
//
//   eta_{j+1} = eta_j - dt * v_{N-1-j} o (midpoint of eta_j),   eta_N = phi_1^{-1},
//
// which is also the convective flow of the reversed sequence. The gradient is
// the exact adjoint of that discrete pipeline (bilinear sampling derivatives
// included), so it agrees with finite differences of objective() up to
// rounding and the measure-zero kinks of bilinear interpolation.
//
// The left-invariant optimum is produced from the right-invariant one by the
// left/right correspondence: same endpoint, same energy, reversed velocities.

#include <functional>
#include <optional>
#include <vector>

#include "lddm/flows.hpp"
#include "lddm/grid.hpp"
#include "lddm/kernels.hpp"

namespace lddm {

struct MatchConfig {
    KernelSpec kernel = KernelSpec::gaussian(8.0);
    int n_timesteps = 16;
    double sim_weight = 1.0;
    int max_iters = 300;
    double step_init = 0.5;
    double step_shrink = 0.5;
    // Relative to the gradient norm at the initial (zero) momenta.
    double tol_grad = 1e-6;
    std::optional<Mask> mask;          // pixels included in the SSD
    std::optional<Mask> momentum_mask; // pixels where momenta are forced to zero
    Stepper stepper = Stepper::rk2;

    // Throws Error(bad_value) naming the first violated constraint.
    void validate() const;
};

struct MatchResult {
    std::vector<VectorField> momenta;
    VelocityPath velocity;
    DeformationPath phi_right;
    DeformationPath phi_left;
    Deformation phi_inv; // inverse endpoint used by the similarity term
    Image warped;        // I o phi_inv
    std::vector<double> objective_trace;
    std::vector<double> energy_trace;
    std::vector<double> ssd_trace;
    double final_ssd = 0.0;
    double final_energy = 0.0;
    int iterations = 0;
    int rejections = 0;
    std::string stop_reason;
};

// Sum over mask(x) = 1 of (A - B)^2 * spacing^2, row-major order.
double ssd(const Image &a, const Image &b, const std::optional<Mask> &mask = std::nullopt);

struct ObjectiveParts {
    double energy = 0.0;
    double ssd = 0.0;
    double total = 0.0;
};

ObjectiveParts objective_parts(const std::vector<VectorField> &momenta, const Image &source, const Image &target,
                               const MatchConfig &cfg);
double objective(const std::vector<VectorField> &momenta, const Image &source, const Image &target,
                 const MatchConfig &cfg);

// L2 gradient of objective() with respect to each p_k:
//   grad_k = K (dt p_k + b_k),
// b_k being the adjoint of the similarity term with respect to v_k. With a
// momentum mask M the result is multiplied by (1 - M), i.e. the gradient of the
// objective restricted to momenta that vanish on the mask.
std::vector<VectorField> gradient(const std::vector<VectorField> &momenta, const Image &source, const Image &target,
                                  const MatchConfig &cfg);

// Called with (accepted iteration index, momenta, velocity path) after each accepted step.
using AcceptObserver = std::function<void(int, const std::vector<VectorField> &, const VelocityPath &)>;

// Backtracking descent from zero momenta. Never increases the objective.
MatchResult register_images(const Image &source, const Image &target, const MatchConfig &cfg,
                            const AcceptObserver &on_accept = {});

// sqrt(2 * energy) of the optimal right path, and of its left-invariant
// correspondent (reversed velocity and momentum sequence).
double right_distance(const MatchResult &result);
double left_distance(const MatchResult &result);

} // namespace lddm
