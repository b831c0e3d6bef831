#pragma once

// Time integration of diffeomorphism paths driven by a piecewise-constant
// velocity v(t) = v_k on [k/N, (k+1)/N).
//
//   integrate_spatial     d/dt phi = v o phi          (Eulerian / right-invariant)
//   integrate_inverse     d/dt eta = -v o eta         (eta = phi^{-1} of the convective path)
//   integrate_convective  d/dt phi = dphi . v         (body / left-invariant),
//                         obtained by inverting the snapshots of integrate_inverse.
//
// correspond_left_right maps a spatial path phi to psi_t = phi_1 o phi_{1-t}^{-1};
// psi has convective velocity v(1 - t), the same endpoint, and the same energy.

#include <optional>
#include <span>
#include <vector>

#include "lddm/grid.hpp"
#include "lddm/kernels.hpp"

namespace lddm {

struct VelocityPath {
    std::vector<VectorField> steps;

    VelocityPath() = default;
    // Throws Error(invalid_argument) on an empty list, Error(grid_mismatch) on mixed grids.
    explicit VelocityPath(std::vector<VectorField> fields);
    static VelocityPath zeros(const Grid2D &grid, int n_steps);

    [[nodiscard]] int size() const noexcept { return static_cast<int>(steps.size()); }
    [[nodiscard]] double dt() const noexcept { return 1.0 / static_cast<double>(steps.size()); }
    [[nodiscard]] const Grid2D &grid() const { return steps.front().grid(); }
};

// v'(k) = v(N-1-k).
VelocityPath reversed(const VelocityPath &v);

struct DeformationPath {
    std::vector<Deformation> snapshots; // N + 1 entries, snapshots[0] = identity

    [[nodiscard]] int steps() const noexcept { return static_cast<int>(snapshots.size()) - 1; }
    [[nodiscard]] const Deformation &final() const { return snapshots.back(); }
    [[nodiscard]] const Grid2D &grid() const { return snapshots.front().grid(); }
};

enum class Stepper { euler, rk2 };

struct FlowDiagnostics {
    // Steps where max|v| * dt exceeded half the grid extent. The bound is a
    // heuristic; integration proceeds regardless.
    int cfl_warnings = 0;
    double max_step_px = 0.0;
};

struct InvertOptions {
    int max_iter = 500;
    double tol_px = 1e-9;
};

DeformationPath integrate_spatial(const VelocityPath &v, Stepper stepper = Stepper::rk2,
                                  FlowDiagnostics *diagnostics = nullptr);

DeformationPath integrate_inverse(const VelocityPath &v, Stepper stepper = Stepper::rk2,
                                  FlowDiagnostics *diagnostics = nullptr);

// Propagates Error(non_convergent) from the snapshot inversions.
DeformationPath integrate_convective(const VelocityPath &v, Stepper stepper = Stepper::rk2,
                                     InvertOptions options = {});

// psi_k = phi_N o phi_{N-k}^{-1}. psi_0 is snapped to the identity once its
// residual is verified below 0.1 px; Error(residual_too_large) if
// ||phi_N o phi_N^{-1} - id||_inf exceeds 0.5 px.
DeformationPath correspond_left_right(const DeformationPath &phi, InvertOptions options = {});

// One step of eta' = -v o eta (or +v when `sign` is +1) applied to a
// displacement field, in place. Exposed for the matching adjoint.
void flow_step(VectorField &disp, const VectorField &velocity, double dt, double sign, Stepper stepper);

// Per-step discrete energies 1/2 * dt * <p_k, K p_k>.
std::vector<double> step_energies(std::span<const VectorField> momenta, std::span<const VectorField> velocities);

// 1/2 * dt * sum_k <p_k, v_k>. The per-step terms are summed in ascending
// order of value, so any permutation of the steps gives a bitwise identical
// total. Without momenta the energy is not defined through the kernel
// pairing: Error(missing_momenta). With `verify`, checks v_k = K p_k to 1e-6
// relative and throws Error(invalid_argument) otherwise.
double path_energy(const VelocityPath &v, const KernelSpec &spec,
                   std::optional<std::span<const VectorField>> momenta, bool verify = false);

// Order-independent sum used by path_energy.
double sorted_sum(std::vector<double> terms);

// Largest interior residual max_k ||(phi_{k+1} - phi_k)/dt - dphi_k . v_k||,
// in physical velocity units; the discrete form of d/dt phi = dphi . v.
double convective_residual(const DeformationPath &phi, const VelocityPath &v, int margin = 2);

} // namespace lddm
