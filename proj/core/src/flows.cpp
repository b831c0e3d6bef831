#include "lddm/flows.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lddm/error.hpp"

namespace lddm {

VelocityPath::VelocityPath(std::vector<VectorField> fields) : steps(std::move(fields)) {
    if (steps.empty()) {
        throw Error(ErrorKind::invalid_argument, "velocity path needs at least one step");
    }
    for (const auto &f : steps) {
        require_same_grid(steps.front().grid(), f.grid(), "velocity path");
    }
}

VelocityPath VelocityPath::zeros(const Grid2D &grid, int n_steps) {
    if (n_steps < 1) {
        throw Error(ErrorKind::invalid_argument, "velocity path needs at least one step");
    }
    return VelocityPath(std::vector<VectorField>(static_cast<std::size_t>(n_steps), VectorField(grid)));
}

VelocityPath reversed(const VelocityPath &v) {
    std::vector<VectorField> out(v.steps.rbegin(), v.steps.rend());
    return VelocityPath(std::move(out));
}

void flow_step(VectorField &disp, const VectorField &velocity, double dt, double sign, Stepper stepper) {
    const Grid2D &g = disp.grid();
    const double h = g.spacing();
    const double step = sign * dt;
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const Vec2 d = disp.at(i, j);
            const double yi = i + d.x / h;
            const double yj = j + d.y / h;
            Vec2 slope = sample_zero_index(velocity, yi, yj);
            if (stepper == Stepper::rk2) {
                const double mi = yi + 0.5 * step * slope.x / h;
                const double mj = yj + 0.5 * step * slope.y / h;
                slope = sample_zero_index(velocity, mi, mj);
            }
            disp.set(i, j, d + step * slope);
        }
    }
}

namespace {

DeformationPath integrate(const VelocityPath &v, double sign, Stepper stepper, FlowDiagnostics *diagnostics) {
    const Grid2D &g = v.grid();
    const double dt = v.dt();
    const double extent_px = std::min(g.width(), g.height());
    DeformationPath path;
    path.snapshots.reserve(v.steps.size() + 1);
    path.snapshots.push_back(Deformation::identity(g));
    VectorField disp(g);
    for (const auto &vk : v.steps) {
        if (diagnostics != nullptr) {
            const double step_px = max_abs(vk) * dt / g.spacing();
            diagnostics->max_step_px = std::max(diagnostics->max_step_px, step_px);
            if (step_px > 0.5 * extent_px) {
                ++diagnostics->cfl_warnings;
            }
        }
        flow_step(disp, vk, dt, sign, stepper);
        path.snapshots.emplace_back(disp);
    }
    return path;
}

} // namespace

DeformationPath integrate_spatial(const VelocityPath &v, Stepper stepper, FlowDiagnostics *diagnostics) {
    return integrate(v, +1.0, stepper, diagnostics);
}

DeformationPath integrate_inverse(const VelocityPath &v, Stepper stepper, FlowDiagnostics *diagnostics) {
    return integrate(v, -1.0, stepper, diagnostics);
}

DeformationPath integrate_convective(const VelocityPath &v, Stepper stepper, InvertOptions options) {
    const DeformationPath eta = integrate_inverse(v, stepper);
    DeformationPath phi;
    phi.snapshots.reserve(eta.snapshots.size());
    phi.snapshots.push_back(Deformation::identity(v.grid()));
    for (std::size_t k = 1; k < eta.snapshots.size(); ++k) {
        phi.snapshots.push_back(invert(eta.snapshots[k], options.max_iter, options.tol_px));
    }
    return phi;
}

DeformationPath correspond_left_right(const DeformationPath &phi, InvertOptions options) {
    const int n = phi.steps();
    const Grid2D &g = phi.grid();
    const Deformation &end = phi.final();
    DeformationPath psi;
    psi.snapshots.resize(static_cast<std::size_t>(n) + 1);

    const Deformation start = compose(end, invert(end, options.max_iter, options.tol_px));
    const double residual = max_difference_px(start, Deformation::identity(g));
    if (residual > 0.5) {
        throw Error(ErrorKind::residual_too_large,
                    "correspond_left_right: phi_1 o phi_1^{-1} deviates " + std::to_string(residual) + " px");
    }
    psi.snapshots[0] = residual < 0.1 ? Deformation::identity(g) : start;
    for (int k = 1; k < n; ++k) {
        const auto &earlier = phi.snapshots[static_cast<std::size_t>(n - k)];
        psi.snapshots[static_cast<std::size_t>(k)] = compose(end, invert(earlier, options.max_iter, options.tol_px));
    }
    if (n > 0) {
        psi.snapshots[static_cast<std::size_t>(n)] = end;
    }
    return psi;
}

std::vector<double> step_energies(std::span<const VectorField> momenta, std::span<const VectorField> velocities) {
    if (momenta.size() != velocities.size() || momenta.empty()) {
        throw Error(ErrorKind::invalid_argument, "step_energies: momenta and velocities differ in length");
    }
    const double dt = 1.0 / static_cast<double>(momenta.size());
    std::vector<double> out;
    out.reserve(momenta.size());
    for (std::size_t k = 0; k < momenta.size(); ++k) {
        out.push_back(0.5 * dt * l2_inner(momenta[k], velocities[k]));
    }
    return out;
}

double sorted_sum(std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) {
        total += t;
    }
    return total;
}

double path_energy(const VelocityPath &v, const KernelSpec &spec,
                   std::optional<std::span<const VectorField>> momenta, bool verify) {
    if (!momenta) {
        throw Error(ErrorKind::missing_momenta,
                    "path_energy: velocities alone do not determine the kernel energy; pass the momenta");
    }
    if (static_cast<int>(momenta->size()) != v.size()) {
        throw Error(ErrorKind::invalid_argument, "path_energy: momentum count differs from step count");
    }
    if (verify) {
        for (int k = 0; k < v.size(); ++k) {
            const VectorField expected = apply_kernel(spec, (*momenta)[static_cast<std::size_t>(k)]);
            const double scale = std::max(max_abs(expected), 1e-300);
            if (max_abs_difference(expected, v.steps[static_cast<std::size_t>(k)]) > 1e-6 * scale) {
                throw Error(ErrorKind::invalid_argument,
                            "path_energy: velocity " + std::to_string(k) + " is not K * p");
            }
        }
    }
    return sorted_sum(step_energies(*momenta, v.steps));
}

double convective_residual(const DeformationPath &phi, const VelocityPath &v, int margin) {
    const Grid2D &g = v.grid();
    const double h = g.spacing();
    const double dt = v.dt();
    margin = std::max(margin, 1);
    double worst = 0.0;
    for (int k = 0; k < v.size(); ++k) {
        const auto &a = phi.snapshots[static_cast<std::size_t>(k)].disp;
        const auto &b = phi.snapshots[static_cast<std::size_t>(k) + 1].disp;
        const auto &vk = v.steps[static_cast<std::size_t>(k)];
        for (int j = margin; j < g.height() - margin; ++j) {
            for (int i = margin; i < g.width() - margin; ++i) {
                const Vec2 rate = (1.0 / dt) * (b.at(i, j) - a.at(i, j));
                const Vec2 ddx = (0.5 / h) * (a.at(i + 1, j) - a.at(i - 1, j));
                const Vec2 ddy = (0.5 / h) * (a.at(i, j + 1) - a.at(i, j - 1));
                const Vec2 w = vk.at(i, j);
                const Vec2 dphi_v{(1.0 + ddx.x) * w.x + ddy.x * w.y, ddx.y * w.x + (1.0 + ddy.y) * w.y};
                const Vec2 r = rate - dphi_v;
                worst = std::max(worst, std::hypot(r.x, r.y));
            }
        }
    }
    return worst;
}

} // namespace lddm
