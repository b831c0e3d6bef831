#include "lddm/matching.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lddm/error.hpp"

namespace lddm {

void MatchConfig::validate() const {
    const auto fail = [](const std::string &what) { throw Error(ErrorKind::bad_value, "match config: " + what); };
    if (n_timesteps < 1) {
        fail("n_timesteps must be >= 1");
    }
    if (!(sim_weight > 0.0)) {
        fail("sim_weight must be > 0");
    }
    if (max_iters < 0) {
        fail("max_iters must be >= 0");
    }
    if (!(step_init > 0.0)) {
        fail("step_init must be > 0");
    }
    if (!(step_shrink > 0.0 && step_shrink < 1.0)) {
        fail("step_shrink must lie in (0,1)");
    }
    if (!(tol_grad > 0.0)) {
        fail("tol_grad must be > 0");
    }
}

double ssd(const Image &a, const Image &b, const std::optional<Mask> &mask) {
    require_same_grid(a.grid(), b.grid(), "ssd");
    if (mask) {
        require_same_grid(a.grid(), mask->grid(), "ssd mask");
    }
    const auto da = a.data();
    const auto db = b.data();
    double sum = 0.0;
    for (std::size_t k = 0; k < da.size(); ++k) {
        if (mask && mask->data()[k] == 0) {
            continue;
        }
        const double r = da[k] - db[k];
        sum += r * r;
    }
    const double h = a.grid().spacing();
    return sum * h * h;
}

namespace {

// Everything the adjoint needs from one forward evaluation.
struct Forward {
    std::vector<VectorField> velocities;   // v_k = K p_k
    std::vector<VectorField> inverse_disp; // eta_0 .. eta_N, driven by v_{N-1}, ..., v_0
    Image warped;
    ObjectiveParts parts;
};

void check_inputs(const std::vector<VectorField> &momenta, const Image &source, const Image &target,
                  const MatchConfig &cfg) {
    if (static_cast<int>(momenta.size()) != cfg.n_timesteps) {
        throw Error(ErrorKind::invalid_argument, "momentum count " + std::to_string(momenta.size()) +
                                                     " differs from n_timesteps " +
                                                     std::to_string(cfg.n_timesteps));
    }
    require_same_grid(source.grid(), target.grid(), "source/target");
    for (const auto &p : momenta) {
        require_same_grid(source.grid(), p.grid(), "momenta");
    }
    if (cfg.mask) {
        require_same_grid(source.grid(), cfg.mask->grid(), "similarity mask");
    }
    if (cfg.momentum_mask) {
        require_same_grid(source.grid(), cfg.momentum_mask->grid(), "momentum mask");
    }
}

Forward forward(const std::vector<VectorField> &momenta, const Image &source, const Image &target,
                const MatchConfig &cfg) {
    check_inputs(momenta, source, target, cfg);
    const Grid2D &g = source.grid();
    const std::size_t n = momenta.size();
    const double dt = 1.0 / static_cast<double>(n);

    Forward fw;
    fw.velocities.reserve(n);
    for (const auto &p : momenta) {
        fw.velocities.push_back(apply_kernel(cfg.kernel, p));
    }
    fw.inverse_disp.reserve(n + 1);
    fw.inverse_disp.emplace_back(g);
    for (std::size_t j = 0; j < n; ++j) {
        VectorField next = fw.inverse_disp.back();
        flow_step(next, fw.velocities[n - 1 - j], dt, -1.0, cfg.stepper);
        fw.inverse_disp.push_back(std::move(next));
    }
    fw.warped = warp_image(source, Deformation(fw.inverse_disp.back()));
    fw.parts.energy = sorted_sum(step_energies(momenta, fw.velocities));
    fw.parts.ssd = ssd(fw.warped, target, cfg.mask);
    fw.parts.total = fw.parts.energy + cfg.sim_weight * fw.parts.ssd;
    return fw;
}

Vec2 transpose_times(const Mat2 &m, Vec2 a) noexcept { return {m.xx * a.x + m.yx * a.y, m.xy * a.x + m.yy * a.y}; }

// L2 adjoints b_k of the similarity term with respect to v_k.
std::vector<VectorField> similarity_adjoint(const Forward &fw, const Image &source, const Image &target,
                                            const MatchConfig &cfg) {
    const Grid2D &g = source.grid();
    const double h = g.spacing();
    const std::size_t n = fw.velocities.size();
    const double dt = 1.0 / static_cast<double>(n);
    const double step = -dt;

    // dE/d(eta_N displacement), physical units.
    VectorField adj(g);
    const VectorField &end = fw.inverse_disp.back();
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const auto k = g.index(i, j);
            if (cfg.mask && cfg.mask->data()[k] == 0) {
                continue;
            }
            const Vec2 d = end.at(i, j);
            Vec2 grad_index;
            sample_clamped_index(source, i + d.x / h, j + d.y / h, &grad_index);
            const double r = 2.0 * cfg.sim_weight * (fw.warped.data()[k] - target.data()[k]) * h * h;
            adj.set(i, j, (r / h) * grad_index);
        }
    }

    // Reverse sweep; gu[j] accumulates dE/d(u_j samples), u_j = v_{N-1-j}.
    std::vector<VectorField> b(n, VectorField(g));
    for (std::size_t jj = n; jj-- > 0;) {
        const VectorField &u = fw.velocities[n - 1 - jj];
        const VectorField &disp = fw.inverse_disp[jj];
        VectorField &gu = b[n - 1 - jj];
        VectorField prev(g);
        for (int j = 0; j < g.height(); ++j) {
            for (int i = 0; i < g.width(); ++i) {
                const Vec2 a = adj.at(i, j);
                const Vec2 d = disp.at(i, j);
                const double yi = i + d.x / h;
                const double yj = j + d.y / h;
                Vec2 d_y; // dE/dy in index coordinates
                if (cfg.stepper == Stepper::rk2) {
                    Mat2 jac_y;
                    const Vec2 uy = sample_zero_index(u, yi, yj, &jac_y);
                    const double mi = yi + 0.5 * step * uy.x / h;
                    const double mj = yj + 0.5 * step * uy.y / h;
                    Mat2 jac_m;
                    sample_zero_index(u, mi, mj, &jac_m);
                    scatter_zero_index(gu, mi, mj, step * a);
                    const Vec2 d_m = step * transpose_times(jac_m, a);
                    const double s = 0.5 * step / h;
                    scatter_zero_index(gu, yi, yj, s * d_m);
                    d_y = d_m + s * transpose_times(jac_y, d_m);
                } else {
                    Mat2 jac_y;
                    sample_zero_index(u, yi, yj, &jac_y);
                    scatter_zero_index(gu, yi, yj, step * a);
                    d_y = step * transpose_times(jac_y, a);
                }
                prev.set(i, j, a + (1.0 / h) * d_y);
            }
        }
        adj = std::move(prev);
    }
    for (auto &f : b) {
        f *= 1.0 / (h * h);
    }
    return b;
}

void apply_momentum_mask(VectorField &f, const std::optional<Mask> &mask) {
    if (!mask) {
        return;
    }
    const auto m = mask->data();
    for (std::size_t k = 0; k < m.size(); ++k) {
        if (m[k]) {
            f.ux()[k] = 0.0;
            f.uy()[k] = 0.0;
        }
    }
}

double norm_l2(const std::vector<VectorField> &fields) {
    double s = 0.0;
    for (const auto &f : fields) {
        s += l2_inner(f, f);
    }
    return std::sqrt(s);
}

} // namespace

ObjectiveParts objective_parts(const std::vector<VectorField> &momenta, const Image &source, const Image &target,
                               const MatchConfig &cfg) {
    return forward(momenta, source, target, cfg).parts;
}

double objective(const std::vector<VectorField> &momenta, const Image &source, const Image &target,
                 const MatchConfig &cfg) {
    return objective_parts(momenta, source, target, cfg).total;
}

std::vector<VectorField> gradient(const std::vector<VectorField> &momenta, const Image &source, const Image &target,
                                  const MatchConfig &cfg) {
    const Forward fw = forward(momenta, source, target, cfg);
    std::vector<VectorField> b = similarity_adjoint(fw, source, target, cfg);
    const double dt = 1.0 / static_cast<double>(momenta.size());
    std::vector<VectorField> grad;
    grad.reserve(momenta.size());
    for (std::size_t k = 0; k < momenta.size(); ++k) {
        VectorField g = apply_kernel(cfg.kernel, dt * momenta[k] + b[k]);
        apply_momentum_mask(g, cfg.momentum_mask);
        grad.push_back(std::move(g));
    }
    return grad;
}

MatchResult register_images(const Image &source, const Image &target, const MatchConfig &cfg,
                            const AcceptObserver &on_accept) {
    cfg.validate();
    const Grid2D &g = source.grid();
    const int n = cfg.n_timesteps;
    const double dt = 1.0 / n;

    std::vector<VectorField> p(static_cast<std::size_t>(n), VectorField(g));
    Forward fw = forward(p, source, target, cfg);

    MatchResult result;
    result.objective_trace.push_back(fw.parts.total);
    result.energy_trace.push_back(fw.parts.energy);
    result.ssd_trace.push_back(fw.parts.ssd);

    // Descent runs along the kernel-preconditioned direction -(p_k + b_k / dt)
    // (the momentum form of the V-gradient), masked where momenta are pinned
    // to zero; gradient() supplies the stopping test.
    auto grad_norm = [&](const Forward &state, std::vector<VectorField> &direction) {
        std::vector<VectorField> b = similarity_adjoint(state, source, target, cfg);
        std::vector<VectorField> grad;
        grad.reserve(b.size());
        direction.clear();
        for (std::size_t k = 0; k < b.size(); ++k) {
            VectorField raw = dt * p[k] + b[k];
            VectorField gk = apply_kernel(cfg.kernel, raw);
            apply_momentum_mask(gk, cfg.momentum_mask);
            grad.push_back(std::move(gk));
            raw *= -1.0 / dt;
            apply_momentum_mask(raw, cfg.momentum_mask);
            direction.push_back(std::move(raw));
        }
        return norm_l2(grad);
    };

    std::vector<VectorField> direction;
    const double g0 = grad_norm(fw, direction);
    double step = cfg.step_init;
    int consecutive_rejections = 0;
    result.stop_reason = "max_iters";
    if (!(g0 > 0.0)) {
        result.stop_reason = "zero_gradient";
    } else {
        for (int it = 0; it < cfg.max_iters; ++it) {
            std::vector<VectorField> trial(p.size());
            for (std::size_t k = 0; k < p.size(); ++k) {
                trial[k] = p[k] + step * direction[k];
            }
            Forward candidate = forward(trial, source, target, cfg);
            ++result.iterations;
            if (candidate.parts.total < fw.parts.total) {
                p = std::move(trial);
                fw = std::move(candidate);
                result.objective_trace.push_back(fw.parts.total);
                result.energy_trace.push_back(fw.parts.energy);
                result.ssd_trace.push_back(fw.parts.ssd);
                consecutive_rejections = 0;
                if (on_accept) {
                    on_accept(static_cast<int>(result.objective_trace.size()) - 1, p, VelocityPath(fw.velocities));
                }
                step = std::min(step * 1.25, cfg.step_init * 4.0);
                if (grad_norm(fw, direction) <= cfg.tol_grad * g0) {
                    result.stop_reason = "tol_grad";
                    break;
                }
            } else {
                ++result.rejections;
                step *= cfg.step_shrink;
                if (++consecutive_rejections >= 30) {
                    result.stop_reason = "rejections";
                    break;
                }
            }
        }
    }

    result.momenta = std::move(p);
    result.velocity = VelocityPath(fw.velocities);
    result.phi_right = integrate_spatial(result.velocity, cfg.stepper);
    result.phi_left = correspond_left_right(result.phi_right);
    result.phi_inv = Deformation(fw.inverse_disp.back());
    result.warped = std::move(fw.warped);
    result.final_ssd = fw.parts.ssd;
    result.final_energy = fw.parts.energy;
    return result;
}

double right_distance(const MatchResult &result) {
    return std::sqrt(2.0 * sorted_sum(step_energies(result.momenta, result.velocity.steps)));
}

double left_distance(const MatchResult &result) {
    const std::vector<VectorField> p(result.momenta.rbegin(), result.momenta.rend());
    const VelocityPath v = reversed(result.velocity);
    return std::sqrt(2.0 * sorted_sum(step_energies(p, v.steps)));
}

} // namespace lddm
