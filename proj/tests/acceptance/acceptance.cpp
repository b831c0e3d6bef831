// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lddm/experiment.hpp"
#include "lddm/flows.hpp"
#include "lddm/kernels.hpp"
#include "lddm/matching.hpp"
#include "lddm/phantom.hpp"
#include "lddm/pulsons.hpp"
#include "support.hpp"

using namespace lddm;
using lddm::test::Rng;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

// Objective traces of every registration run by the suite, for criterion 10.
std::vector<std::pair<std::string, std::vector<double>>> g_traces;

void record(const std::string &name, const MatchResult &r) { g_traces.emplace_back(name, r.objective_trace); }

bool non_increasing(const std::vector<double> &v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[i - 1]) {
            return false;
        }
    }
    return true;
}

std::string num(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

Image sum_images(const Image &a, const Image &b, double wb) {
    Image out(a.grid());
    for (std::size_t k = 0; k < a.data().size(); ++k) {
        out.data()[k] = a.data()[k] + wb * b.data()[k];
    }
    return out;
}

Image anisotropic_blob(const Grid2D &g, Vec2 c, double sx, double sy) {
    Image img(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const double dx = (i - c.x) / sx, dy = (j - c.y) / sy;
            img(i, j) = std::exp(-0.5 * (dx * dx + dy * dy));
        }
    }
    return img;
}

struct Pair {
    std::string name;
    Image source, target;
};

// Three smooth 64x64 pairs: a two-blob translation, an anisotropic blob that
// moves and changes shape, and a two-blob image pushed through a smooth bump.
std::vector<Pair> synthetic_pairs() {
    const Grid2D g(64, 64);
    std::vector<Pair> pairs;
    pairs.push_back({"translation",
                     sum_images(test::blob_image(g, {22, 32}, 7), test::blob_image(g, {42, 36}, 5.5), 0.7),
                     sum_images(test::blob_image(g, {24, 31}, 7), test::blob_image(g, {44, 35}, 5.5), 0.7)});
    pairs.push_back({"reshape", anisotropic_blob(g, {29, 32}, 7, 7), anisotropic_blob(g, {34, 31}, 8, 6.5)});
    const Image base = sum_images(test::blob_image(g, {26, 28}, 6), test::blob_image(g, {38, 38}, 6), 0.8);
    const Deformation bump(test::bump_field(g, {32, 32}, 10.0, {2.0, 1.5}));
    pairs.push_back({"bump", base, warp_image(base, bump)});
    return pairs;
}

MatchConfig smooth_config() {
    MatchConfig cfg;
    cfg.kernel = KernelSpec::gaussian(8.0);
    cfg.n_timesteps = 8;
    cfg.sim_weight = 50.0;
    cfg.max_iters = 200;
    return cfg;
}

std::vector<MatchResult> g_endpoint_runs;

const std::vector<MatchResult> &endpoint_runs() {
    if (g_endpoint_runs.empty()) {
        for (const Pair &p : synthetic_pairs()) {
            g_endpoint_runs.push_back(register_images(p.source, p.target, smooth_config()));
            record("endpoint/" + p.name, g_endpoint_runs.back());
        }
    }
    return g_endpoint_runs;
}

Verdict endpoint_equivalence() {
    double worst = 0.0, worst_reduction = 1.0;
    for (const MatchResult &r : endpoint_runs()) {
        const Deformation &right = r.phi_right.final();
        // The corresponded left path, the convective flow of the reversed
        // velocities, and the inverse of the map used by the similarity term.
        worst = std::max(worst, max_difference_px(r.phi_left.final(), right));
        worst = std::max(worst, max_difference_px(integrate_convective(reversed(r.velocity)).final(), right, 2));
        worst = std::max(worst, max_difference_px(invert(r.phi_inv, 500, 1e-9), right, 2));
        worst_reduction = std::min(worst_reduction, 1.0 - r.final_ssd / r.ssd_trace.front());
    }
    return {worst < 0.1 && worst_reduction > 0.9,
            "max endpoint gap " + num(worst) + " px over 3 runs x 3 routes, min SSD reduction " +
                num(100 * worst_reduction) + "%"};
}

Verdict energy_equality() {
    bool all = true;
    std::string totals;
    for (const MatchResult &r : endpoint_runs()) {
        const double right = path_energy(r.velocity, smooth_config().kernel, std::span(r.momenta));
        const std::vector<VectorField> p_rev(r.momenta.rbegin(), r.momenta.rend());
        const double left = path_energy(reversed(r.velocity), smooth_config().kernel, std::span(p_rev));
        all = all && right == left && right_distance(r) == left_distance(r) && right > 0.0;
        totals += (totals.empty() ? "" : ", ") + num(right);
    }
    return {all, "left and right path energies bitwise equal on 3 runs (" + totals + ")"};
}

Verdict isometry() {
    const Pair p = synthetic_pairs()[1];
    MatchConfig cfg = smooth_config();
    cfg.max_iters = 300;
    const MatchResult forward = register_images(p.source, p.target, cfg);
    const MatchResult backward = register_images(p.target, p.source, cfg);
    record("isometry/forward", forward);
    record("isometry/backward", backward);
    const double dl = left_distance(forward);
    const double dr = right_distance(backward);
    const double rel = std::abs(dl - dr) / dr;
    return {rel < 0.02, "d_L(phi) " + num(dl) + " vs d_R(phi^-1) " + num(dr) + ", relative gap " + num(rel)};
}

Verdict kernel_oracle() {
    const Grid2D g(64, 64);
    Rng rng(41);
    const VectorField p = test::random_field(g, rng);
    const double oracle_err = max_abs_difference(apply_kernel(KernelSpec::gaussian(3.0), p), test::dense_gaussian(p, 3.0));

    // Four base families, each commuting with the reflection so it can also be
    // wrapped as (Id + c Pi) K.
    const Grid2D h(32, 32);
    Mask top(h), bottom(h);
    for (int j = 0; j < h.height(); ++j) {
        for (int i = 0; i < h.width(); ++i) {
            (j < 16 ? top : bottom).set(i, j, true);
        }
    }
    const auto w = make_partition_weights({top, bottom}, 3.0);
    const std::vector<KernelSpec> families = {
        KernelSpec::gaussian(3.0),
        KernelSpec::sum({KernelSpec::gaussian(5.0), KernelSpec::gaussian(1.5, 0.5)}),
        KernelSpec::symmetrized(0.5, KernelSpec::gaussian(4.0)),
        KernelSpec::partition({{w[0], KernelSpec::gaussian(2.0)}, {w[1], KernelSpec::gaussian(4.0)}}),
    };
    std::vector<VectorField> momenta;
    for (int n = 0; n < 100; ++n) {
        momenta.push_back(test::random_field(h, rng));
    }
    double asym = 0.0, min_norm = INFINITY;
    for (const KernelSpec &family : families) {
        for (double c : {0.0, 0.5, 1.0}) {
            const KernelSpec k = KernelSpec::symmetrized(c, family);
            std::vector<VectorField> kp;
            for (const auto &m : momenta) {
                kp.push_back(apply_kernel(k, m));
            }
            for (std::size_t n = 0; n < momenta.size(); ++n) {
                const std::size_t q = (n + 1) % momenta.size();
                const double a = l2_inner(momenta[n], kp[q]);
                const double b = l2_inner(kp[n], momenta[q]);
                asym = std::max(asym, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}));
                min_norm = std::min(min_norm, vnorm_sq(k, momenta[n]));
            }
        }
    }
    return {oracle_err < 1e-10 && asym < 1e-10 && min_norm >= 0.0,
            "dense oracle " + num(oracle_err) + ", pairing asymmetry " + num(asym) + ", min vnorm_sq " +
                num(min_norm) + " over 100 momenta x 4 families x 3 c"};
}

Verdict symmetry_projection() {
    const Grid2D g(64, 64);
    Rng rng(51);
    const KernelSpec k = KernelSpec::symmetrized(1.0, KernelSpec::gaussian(6.0));
    double worst_apply = 0.0;
    for (int n = 0; n < 100; ++n) {
        const VectorField v = apply_kernel(k, test::random_field(g, rng));
        worst_apply = std::max(worst_apply, max_abs_difference(reflect(v), v) / max_abs(v));
    }

    const Phantom ph = make_phantom({.size = 64, .lesion = false, .seed = 5});
    MatchConfig cfg;
    cfg.kernel = k;
    cfg.n_timesteps = 8;
    cfg.sim_weight = 20.0;
    cfg.max_iters = 60;
    double worst_run = 0.0;
    int accepted = 0;
    const MatchResult r =
        register_images(ph.source, ph.target, cfg, [&](int, const std::vector<VectorField> &, const VelocityPath &v) {
            ++accepted;
            for (const auto &vk : v.steps) {
                worst_run = std::max(worst_run, max_abs_difference(reflect(vk), vk) /
                                                    std::max(max_abs(vk), std::numeric_limits<double>::min()));
            }
        });
    record("symmetry/c1", r);
    return {worst_apply < 1e-13 && worst_run <= 1e-12 && accepted > 0,
            "100 projections " + num(worst_apply) + " relative, " + std::to_string(accepted) +
                " accepted steps of a c=1 registration " + num(worst_run) + " relative"};
}

Verdict gradient_check() {
    const Grid2D g(32, 32);
    const Image source = sum_images(test::blob_image(g, {11.5, 15.5}, 4), test::blob_image(g, {19.5, 17.5}, 3.2), 0.7);
    const Image target = sum_images(test::blob_image(g, {13.5, 14.5}, 4), test::blob_image(g, {21.5, 16.5}, 3.2), 0.7);
    MatchConfig cfg;
    cfg.kernel = KernelSpec::gaussian(4.0);
    cfg.n_timesteps = 8;
    cfg.sim_weight = 3.0;
    Rng rng(61);
    std::vector<VectorField> p;
    for (int k = 0; k < 8; ++k) {
        p.push_back(test::smooth_random_field(g, rng, 0.04, 2.0));
    }
    const auto grad = gradient(p, source, target, cfg);
    const double eps = 1e-4;
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        std::vector<VectorField> d;
        double n2 = 0.0;
        for (int k = 0; k < 8; ++k) {
            d.push_back(test::random_field(g, rng));
            n2 += l2_inner(d.back(), d.back());
        }
        std::vector<VectorField> plus, minus;
        double analytic = 0.0;
        for (int k = 0; k < 8; ++k) {
            d[k] *= 1.0 / std::sqrt(n2); // unit-norm direction
            plus.push_back(p[k] + eps * d[k]);
            minus.push_back(p[k] + (-eps) * d[k]);
            analytic += l2_inner(grad[k], d[k]);
        }
        const double fd = (objective(plus, source, target, cfg) - objective(minus, source, target, cfg)) / (2 * eps);
        worst = std::max(worst, std::abs(fd - analytic) / std::abs(fd));
    }
    return {worst < 1e-3, "max relative error " + num(worst) + " over 10 unit directions, eps 1e-4"};
}

Verdict pulson_dynamics() {
    using namespace lddm::pulsons;
    const GaussianScalarKernel k(1.0);
    const State single{{{0.0, 0.0}}, {{1.0, 0.0}}};
    const State end = shoot(single, k, Side::right, 1.0, 100).back();
    const double line_err = std::max(std::abs(end.q[0].x - 1.0), std::abs(end.q[0].y));

    const State pair{{{-3.0, 0.75}, {3.0, -0.75}}, {{1.0, 0.0}, {-1.0, 0.0}}};
    double drift = 0.0, momentum = 0.0;
    for (Side side : {Side::right, Side::left}) {
        const auto traj = shoot(pair, k, side, 20.0, 4000);
        const double h0 = hamiltonian(traj.front(), k);
        const Vec2 m0 = total_momentum(traj.front());
        for (const State &s : traj) {
            drift = std::max(drift, std::abs(hamiltonian(s, k) - h0) / h0);
            const Vec2 m = total_momentum(s);
            momentum = std::max({momentum, std::abs(m.x - m0.x), std::abs(m.y - m0.y)});
        }
    }
    const auto left = shoot(pair, k, Side::left, 20.0, 4000);
    const auto back = shoot(pair, k, Side::right, -20.0, 4000);
    double reversal = 0.0;
    for (std::size_t n = 0; n < left.size(); ++n) {
        for (std::size_t a = 0; a < 2; ++a) {
            reversal = std::max({reversal, std::abs(left[n].q[a].x - back[n].q[a].x),
                                 std::abs(left[n].q[a].y - back[n].q[a].y), std::abs(left[n].p[a].x - back[n].p[a].x),
                                 std::abs(left[n].p[a].y - back[n].p[a].y)});
        }
    }
    return {line_err < 1e-12 && drift < 1e-8 && reversal < 1e-10 && momentum < 1e-10,
            "line " + num(line_err) + ", H drift " + num(drift) + ", reversal " + num(reversal) + ", momentum " +
                num(momentum)};
}

Verdict flow_consistency() {
    const Grid2D g(64, 64);
    Rng rng(81);
    const VectorField a = test::smooth_random_field(g, rng, 1.0, 6.0);
    const VectorField b = test::smooth_random_field(g, rng, 1.0, 6.0);
    const auto sample = [&](int n) {
        std::vector<VectorField> steps;
        for (int k = 0; k < n; ++k) {
            const double t = (k + 0.5) / n;
            steps.push_back(std::cos(M_PI * t / 2) * a + std::sin(M_PI * t / 2) * b);
        }
        return VelocityPath(std::move(steps));
    };
    const VelocityPath v = sample(32);
    const DeformationPath phi = integrate_spatial(v);
    const DeformationPath eta = integrate_inverse(v);
    double worst = 0.0;
    for (int k = 0; k <= 32; ++k) {
        const auto i = static_cast<std::size_t>(k);
        worst = std::max(worst, max_difference_px(compose(phi.snapshots[i], eta.snapshots[i]),
                                                  Deformation::identity(g), 2));
    }

    const VectorField c = test::smooth_random_field(g, rng, 3.0, 6.0);
    const auto scaled = [&](int n) {
        std::vector<VectorField> steps;
        for (int k = 0; k < n; ++k) {
            const double t = (k + 0.5) / n;
            steps.push_back(std::cos(M_PI * t / 2) * c + std::sin(M_PI * t / 2) * (3.0 * a));
        }
        return VelocityPath(std::move(steps));
    };
    const Deformation reference = integrate_spatial(scaled(512)).final();
    const double e8 = max_difference_px(integrate_spatial(scaled(8)).final(), reference);
    const double e16 = max_difference_px(integrate_spatial(scaled(16)).final(), reference);
    const double e32 = max_difference_px(integrate_spatial(scaled(32)).final(), reference);
    const double order = std::min(std::log2(e8 / e16), std::log2(e16 / e32));
    return {worst < 0.1 && order >= 1.8,
            "max snapshot defect " + num(worst) + " px, RK2 observed order " + num(order)};
}

Verdict lesion_experiment() {
    const LesionExperimentReport rep = run_lesion_experiment(LesionExperimentOptions{});
    record("lesion/reference", rep.reference.result);
    bool strictly_smallest = true;
    double symmetry_defect = 0.0;
    for (const StrategyOutcome &s : rep.strategies) {
        record("lesion/" + s.strategy + "_c" + num(s.c), s.result);
        if (s.strategy != "strategy1") {
            strictly_smallest = strictly_smallest && rep.strategies[0].mean_abs_dispx_lesion < s.mean_abs_dispx_lesion;
            if (s.c == 1.0) {
                symmetry_defect = s.symmetry_defect;
            }
        }
    }
    std::string rms;
    for (const StrategyOutcome &s : rep.strategies) {
        rms += " " + (s.strategy == "strategy1" ? std::string("s1") : "c" + num(s.c)) + "=" +
               num(s.rms_vs_reference_lesion);
    }
    return {strictly_smallest && rep.strategy1_smallest_in_lesion && symmetry_defect <= 1e-12,
            "strategy 1 mean |dispx| in lesion " + num(rep.strategies[0].mean_abs_dispx_lesion) +
                (strictly_smallest ? " (smallest)" : " (not smallest)") + ", c=0.5 closest to reference: " +
                rep.half_symmetry_flag + ", rms vs reference:" + rms};
}

Verdict monotone_traces() {
    int bad = 0;
    std::string names;
    for (const auto &[name, trace] : g_traces) {
        if (!non_increasing(trace)) {
            ++bad;
            names += " " + name;
        }
    }
    return {bad == 0 && !g_traces.empty(),
            std::to_string(g_traces.size()) + " traces checked" + (bad ? ", increasing:" + names : "")};
}

} // namespace

int main(int argc, char **argv) {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"endpoint equivalence", endpoint_equivalence},
        {"energy equality", energy_equality},
        {"isometry", isometry},
        {"kernel oracle", kernel_oracle},
        {"symmetry projection", symmetry_projection},
        {"gradient check", gradient_check},
        {"pulson dynamics", pulson_dynamics},
        {"flow consistency", flow_consistency},
        {"lesion phantom", lesion_experiment},
        {"monotone objective", monotone_traces},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    int failures = 0;
    for (std::size_t n = 0; n < criteria.size(); ++n) {
        const int id = static_cast<int>(n) + 1;
        if (!selected.empty() && !selected.count(id)) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[n].second();
        } catch (const std::exception &e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %s  %s: %s (%.1f s)\n", id, v.pass ? "PASS" : "FAIL", criteria[n].first.c_str(),
                    v.detail.c_str(), seconds);
        std::fflush(stdout);
        failures += v.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
