#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lddm/error.hpp"
#include "lddm/flows.hpp"
#include "support.hpp"

using namespace lddm;
using lddm::test::Rng;

namespace {

VelocityPath constant_path(const Grid2D &g, int n, Vec2 a) {
    return VelocityPath(std::vector<VectorField>(static_cast<std::size_t>(n), Deformation::translation(g, a).disp));
}

// Smooth time-dependent velocity v(t) = A cos(pi t / 2) + B sin(pi t / 2),
// sampled at the step midpoints.
struct SmoothVelocity {
    VectorField a, b;

    SmoothVelocity(const Grid2D &g, std::uint64_t seed, double max_abs_value, double sigma) {
        Rng rng(seed);
        a = test::smooth_random_field(g, rng, max_abs_value, sigma);
        b = test::smooth_random_field(g, rng, max_abs_value, sigma);
    }

    [[nodiscard]] VelocityPath sample(int n) const {
        std::vector<VectorField> steps;
        for (int k = 0; k < n; ++k) {
            const double t = (k + 0.5) / n;
            steps.push_back(std::cos(M_PI * t / 2) * a + std::sin(M_PI * t / 2) * b);
        }
        return VelocityPath(std::move(steps));
    }
};

} // namespace

TEST_CASE("velocity paths validate their steps") {
    try {
        (void)VelocityPath(std::vector<VectorField>{});
        FAIL("expected invalid_argument");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::invalid_argument);
    }
    try {
        (void)VelocityPath({VectorField(Grid2D(4, 4)), VectorField(Grid2D(4, 5))});
        FAIL("expected grid_mismatch");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::grid_mismatch);
    }
    const VelocityPath z = VelocityPath::zeros(Grid2D(4, 4), 8);
    CHECK(z.size() == 8);
    CHECK(z.dt() == 0.125);
}

TEST_CASE("zero velocity gives identity paths") {
    const Grid2D g(12, 10);
    const VelocityPath z = VelocityPath::zeros(g, 4);
    for (const Stepper s : {Stepper::euler, Stepper::rk2}) {
        for (const auto &path : {integrate_spatial(z, s), integrate_inverse(z, s), integrate_convective(z, s)}) {
            REQUIRE(path.steps() == 4);
            for (const auto &snap : path.snapshots) {
                CHECK(snap == Deformation::identity(g));
            }
        }
    }
}

TEST_CASE("constant velocity translates") {
    const Grid2D g(32, 20, 0.5);
    const Vec2 a{1.5, 0.0}; // physical units per unit time = 3 px
    const VelocityPath v = constant_path(g, 8, a);
    for (const Stepper s : {Stepper::euler, Stepper::rk2}) {
        const Deformation fwd = integrate_spatial(v, s).final();
        const Deformation inv = integrate_inverse(v, s).final();
        const Deformation conv = integrate_convective(v, s).final();
        for (int j = 2; j < g.height() - 2; ++j) {
            for (int i = 5; i < g.width() - 5; ++i) {
                CHECK(fwd.disp.at(i, j).x == doctest::Approx(1.5).epsilon(1e-14));
                CHECK(fwd.disp.at(i, j).y == 0.0);
                CHECK(inv.disp.at(i, j).x == doctest::Approx(-1.5).epsilon(1e-14));
                CHECK(conv.disp.at(i, j).x == doctest::Approx(1.5).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("linear velocity field converges to the exponential flow") {
    const Grid2D g(64, 64);
    const double lambda = 0.2;
    const double c = 31.5;
    VectorField lin(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            lin.set(i, j, {lambda * (i - c), lambda * (j - c)});
        }
    }
    const auto endpoint_error = [&](int n) {
        const Deformation phi = integrate_spatial(VelocityPath(std::vector<VectorField>(n, lin))).final();
        double worst = 0.0;
        for (int j = 0; j < g.height(); ++j) {
            for (int i = 0; i < g.width(); ++i) {
                const double rx = i - c, ry = j - c;
                if (std::hypot(rx, ry) > 24.0) {
                    continue; // endpoint would leave the grid
                }
                const double ex = std::exp(lambda) * rx, ey = std::exp(lambda) * ry;
                const Vec2 got = phi.map(i, j);
                const double r = std::hypot(ex, ey);
                if (r > 1.0) {
                    worst = std::max(worst, std::hypot(got.x - c - ex, got.y - c - ey) / r);
                }
            }
        }
        return worst;
    };
    const double e1 = endpoint_error(1);
    const double e64 = endpoint_error(64);
    MESSAGE("relative error N=1: " << e1 << "  N=64: " << e64);
    CHECK(e64 < 1e-3);
    CHECK(e64 < e1);
}

TEST_CASE("spatial flow and inverse flow compose to the identity") {
    const Grid2D g(64, 64);
    const SmoothVelocity sv(g, 7, 1.0, 6.0);
    const VelocityPath v = sv.sample(32);
    const DeformationPath phi = integrate_spatial(v);

    // Exact counterpart: the spatial flow is inverted by the inverse flow of
    // the time-reversed velocities.
    const DeformationPath eta_rev = integrate_inverse(reversed(v));
    const double exact = max_difference_px(compose(phi.final(), eta_rev.final()), Deformation::identity(g), 2);

    // Literal form, same velocities: exact only when v is constant in time;
    // here the difference is the (small) time-ordering commutator.
    const DeformationPath eta = integrate_inverse(v);
    const double literal = max_difference_px(compose(phi.final(), eta.final()), Deformation::identity(g), 2);
    MESSAGE("phi_1 o eta_1: reversed " << exact << " px, same order " << literal << " px");
    CHECK(exact < 0.01);
    CHECK(literal < 0.1);

    // Snapshot-wise against numerical inversion, time-constant velocity.
    const VelocityPath frozen(std::vector<VectorField>(32, sv.a));
    const DeformationPath fwd = integrate_spatial(frozen);
    const DeformationPath inv = integrate_inverse(frozen);
    double worst = 0.0;
    for (int k = 0; k <= 32; ++k) {
        worst = std::max(worst, max_difference_px(inv.snapshots[static_cast<std::size_t>(k)],
                                                  invert(fwd.snapshots[static_cast<std::size_t>(k)], 500, 1e-10), 2));
    }
    CHECK(worst < 0.1);
}

TEST_CASE("convective path of reversed velocities shares the spatial endpoint") {
    const Grid2D g(48, 48);
    const SmoothVelocity sv(g, 8, 2.0, 5.0);
    const VelocityPath v = sv.sample(16);
    const Deformation spatial = integrate_spatial(v).final();
    const Deformation convective = integrate_convective(reversed(v)).final();
    CHECK(max_difference_px(spatial, convective, 2) < 0.05);
}

TEST_CASE("RK2 refinement order") {
    const Grid2D g(64, 64);
    const SmoothVelocity sv(g, 9, 3.0, 6.0);
    const Deformation reference = integrate_spatial(sv.sample(512)).final();
    const double e8 = max_difference_px(integrate_spatial(sv.sample(8)).final(), reference);
    const double e16 = max_difference_px(integrate_spatial(sv.sample(16)).final(), reference);
    const double e32 = max_difference_px(integrate_spatial(sv.sample(32)).final(), reference);
    MESSAGE("RK2 endpoint error N=8,16,32: " << e8 << ", " << e16 << ", " << e32);
    CHECK(std::log2(e8 / e16) >= 1.8);
    CHECK(std::log2(e16 / e32) >= 1.8);

    const Deformation ref_euler = integrate_spatial(sv.sample(512), Stepper::euler).final();
    const double f8 = max_difference_px(integrate_spatial(sv.sample(8), Stepper::euler).final(), ref_euler);
    const double f16 = max_difference_px(integrate_spatial(sv.sample(16), Stepper::euler).final(), ref_euler);
    CHECK(f8 > e8);
    CHECK(f8 / f16 > 1.5);
}

TEST_CASE("convective residual decays at first order") {
    const Grid2D g(64, 64);
    // The residual has an O(1) floor from bilinear interpolation inside the
    // snapshot inversions; smooth fields and N <= 8 keep the dt term dominant.
    const SmoothVelocity sv(g, 10, 4.0, 16.0);
    double previous = 0.0;
    for (const int n : {2, 4, 8}) {
        const VelocityPath v = sv.sample(n);
        const double r = convective_residual(integrate_convective(v), v, 4);
        MESSAGE("convective residual N=" << n << ": " << r);
        if (previous > 0.0) {
            CHECK(r / previous >= 0.35);
            CHECK(r / previous <= 0.65);
        }
        previous = r;
    }
}

TEST_CASE("left/right correspondence") {
    const Grid2D g(32, 32);
    SUBCASE("identity path") {
        const DeformationPath phi = integrate_spatial(VelocityPath::zeros(g, 5));
        const DeformationPath psi = correspond_left_right(phi);
        for (const auto &s : psi.snapshots) {
            CHECK(s == Deformation::identity(g));
        }
    }
    SUBCASE("translation path is fixed") {
        const DeformationPath phi = integrate_spatial(constant_path(g, 8, {0.8, -0.4}));
        const DeformationPath psi = correspond_left_right(phi);
        for (int k = 0; k <= 8; ++k) {
            const auto &a = phi.snapshots[static_cast<std::size_t>(k)];
            const auto &b = psi.snapshots[static_cast<std::size_t>(k)];
            CHECK(max_difference_px(a, b, 4) < 1e-9);
        }
    }
    SUBCASE("endpoints agree bitwise and psi starts at the identity") {
        const SmoothVelocity sv(g, 11, 1.5, 4.0);
        const DeformationPath phi = integrate_spatial(sv.sample(8));
        const DeformationPath psi = correspond_left_right(phi);
        CHECK(psi.final() == phi.final());
        CHECK(psi.snapshots.front() == Deformation::identity(g));
    }
    SUBCASE("corresponded path has the reversed convective velocity") {
        const Grid2D big(64, 64);
        const SmoothVelocity sv(big, 12, 4.0, 16.0);
        double previous = 0.0;
        for (const int n : {2, 4, 8}) {
            const VelocityPath v = sv.sample(n);
            const DeformationPath psi = correspond_left_right(integrate_spatial(v));
            const double r = convective_residual(psi, reversed(v), 4);
            MESSAGE("psi residual N=" << n << ": " << r);
            if (previous > 0.0) {
                CHECK(r / previous >= 0.35);
                CHECK(r / previous <= 0.65);
            }
            previous = r;
        }
    }
}

TEST_CASE("CFL diagnostics warn without failing") {
    const Grid2D g(16, 16);
    FlowDiagnostics diag;
    const auto path = integrate_spatial(constant_path(g, 2, {20.0, 0.0}), Stepper::rk2, &diag);
    CHECK(path.steps() == 2);
    CHECK(diag.cfl_warnings == 2);
    CHECK(diag.max_step_px == doctest::Approx(10.0));
    FlowDiagnostics calm;
    (void)integrate_inverse(constant_path(g, 4, {1.0, 0.0}), Stepper::rk2, &calm);
    CHECK(calm.cfl_warnings == 0);
}

TEST_CASE("path energy") {
    const Grid2D g(20, 20, 0.5);
    const KernelSpec k = KernelSpec::gaussian(2.0);
    SUBCASE("zero path") {
        const VelocityPath z = VelocityPath::zeros(g, 3);
        const std::vector<VectorField> p(3, VectorField(g));
        CHECK(path_energy(z, k, p) == 0.0);
    }
    SUBCASE("impulse, one step") {
        VectorField p(g);
        p.set(7, 11, {2.0, 0.0});
        const VelocityPath v({apply_kernel(k, p)});
        const std::vector<VectorField> m{p};
        CHECK(path_energy(v, k, m, true) == doctest::Approx(0.5 * 4.0 * 0.25).epsilon(1e-14));
    }
    SUBCASE("missing momenta are refused") {
        try {
            (void)path_energy(VelocityPath::zeros(g, 2), k, std::nullopt);
            FAIL("expected MissingMomenta");
        } catch (const Error &e) {
            CHECK(e.kind() == ErrorKind::missing_momenta);
        }
    }
    SUBCASE("verification catches velocities not generated by the momenta") {
        Rng rng(13);
        const VectorField p = test::random_field(g, rng);
        const std::vector<VectorField> m{p};
        CHECK_THROWS_AS(path_energy(VelocityPath({p}), k, m, true), Error);
        CHECK_THROWS_AS(path_energy(VelocityPath({p, p}), k, m), Error);
    }
    SUBCASE("reversing the steps leaves the energy bitwise unchanged") {
        Rng rng(14);
        std::vector<VectorField> p, v;
        for (int n = 0; n < 9; ++n) {
            p.push_back(test::random_field(g, rng));
            v.push_back(apply_kernel(k, p.back()));
        }
        const std::vector<VectorField> p_rev(p.rbegin(), p.rend());
        const double right = path_energy(VelocityPath(v), k, p);
        const double left = path_energy(reversed(VelocityPath(v)), k, p_rev);
        CHECK(right == left);
        CHECK(right > 0.0);
    }
}

TEST_CASE("sorted_sum is permutation invariant") {
    Rng rng(15);
    std::vector<double> terms;
    for (int i = 0; i < 200; ++i) {
        terms.push_back(std::pow(10.0, rng.uniform(-8, 8)) * rng.uniform());
    }
    const double base = sorted_sum(terms);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> shuffled = terms;
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
            std::swap(shuffled[i], shuffled[static_cast<std::size_t>(rng.uniform(0.0, 1.0) * (i + 1))]);
        }
        CHECK(sorted_sum(shuffled) == base);
    }
    CHECK(sorted_sum({}) == 0.0);
}
