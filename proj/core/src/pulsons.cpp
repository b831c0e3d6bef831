#include "lddm/pulsons.hpp"

#include <cmath>
#include <string>

#include "lddm/error.hpp"

namespace lddm::pulsons {

namespace {

State axpy(const State &y, double h, const State &k) {
    State out = y;
    for (std::size_t a = 0; a < y.size(); ++a) {
        out.q[a] = y.q[a] + h * k.q[a];
        out.p[a] = y.p[a] + h * k.p[a];
    }
    return out;
}

bool finite(const State &s) noexcept {
    for (std::size_t a = 0; a < s.size(); ++a) {
        if (!std::isfinite(s.q[a].x) || !std::isfinite(s.q[a].y) || !std::isfinite(s.p[a].x) ||
            !std::isfinite(s.p[a].y)) {
            return false;
        }
    }
    return true;
}

} // namespace

void validate(const State &s) {
    if (s.q.empty() || s.q.size() != s.p.size()) {
        throw Error(ErrorKind::invalid_argument, "pulson state: need N >= 1 positions and as many momenta");
    }
    if (!finite(s)) {
        throw Error(ErrorKind::invalid_argument, "pulson state: non-finite coordinate");
    }
}

GaussianScalarKernel::GaussianScalarKernel(double sigma) : sigma_(sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorKind::invalid_argument, "pulson kernel: sigma must be positive");
    }
}

double GaussianScalarKernel::value(Vec2 a, Vec2 b) const noexcept {
    const Vec2 d = a - b;
    return std::exp(-(d.x * d.x + d.y * d.y) / (2.0 * sigma_ * sigma_));
}

Vec2 GaussianScalarKernel::gradient(Vec2 a, Vec2 b) const noexcept {
    return (-value(a, b) / (sigma_ * sigma_)) * (a - b);
}

double hamiltonian(const State &s, const GaussianScalarKernel &k) {
    double h = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = 0; b < s.size(); ++b) {
            h += (s.p[a].x * s.p[b].x + s.p[a].y * s.p[b].y) * k.value(s.q[a], s.q[b]);
        }
    }
    return h;
}

State rhs_right(const State &s, const GaussianScalarKernel &k) {
    State d;
    d.q.resize(s.size());
    d.p.resize(s.size());
    for (std::size_t a = 0; a < s.size(); ++a) {
        Vec2 qdot;
        Vec2 pdot;
        for (std::size_t b = 0; b < s.size(); ++b) {
            qdot = qdot + k.value(s.q[a], s.q[b]) * s.p[b];
            const double pp = s.p[a].x * s.p[b].x + s.p[a].y * s.p[b].y;
            pdot = pdot - pp * k.gradient(s.q[a], s.q[b]);
        }
        d.q[a] = qdot;
        d.p[a] = pdot;
    }
    return d;
}

State rhs_left(const State &s, const GaussianScalarKernel &k) {
    State d = rhs_right(s, k);
    for (std::size_t a = 0; a < d.size(); ++a) {
        d.q[a] = -1.0 * d.q[a];
        d.p[a] = -1.0 * d.p[a];
    }
    return d;
}

Vec2 total_momentum(const State &s) noexcept {
    Vec2 total;
    for (const Vec2 &p : s.p) {
        total = total + p;
    }
    return total;
}

State reflect_y_axis(const State &s) {
    State out = s;
    for (std::size_t a = 0; a < s.size(); ++a) {
        out.q[a].x = -s.q[a].x;
        out.p[a].x = -s.p[a].x;
    }
    return out;
}

std::vector<State> shoot(const State &initial, const GaussianScalarKernel &k, Side side, double duration,
                         int n_steps) {
    validate(initial);
    if (n_steps < 1) {
        throw Error(ErrorKind::invalid_argument, "shoot: n_steps must be >= 1");
    }
    const auto f = [&](const State &s) { return side == Side::right ? rhs_right(s, k) : rhs_left(s, k); };
    const double h = duration / n_steps;
    std::vector<State> trajectory;
    trajectory.reserve(static_cast<std::size_t>(n_steps) + 1);
    trajectory.push_back(initial);
    State y = initial;
    for (int step = 0; step < n_steps; ++step) {
        const State k1 = f(y);
        const State k2 = f(axpy(y, 0.5 * h, k1));
        const State k3 = f(axpy(y, 0.5 * h, k2));
        const State k4 = f(axpy(y, h, k3));
        for (std::size_t a = 0; a < y.size(); ++a) {
            y.q[a] = y.q[a] + (h / 6.0) * (k1.q[a] + 2.0 * k2.q[a] + 2.0 * k3.q[a] + k4.q[a]);
            y.p[a] = y.p[a] + (h / 6.0) * (k1.p[a] + 2.0 * k2.p[a] + 2.0 * k3.p[a] + k4.p[a]);
        }
        if (!finite(y)) {
            throw Error(ErrorKind::non_finite, "shoot: state became non-finite at step " + std::to_string(step + 1));
        }
        trajectory.push_back(y);
    }
    return trajectory;
}

} // namespace lddm::pulsons
