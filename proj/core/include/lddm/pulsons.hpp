#pragma once

// Singular momentum ("pulson") solutions p(t) = sum_a P_a delta(x - Q_a(t)) of
// the right- and left-invariant geodesic equations, reduced to ODEs in (Q, P):
//
//   right:  dQ_a/dt =  sum_b P_b k(Q_a, Q_b)    dP_a/dt = -sum_b (P_a . P_b) grad_{Q_a} k(Q_a, Q_b)
//   left:   dQ_a/dt = -sum_b P_b k(Q_a, Q_b)    dP_a/dt = +sum_b (P_a . P_b) grad_{Q_a} k(Q_a, Q_b)
//
// Left dynamics is right dynamics with time reversed. On left trajectories Q_a
// is not a particle position: it is the body-coordinate location that
// corresponds to the fixed spatial point Q_a(0).

#include <cstddef>
#include <vector>

#include "lddm/grid.hpp"

namespace lddm::pulsons {

struct State {
    std::vector<Vec2> q;
    std::vector<Vec2> p;

    [[nodiscard]] std::size_t size() const noexcept { return q.size(); }
};

// Throws Error(invalid_argument) for mismatched lengths, empty states, or
// non-finite coordinates.
void validate(const State &s);

// k(q, q') = exp(-|q - q'|^2 / (2 sigma^2)).
class GaussianScalarKernel {
public:
    explicit GaussianScalarKernel(double sigma);

    [[nodiscard]] double sigma() const noexcept { return sigma_; }
    [[nodiscard]] double value(Vec2 a, Vec2 b) const noexcept;
    // Gradient with respect to the first argument.
    [[nodiscard]] Vec2 gradient(Vec2 a, Vec2 b) const noexcept;

private:
    double sigma_;
};

enum class Side { left, right };

// sum_{a,b} (P_a . P_b) k(Q_a, Q_b).
double hamiltonian(const State &s, const GaussianScalarKernel &k);

State rhs_right(const State &s, const GaussianScalarKernel &k);
// Exactly the negation of rhs_right.
State rhs_left(const State &s, const GaussianScalarKernel &k);

Vec2 total_momentum(const State &s) noexcept;

// (x, y) -> (-x, y) applied to every Q and P.
State reflect_y_axis(const State &s);

// Classical fourth-order Runge-Kutta over [0, duration] with n_steps equal
// steps (duration may be negative). Returns n_steps + 1 states.
// Throws Error(non_finite) as soon as a coordinate stops being finite.
std::vector<State> shoot(const State &initial, const GaussianScalarKernel &k, Side side, double duration,
                         int n_steps);

} // namespace lddm::pulsons
