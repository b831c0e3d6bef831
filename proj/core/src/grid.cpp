#include "lddm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lddm/error.hpp"

namespace lddm {

namespace {

void require_finite(std::span<const double> values, const char *what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::invalid_argument, std::string(what) + ": non-finite sample");
        }
    }
}

// Value of a zero-extended lattice at integer coordinates.
inline double zero_ext(std::span<const double> data, const Grid2D &g, int i, int j) noexcept {
    if (i < 0 || j < 0 || i >= g.width() || j >= g.height()) {
        return 0.0;
    }
    return data[g.index(i, j)];
}

} // namespace

Grid2D::Grid2D(int width, int height, double spacing)
    : width_(width), height_(height), spacing_(spacing) {
    if (width < 2 || height < 2) {
        throw Error(ErrorKind::invalid_argument,
                    "grid must be at least 2x2, got " + std::to_string(width) + "x" + std::to_string(height));
    }
    if (!(spacing > 0.0) || !std::isfinite(spacing)) {
        throw Error(ErrorKind::invalid_argument, "grid spacing must be positive and finite");
    }
}

void require_same_grid(const Grid2D &a, const Grid2D &b, const char *what) {
    if (!(a == b)) {
        throw Error(ErrorKind::grid_mismatch, std::string(what) + ": grid mismatch (" + std::to_string(a.width()) +
                                                  "x" + std::to_string(a.height()) + " vs " +
                                                  std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
    }
}

// ---- Image ---------------------------------------------------------------

Image::Image(const Grid2D &grid, double fill) : grid_(grid), data_(grid.size(), fill) {}

Image::Image(const Grid2D &grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
    if (data_.size() != grid_.size()) {
        throw Error(ErrorKind::invalid_argument, "image data length does not match grid");
    }
    require_finite(data_, "image");
}

// ---- VectorField ---------------------------------------------------------

VectorField::VectorField(const Grid2D &grid) : grid_(grid), ux_(grid.size(), 0.0), uy_(grid.size(), 0.0) {}

VectorField::VectorField(const Grid2D &grid, std::vector<double> ux, std::vector<double> uy)
    : grid_(grid), ux_(std::move(ux)), uy_(std::move(uy)) {
    if (ux_.size() != grid_.size() || uy_.size() != grid_.size()) {
        throw Error(ErrorKind::invalid_argument, "vector field data length does not match grid");
    }
    require_finite(ux_, "vector field");
    require_finite(uy_, "vector field");
}

VectorField &VectorField::operator+=(const VectorField &other) {
    require_same_grid(grid_, other.grid_, "vector field sum");
    for (std::size_t k = 0; k < ux_.size(); ++k) {
        ux_[k] += other.ux_[k];
        uy_[k] += other.uy_[k];
    }
    return *this;
}

VectorField &VectorField::operator*=(double s) noexcept {
    for (std::size_t k = 0; k < ux_.size(); ++k) {
        ux_[k] *= s;
        uy_[k] *= s;
    }
    return *this;
}

VectorField operator+(VectorField a, const VectorField &b) {
    a += b;
    return a;
}

VectorField operator-(const VectorField &a, const VectorField &b) {
    require_same_grid(a.grid(), b.grid(), "vector field difference");
    VectorField out(a.grid());
    for (std::size_t k = 0; k < a.grid().size(); ++k) {
        out.ux()[k] = a.ux()[k] - b.ux()[k];
        out.uy()[k] = a.uy()[k] - b.uy()[k];
    }
    return out;
}

VectorField operator*(double s, VectorField a) {
    a *= s;
    return a;
}

VectorField multiply(const Image &weights, const VectorField &field) {
    require_same_grid(weights.grid(), field.grid(), "weighted field");
    VectorField out(field.grid());
    const auto w = weights.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
        out.ux()[k] = w[k] * field.ux()[k];
        out.uy()[k] = w[k] * field.uy()[k];
    }
    return out;
}

// ---- Deformation ---------------------------------------------------------

Deformation Deformation::identity(const Grid2D &grid) { return Deformation(VectorField(grid)); }

Deformation Deformation::translation(const Grid2D &grid, Vec2 offset) {
    VectorField d(grid);
    std::fill(d.ux().begin(), d.ux().end(), offset.x);
    std::fill(d.uy().begin(), d.uy().end(), offset.y);
    return Deformation(std::move(d));
}

// ---- Mask ----------------------------------------------------------------

Mask::Mask(const Grid2D &grid, std::uint8_t fill) : grid_(grid), data_(grid.size(), fill ? 1 : 0) {}

Mask::Mask(const Grid2D &grid, std::vector<std::uint8_t> data) : grid_(grid), data_(std::move(data)) {
    if (data_.size() != grid_.size()) {
        throw Error(ErrorKind::invalid_argument, "mask data length does not match grid");
    }
    if (std::any_of(data_.begin(), data_.end(), [](std::uint8_t v) { return v > 1; })) {
        throw Error(ErrorKind::invalid_argument, "mask values must be 0 or 1");
    }
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Mask Mask::complement() const {
    Mask out(grid_);
    for (std::size_t k = 0; k < data_.size(); ++k) {
        out.data_[k] = data_[k] ? 0 : 1;
    }
    return out;
}

Image Mask::to_image() const {
    Image out(grid_);
    for (std::size_t k = 0; k < data_.size(); ++k) {
        out.data()[k] = data_[k];
    }
    return out;
}

Mask Mask::from_image(const Image &img) {
    Mask out(img.grid());
    const auto d = img.data();
    for (std::size_t k = 0; k < d.size(); ++k) {
        out.data_[k] = d[k] > 0.5 ? 1 : 0;
    }
    return out;
}

Mask dilate(const Mask &mask, int times) {
    const Grid2D &g = mask.grid();
    Mask current = mask;
    for (int t = 0; t < times; ++t) {
        Mask next(g);
        for (int j = 0; j < g.height(); ++j) {
            for (int i = 0; i < g.width(); ++i) {
                bool on = false;
                for (int dj = -1; dj <= 1 && !on; ++dj) {
                    for (int di = -1; di <= 1 && !on; ++di) {
                        const int ii = i + di;
                        const int jj = j + dj;
                        if (ii >= 0 && jj >= 0 && ii < g.width() && jj < g.height() && current(ii, jj)) {
                            on = true;
                        }
                    }
                }
                next.set(i, j, on);
            }
        }
        current = std::move(next);
    }
    return current;
}

// ---- sampling ------------------------------------------------------------

double sample_clamped_index(const Image &img, double fi, double fj, Vec2 *gradient) noexcept {
    const Grid2D &g = img.grid();
    const double max_i = g.width() - 1;
    const double max_j = g.height() - 1;
    const bool clamp_i = !(fi >= 0.0 && fi <= max_i);
    const bool clamp_j = !(fj >= 0.0 && fj <= max_j);
    const double ci = clamp_i ? (fi > max_i ? max_i : 0.0) : fi;
    const double cj = clamp_j ? (fj > max_j ? max_j : 0.0) : fj;

    const int i0 = std::min(static_cast<int>(std::floor(ci)), g.width() - 2);
    const int j0 = std::min(static_cast<int>(std::floor(cj)), g.height() - 2);
    const double tx = ci - i0;
    const double ty = cj - j0;

    const double v00 = img(i0, j0);
    const double v10 = img(i0 + 1, j0);
    const double v01 = img(i0, j0 + 1);
    const double v11 = img(i0 + 1, j0 + 1);

    if (gradient != nullptr) {
        gradient->x = clamp_i ? 0.0 : (1.0 - ty) * (v10 - v00) + ty * (v11 - v01);
        gradient->y = clamp_j ? 0.0 : (1.0 - tx) * (v01 - v00) + tx * (v11 - v10);
    }
    return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11);
}

Vec2 sample_zero_index(const VectorField &field, double fi, double fj, Mat2 *jacobian) noexcept {
    const Grid2D &g = field.grid();
    if (!(fi > -1.0 && fi < g.width() && fj > -1.0 && fj < g.height())) {
        if (jacobian != nullptr) {
            *jacobian = Mat2{};
        }
        return {};
    }
    const int i0 = static_cast<int>(std::floor(fi));
    const int j0 = static_cast<int>(std::floor(fj));
    const double tx = fi - i0;
    const double ty = fj - j0;

    Vec2 out;
    Mat2 jac;
    const auto eval = [&](std::span<const double> c, double &value, double &d_i, double &d_j) {
        const double v00 = zero_ext(c, g, i0, j0);
        const double v10 = zero_ext(c, g, i0 + 1, j0);
        const double v01 = zero_ext(c, g, i0, j0 + 1);
        const double v11 = zero_ext(c, g, i0 + 1, j0 + 1);
        value = (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11);
        d_i = (1.0 - ty) * (v10 - v00) + ty * (v11 - v01);
        d_j = (1.0 - tx) * (v01 - v00) + tx * (v11 - v10);
    };
    eval(field.ux(), out.x, jac.xx, jac.xy);
    eval(field.uy(), out.y, jac.yx, jac.yy);
    if (jacobian != nullptr) {
        *jacobian = jac;
    }
    return out;
}

void scatter_zero_index(VectorField &target, double fi, double fj, Vec2 value) noexcept {
    const Grid2D &g = target.grid();
    if (!(fi > -1.0 && fi < g.width() && fj > -1.0 && fj < g.height())) {
        return;
    }
    const int i0 = static_cast<int>(std::floor(fi));
    const int j0 = static_cast<int>(std::floor(fj));
    const double tx = fi - i0;
    const double ty = fj - j0;
    const double w[4] = {(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty};
    const int ci[4] = {i0, i0 + 1, i0, i0 + 1};
    const int cj[4] = {j0, j0, j0 + 1, j0 + 1};
    for (int c = 0; c < 4; ++c) {
        if (ci[c] < 0 || cj[c] < 0 || ci[c] >= g.width() || cj[c] >= g.height()) {
            continue;
        }
        const auto k = g.index(ci[c], cj[c]);
        target.ux()[k] += w[c] * value.x;
        target.uy()[k] += w[c] * value.y;
    }
}

double bilinear_sample(const Image &img, Vec2 point) noexcept {
    const double h = img.grid().spacing();
    return sample_clamped_index(img, point.x / h, point.y / h);
}

Vec2 bilinear_sample(const VectorField &field, Vec2 point) noexcept {
    const double h = field.grid().spacing();
    return sample_zero_index(field, point.x / h, point.y / h);
}

// ---- differential operators ----------------------------------------------

namespace {

// d/dx and d/dy of a scalar sample array, per unit length.
template <class Get>
Vec2 central_difference(const Grid2D &g, int i, int j, Get &&value) {
    const double h = g.spacing();
    Vec2 d;
    if (i == 0) {
        d.x = (value(1, j) - value(0, j)) / h;
    } else if (i == g.width() - 1) {
        d.x = (value(i, j) - value(i - 1, j)) / h;
    } else {
        d.x = (value(i + 1, j) - value(i - 1, j)) / (2.0 * h);
    }
    if (j == 0) {
        d.y = (value(i, 1) - value(i, 0)) / h;
    } else if (j == g.height() - 1) {
        d.y = (value(i, j) - value(i, j - 1)) / h;
    } else {
        d.y = (value(i, j + 1) - value(i, j - 1)) / (2.0 * h);
    }
    return d;
}

} // namespace

VectorField spatial_gradient(const Image &img) {
    const Grid2D &g = img.grid();
    VectorField out(g);
    const auto value = [&](int i, int j) { return img(i, j); };
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            out.set(i, j, central_difference(g, i, j, value));
        }
    }
    return out;
}

Image warp_image(const Image &img, const Deformation &phi_inv) {
    require_same_grid(img.grid(), phi_inv.grid(), "warp_image");
    const Grid2D &g = img.grid();
    const double h = g.spacing();
    Image out(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const Vec2 d = phi_inv.disp.at(i, j);
            out(i, j) = sample_clamped_index(img, i + d.x / h, j + d.y / h);
        }
    }
    return out;
}

Deformation compose(const Deformation &phi, const Deformation &psi) {
    require_same_grid(phi.grid(), psi.grid(), "compose");
    const Grid2D &g = phi.grid();
    const double h = g.spacing();
    VectorField out(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const Vec2 d = psi.disp.at(i, j);
            out.set(i, j, d + sample_zero_index(phi.disp, i + d.x / h, j + d.y / h));
        }
    }
    return Deformation(std::move(out));
}

InversionResult invert_detailed(const Deformation &phi, int max_iter, double tol_px) {
    const Grid2D &g = phi.grid();
    const double h = g.spacing();
    InversionResult result{Deformation::identity(g), 0, std::numeric_limits<double>::infinity()};
    VectorField current(g);
    VectorField next(g);
    for (int it = 1; it <= max_iter; ++it) {
        double update = 0.0;
        for (int j = 0; j < g.height(); ++j) {
            for (int i = 0; i < g.width(); ++i) {
                const Vec2 d = current.at(i, j);
                Mat2 jac;
                const Vec2 s = sample_zero_index(phi.disp, i + d.x / h, j + d.y / h, &jac);
                // Residual r = d + s of the inverse equation, Newton-preconditioned by
                // (I + grad disp)^-1. Where grad disp vanishes this is the plain
                // update d <- -s; the preconditioner keeps the iteration contracting
                // for large rotations, where the plain map has spectral radius > 1.
                const Vec2 r = d + s;
                const double a = 1.0 + jac.xx / h, b = jac.xy / h, c = jac.yx / h, e = 1.0 + jac.yy / h;
                const double det = a * e - b * c;
                Vec2 v = -1.0 * s;
                if (det > 0.05) {
                    Vec2 step = (1.0 / det) * Vec2{e * r.x - b * r.y, a * r.y - c * r.x};
                    // At most one pixel per iteration so the sampled Jacobian stays local.
                    const double len = std::hypot(step.x, step.y) / h;
                    if (len > 1.0) {
                        step = (1.0 / len) * step;
                    }
                    v = d - step;
                }
                update = std::max({update, std::abs(v.x - d.x) / h, std::abs(v.y - d.y) / h});
                next.set(i, j, v);
            }
        }
        std::swap(current, next);
        if (update <= result.last_update_px) {
            result.inverse.disp = current;
            result.iterations = it;
            result.last_update_px = update;
        }
        if (update < tol_px) {
            return result;
        }
    }
    if (result.last_update_px > 10.0 * tol_px) {
        throw Error(ErrorKind::non_convergent, "invert: update " + std::to_string(result.last_update_px) +
                                                   " px after " + std::to_string(max_iter) + " iterations");
    }
    return result;
}

Deformation invert(const Deformation &phi, int max_iter, double tol_px) {
    return invert_detailed(phi, max_iter, tol_px).inverse;
}

Image jacobian_determinant(const Deformation &phi) {
    const Grid2D &g = phi.grid();
    Image out(g);
    const auto ux = phi.disp.ux();
    const auto uy = phi.disp.uy();
    const auto get_x = [&](int i, int j) { return ux[g.index(i, j)]; };
    const auto get_y = [&](int i, int j) { return uy[g.index(i, j)]; };
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            const Vec2 dx = central_difference(g, i, j, get_x);
            const Vec2 dy = central_difference(g, i, j, get_y);
            out(i, j) = (1.0 + dx.x) * (1.0 + dy.y) - dx.y * dy.x;
        }
    }
    return out;
}

bool is_valid(const Deformation &phi) {
    const Image det = jacobian_determinant(phi);
    const Grid2D &g = phi.grid();
    for (int j = 1; j < g.height() - 1; ++j) {
        for (int i = 1; i < g.width() - 1; ++i) {
            if (!(det(i, j) > 0.0)) {
                return false;
            }
        }
    }
    return true;
}

// ---- reductions ----------------------------------------------------------

double l2_inner(const VectorField &a, const VectorField &b) {
    require_same_grid(a.grid(), b.grid(), "l2_inner");
    double sum = 0.0;
    for (std::size_t k = 0; k < a.grid().size(); ++k) {
        sum += a.ux()[k] * b.ux()[k] + a.uy()[k] * b.uy()[k];
    }
    const double h = a.grid().spacing();
    return sum * h * h;
}

double max_abs(const VectorField &f) noexcept {
    double m = 0.0;
    for (std::size_t k = 0; k < f.grid().size(); ++k) {
        m = std::max({m, std::abs(f.ux()[k]), std::abs(f.uy()[k])});
    }
    return m;
}

double max_abs_difference(const VectorField &a, const VectorField &b) {
    require_same_grid(a.grid(), b.grid(), "max_abs_difference");
    double m = 0.0;
    for (std::size_t k = 0; k < a.grid().size(); ++k) {
        m = std::max({m, std::abs(a.ux()[k] - b.ux()[k]), std::abs(a.uy()[k] - b.uy()[k])});
    }
    return m;
}

double max_difference_px(const Deformation &a, const Deformation &b, int margin) {
    require_same_grid(a.grid(), b.grid(), "max_difference_px");
    const Grid2D &g = a.grid();
    double m = 0.0;
    for (int j = margin; j < g.height() - margin; ++j) {
        for (int i = margin; i < g.width() - margin; ++i) {
            const Vec2 d = a.disp.at(i, j) - b.disp.at(i, j);
            m = std::max({m, std::abs(d.x), std::abs(d.y)});
        }
    }
    return m / g.spacing();
}

} // namespace lddm
