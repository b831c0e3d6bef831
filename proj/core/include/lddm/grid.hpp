#pragma once

// Discrete substrate shared by every other module: a uniform 2D grid, scalar
// images, two-component vector fields, displacement-encoded deformations, and
// binary masks, plus the sampling / differentiation / warping primitives.
//
// Coordinates. Pixel (i, j) sits at the physical point (i * spacing, j * spacing);
// i runs along x (columns), j along y (rows). Storage is row-major, index
// j * width + i. Internally all geometry is done in index units so that pixel
// centres are hit exactly.
//
// Boundary handling. Vector fields extend by zero: the bilinear interpolant is
// built on the lattice padded with zero samples, so it decays linearly to zero
// over one pixel outside the grid and is identically zero beyond that. Images
// clamp to the nearest edge value.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lddm {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

// Row-major 2x2 matrix [[xx, xy], [yx, yy]]; xy = d(x-component)/dy.
struct Mat2 {
    double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;
};

class Grid2D {
public:
    Grid2D() = default;
    // Throws Error(invalid_argument) unless width, height >= 2 and spacing > 0.
    Grid2D(int width, int height, double spacing = 1.0);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] double spacing() const noexcept { return spacing_; }
    [[nodiscard]] std::size_t size() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    [[nodiscard]] std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(i);
    }
    [[nodiscard]] Vec2 position(int i, int j) const noexcept { return {i * spacing_, j * spacing_}; }
    [[nodiscard]] bool interior(int i, int j) const noexcept {
        return i > 0 && j > 0 && i < width_ - 1 && j < height_ - 1;
    }

    friend bool operator==(const Grid2D &, const Grid2D &) = default;

private:
    int width_ = 2;
    int height_ = 2;
    double spacing_ = 1.0;
};

// Throws Error(grid_mismatch) naming `what` if the two grids differ.
void require_same_grid(const Grid2D &a, const Grid2D &b, const char *what);

class Image {
public:
    Image() = default;
    explicit Image(const Grid2D &grid, double fill = 0.0);
    // Throws Error(invalid_argument) on wrong length or non-finite samples.
    Image(const Grid2D &grid, std::vector<double> data);

    [[nodiscard]] const Grid2D &grid() const noexcept { return grid_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    double &operator()(int i, int j) noexcept { return data_[grid_.index(i, j)]; }
    double operator()(int i, int j) const noexcept { return data_[grid_.index(i, j)]; }

    friend bool operator==(const Image &, const Image &) = default;

private:
    Grid2D grid_;
    std::vector<double> data_ = std::vector<double>(4, 0.0);
};

class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const Grid2D &grid);
    // Throws Error(invalid_argument) on wrong lengths or non-finite samples.
    VectorField(const Grid2D &grid, std::vector<double> ux, std::vector<double> uy);

    [[nodiscard]] const Grid2D &grid() const noexcept { return grid_; }
    [[nodiscard]] std::span<const double> ux() const noexcept { return ux_; }
    [[nodiscard]] std::span<const double> uy() const noexcept { return uy_; }
    [[nodiscard]] std::span<double> ux() noexcept { return ux_; }
    [[nodiscard]] std::span<double> uy() noexcept { return uy_; }

    [[nodiscard]] Vec2 at(int i, int j) const noexcept {
        const auto k = grid_.index(i, j);
        return {ux_[k], uy_[k]};
    }
    void set(int i, int j, Vec2 v) noexcept {
        const auto k = grid_.index(i, j);
        ux_[k] = v.x;
        uy_[k] = v.y;
    }

    VectorField &operator+=(const VectorField &other);
    VectorField &operator*=(double s) noexcept;

    friend bool operator==(const VectorField &, const VectorField &) = default;

private:
    Grid2D grid_;
    std::vector<double> ux_ = std::vector<double>(4, 0.0);
    std::vector<double> uy_ = std::vector<double>(4, 0.0);
};

VectorField operator+(VectorField a, const VectorField &b);
VectorField operator-(const VectorField &a, const VectorField &b);
VectorField operator*(double s, VectorField a);

// Pointwise product of a scalar weight image with a vector field.
VectorField multiply(const Image &weights, const VectorField &field);

// phi(x) = x + disp(x), displacement in physical units.
struct Deformation {
    VectorField disp;

    Deformation() = default;
    explicit Deformation(VectorField d) : disp(std::move(d)) {}

    static Deformation identity(const Grid2D &grid);
    static Deformation translation(const Grid2D &grid, Vec2 offset);

    [[nodiscard]] const Grid2D &grid() const noexcept { return disp.grid(); }
    [[nodiscard]] Vec2 map(int i, int j) const noexcept { return grid().position(i, j) + disp.at(i, j); }

    friend bool operator==(const Deformation &, const Deformation &) = default;
};

class Mask {
public:
    Mask() = default;
    explicit Mask(const Grid2D &grid, std::uint8_t fill = 0);
    // Throws Error(invalid_argument) unless every value is exactly 0 or 1.
    Mask(const Grid2D &grid, std::vector<std::uint8_t> data);

    [[nodiscard]] const Grid2D &grid() const noexcept { return grid_; }
    [[nodiscard]] std::span<const std::uint8_t> data() const noexcept { return data_; }

    std::uint8_t operator()(int i, int j) const noexcept { return data_[grid_.index(i, j)]; }
    void set(int i, int j, bool on) noexcept { data_[grid_.index(i, j)] = on ? 1 : 0; }

    [[nodiscard]] std::size_t count() const noexcept;
    [[nodiscard]] Mask complement() const;
    [[nodiscard]] Image to_image() const;
    // Threshold at 0.5.
    static Mask from_image(const Image &img);

    friend bool operator==(const Mask &, const Mask &) = default;

private:
    Grid2D grid_;
    std::vector<std::uint8_t> data_ = std::vector<std::uint8_t>(4, 0);
};

// Binary dilation with a 3x3 structuring element, repeated `times` times.
Mask dilate(const Mask &mask, int times);

// ---- sampling ----------------------------------------------------------

// Physical-coordinate sampling. Images clamp to edge, vector fields extend by zero.
double bilinear_sample(const Image &img, Vec2 point) noexcept;
Vec2 bilinear_sample(const VectorField &field, Vec2 point) noexcept;

// Index-coordinate variants used by the flow and matching kernels.
// `jacobian`, when non-null, receives the derivative of the interpolant with
// respect to index coordinates (zero along clamped axes).
double sample_clamped_index(const Image &img, double fi, double fj, Vec2 *gradient = nullptr) noexcept;
Vec2 sample_zero_index(const VectorField &field, double fi, double fj, Mat2 *jacobian = nullptr) noexcept;

// Adjoint of sample_zero_index with respect to the field samples: adds
// weight_c * value into the four surrounding samples of `target`.
void scatter_zero_index(VectorField &target, double fi, double fj, Vec2 value) noexcept;

// ---- differential operators and deformation algebra --------------------------------

// Central differences at interior pixels, one-sided at the edges, per unit length.
VectorField spatial_gradient(const Image &img);

// output(x) = I(phi_inv(x)).
Image warp_image(const Image &img, const Deformation &phi_inv);

// result(x) = phi(psi(x)).
Deformation compose(const Deformation &phi, const Deformation &psi);

struct InversionResult {
    Deformation inverse;
    int iterations = 0;
    double last_update_px = 0.0;
};

// Fixed-point iteration for d_inv = -d o (id + d_inv). Each update is the
// residual step preconditioned by (I + grad d)^-1 at the sampled point, which
// reduces to d_inv <- -d o (id + d_inv) where d is locally constant (falls
// back to that plain step where I + grad d is near singular). Stops once the largest
// per-pixel update falls below `tol_px` (pixels). Throws Error(non_convergent)
// if the update is still above 10 * tol_px after `max_iter` iterations.
InversionResult invert_detailed(const Deformation &phi, int max_iter = 200, double tol_px = 1e-6);
Deformation invert(const Deformation &phi, int max_iter = 200, double tol_px = 1e-6);

// det(I + grad disp), central differences (one-sided at edges).
Image jacobian_determinant(const Deformation &phi);

// True iff the Jacobian determinant is positive at every interior pixel.
bool is_valid(const Deformation &phi);

// ---- reductions (fixed row-major order) ----------------------------------

// Sum_x (a . b) * spacing^2.
double l2_inner(const VectorField &a, const VectorField &b);
double max_abs(const VectorField &f) noexcept;
double max_abs_difference(const VectorField &a, const VectorField &b);
// ||phi - psi||_inf measured in pixels, optionally restricted to interior pixels
// that are at least `margin` pixels away from the edge.
double max_difference_px(const Deformation &a, const Deformation &b, int margin = 0);

} // namespace lddm
