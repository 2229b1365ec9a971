#pragma once

// Homogeneous 2-D transforms in the two roles used throughout the pipeline.
//
// An *affine* matrix drives image resampling in the normalized flow-field
// convention (output pixel -> source sample, coordinates in [-1, 1] with
// pixel-center alignment, x along columns first). A *coordinate* matrix maps
// pixel coordinates (row, col) of a source plane to where that pixel lands.
// The two are related by the translation conversion laws implemented in
// affine_to_coord / coord_to_affine.

#include <array>
#include <cstddef>
#include <numbers>

namespace ddreg {

enum class Role { Affine, Coord };

const char *role_name(Role role) noexcept;

struct PixelPoint {
    double row = 0.0;
    double col = 0.0;
};

// Parametric similarity transform. Content is first shifted by (dx, dy)
// and then rotated/scaled about the image centroid. Positive theta turns
// the content clockwise on screen (rows grow downward).
struct TransformParams {
    double theta = 0.0; // radians
    double scale = 1.0;
    double dx = 0.0; // along columns, pixels
    double dy = 0.0; // along rows, pixels
    int side = 2;

    void validate() const;
};

class Mat3 {
  public:
    Mat3() : Mat3(Role::Affine, 2) {}
    Mat3(Role role, int side);
    Mat3(Role role, int side, const std::array<double, 9> &m);

    static Mat3 identity(Role role, int side) { return Mat3(role, side); }

    double operator()(int r, int c) const { return m_[static_cast<std::size_t>(r * 3 + c)]; }
    double &operator()(int r, int c) { return m_[static_cast<std::size_t>(r * 3 + c)]; }

    Role role() const noexcept { return role_; }
    int side() const noexcept { return side_; }
    const std::array<double, 9> &data() const noexcept { return m_; }

    // Applies the upper 2x3 block to (row, col). Only meaningful for Coord.
    PixelPoint apply(PixelPoint p) const;

  private:
    std::array<double, 9> m_;
    Role role_;
    int side_;
};

Mat3 multiply(const Mat3 &a, const Mat3 &b);
Mat3 inverse(const Mat3 &m);
double max_abs_diff(const Mat3 &a, const Mat3 &b);

Mat3 build_affine(const TransformParams &p);
Mat3 build_coord(const TransformParams &p);

Mat3 affine_to_coord(const Mat3 &m);
Mat3 coord_to_affine(const Mat3 &m);

// Matrix taking the moving plane onto the fixed plane, given the matrices
// that produced each plane from a common base image. Role is preserved.
Mat3 compose_moving_to_fixed(const Mat3 &moving, const Mat3 &fixed);

TransformParams decompose_params(const Mat3 &m);

// Parameters of the transform that undoes `p` (same side).
TransformParams inverse_params(const TransformParams &p);

double wrap_angle(double rad) noexcept; // to (-pi, pi]
constexpr double deg2rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }
constexpr double rad2deg(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }

} // namespace ddreg
