#include "ddreg/xform.hpp"

#include <cmath>
#include <string>

#include "ddreg/error.hpp"

namespace ddreg {

namespace {

constexpr double kSingularDet = 1e-12;
constexpr double kSimilarityTol = 1e-6;

void require_finite(double v, const char *name) {
    if (!std::isfinite(v)) {
        throw Error(Errc::InvalidParam, std::string(name) + " is not finite");
    }
}

void require_same(const Mat3 &a, const Mat3 &b) {
    if (a.role() != b.role()) {
        throw Error(Errc::RoleMismatch, std::string("cannot combine ") + role_name(a.role()) +
                                            " with " + role_name(b.role()));
    }
    if (a.side() != b.side()) {
        throw Error(Errc::SizeMismatch, "matrices built for different image sides");
    }
}

void require_role(const Mat3 &m, Role role) {
    if (m.role() != role) {
        throw Error(Errc::RoleMismatch,
                    std::string("expected ") + role_name(role) + " matrix, got " + role_name(m.role()));
    }
}

double block_det(const Mat3 &m) { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

struct Similarity {
    double cos_t; // unit-length rotation part
    double sin_t;
    double norm; // hypot of the first row of the 2x2 block
};

// Reads the rotation/scale out of a [[a, b], [-b, a]] block.
Similarity read_similarity(const Mat3 &m) {
    if (std::abs(block_det(m)) < kSingularDet) {
        throw Error(Errc::SingularTransform, "2x2 block is singular");
    }
    const double a = 0.5 * (m(0, 0) + m(1, 1));
    const double b = 0.5 * (m(0, 1) - m(1, 0));
    const double norm = std::hypot(a, b);
    const double tol = kSimilarityTol * std::max(1.0, norm);
    if (std::abs(m(0, 0) - m(1, 1)) > tol || std::abs(m(0, 1) + m(1, 0)) > tol ||
        m(2, 0) != 0.0 || m(2, 1) != 0.0 || m(2, 2) != 1.0) {
        throw Error(Errc::NotSimilarity, "matrix is not a rotation/isotropic-scale transform");
    }
    return {a / norm, b / norm, norm};
}

double half_span(int side) { return 0.5 * (side - 1); }

} // namespace

const char *role_name(Role role) noexcept { return role == Role::Affine ? "affine" : "coord"; }

void TransformParams::validate() const {
    require_finite(theta, "theta");
    require_finite(scale, "scale");
    require_finite(dx, "dx");
    require_finite(dy, "dy");
    if (!(scale > 0.0)) {
        throw Error(Errc::InvalidParam, "scale must be positive");
    }
    if (side < 2) {
        throw Error(Errc::InvalidParam, "side must be at least 2");
    }
}

Mat3::Mat3(Role role, int side) : m_{1, 0, 0, 0, 1, 0, 0, 0, 1}, role_(role), side_(side) {}

Mat3::Mat3(Role role, int side, const std::array<double, 9> &m) : m_(m), role_(role), side_(side) {}

PixelPoint Mat3::apply(PixelPoint p) const {
    return {m_[0] * p.row + m_[1] * p.col + m_[2], m_[3] * p.row + m_[4] * p.col + m_[5]};
}

Mat3 multiply(const Mat3 &a, const Mat3 &b) {
    require_same(a, b);
    Mat3 out(a.role(), a.side());
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) {
                acc += a(r, k) * b(k, c);
            }
            out(r, c) = acc;
        }
    }
    // Keep the homogeneous row exact.
    out(2, 0) = 0.0;
    out(2, 1) = 0.0;
    out(2, 2) = 1.0;
    return out;
}

Mat3 inverse(const Mat3 &m) {
    const double det = block_det(m);
    if (std::abs(det) < kSingularDet) {
        throw Error(Errc::SingularTransform, "matrix is not invertible");
    }
    const double i00 = m(1, 1) / det;
    const double i01 = -m(0, 1) / det;
    const double i10 = -m(1, 0) / det;
    const double i11 = m(0, 0) / det;
    const double t0 = -(i00 * m(0, 2) + i01 * m(1, 2));
    const double t1 = -(i10 * m(0, 2) + i11 * m(1, 2));
    return Mat3(m.role(), m.side(), {i00, i01, t0, i10, i11, t1, 0, 0, 1});
}

double max_abs_diff(const Mat3 &a, const Mat3 &b) {
    double worst = 0.0;
    for (size_t k = 0; k < 9; ++k) {
        worst = std::max(worst, std::abs(a.data()[k] - b.data()[k]));
    }
    return worst;
}

Mat3 build_affine(const TransformParams &p) {
    p.validate();
    const double c = std::cos(p.theta) / p.scale;
    const double s = std::sin(p.theta) / p.scale;
    const double half = 0.5 * p.side;
    // Translation is applied outside the rotation in normalized units and with
    // the sign flipped: the flow field samples where content came from.
    return Mat3(Role::Affine, p.side, {c, s, -p.dx / half, -s, c, -p.dy / half, 0, 0, 1});
}

Mat3 build_coord(const TransformParams &p) {
    p.validate();
    const double c = p.scale * std::cos(p.theta);
    const double s = p.scale * std::sin(p.theta);
    const double h = half_span(p.side);
    // T(+h) * sR * T(-h) * T(dy, dx); coordinate order is (row, col).
    const double r0 = p.dy - h;
    const double r1 = p.dx - h;
    return Mat3(Role::Coord, p.side, {c, s, c * r0 + s * r1 + h, -s, c, -s * r0 + c * r1 + h, 0, 0, 1});
}

Mat3 affine_to_coord(const Mat3 &m) {
    require_role(m, Role::Affine);
    const Similarity sim = read_similarity(m);
    const double s = 1.0 / sim.norm;
    const double ct = sim.cos_t;
    const double st = sim.sin_t;
    const double L = m.side();
    const double h = half_span(m.side());
    const double tax = m(0, 2);
    const double tay = m(1, 2);

    const double tcx =
        (-h * (ct + st) - 0.5 * L * (tay * ct + tax * st) + h) * s + h * (1.0 - s);
    const double tcy =
        (-h * (ct - st) + 0.5 * L * (tay * st - tax * ct) + h) * s + h * (1.0 - s);

    return Mat3(Role::Coord, m.side(), {s * ct, s * st, tcx, -s * st, s * ct, tcy, 0, 0, 1});
}

Mat3 coord_to_affine(const Mat3 &m) {
    require_role(m, Role::Coord);
    const Similarity sim = read_similarity(m);
    const double s = sim.norm;
    const double ct = sim.cos_t;
    const double st = sim.sin_t;
    const double L = m.side();
    const double h = half_span(m.side());
    const double ux = (m(0, 2) - h * (1.0 - s)) / s;
    const double uy = (m(1, 2) - h * (1.0 - s)) / s;

    const double tax = (L - 1.0) / L * (ct + st - 1.0) - 2.0 / L * (ux * st + uy * ct);
    const double tay = (L - 1.0) / L * (ct - st - 1.0) - 2.0 / L * (ux * ct - uy * st);

    return Mat3(Role::Affine, m.side(), {ct / s, st / s, tax, -st / s, ct / s, tay, 0, 0, 1});
}

Mat3 compose_moving_to_fixed(const Mat3 &moving, const Mat3 &fixed) {
    require_same(moving, fixed);
    if (moving.role() == Role::Affine) {
        // Sampling matrices compose on the right: warp(warp(I, Mm), G) = warp(I, Mm*G).
        return multiply(inverse(moving), fixed);
    }
    return multiply(fixed, inverse(moving));
}

TransformParams decompose_params(const Mat3 &m) {
    const Similarity sim = read_similarity(m);
    TransformParams p;
    p.side = m.side();
    p.theta = std::atan2(sim.sin_t, sim.cos_t);
    if (m.role() == Role::Affine) {
        p.scale = 1.0 / sim.norm;
        const double half = 0.5 * m.side();
        p.dx = -m(0, 2) * half;
        p.dy = -m(1, 2) * half;
    } else {
        p.scale = sim.norm;
        const double h = half_span(m.side());
        const double e0 = m(0, 2) - h;
        const double e1 = m(1, 2) - h;
        // (dy, dx) = h + R^T (t - h) / s
        p.dy = h + (sim.cos_t * e0 - sim.sin_t * e1) / p.scale;
        p.dx = h + (sim.sin_t * e0 + sim.cos_t * e1) / p.scale;
    }
    return p;
}

TransformParams inverse_params(const TransformParams &p) {
    return decompose_params(inverse(build_affine(p)));
}

double wrap_angle(double rad) noexcept {
    double a = std::remainder(rad, 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi) {
        a += 2.0 * std::numbers::pi;
    }
    return a;
}

} // namespace ddreg
