#include "ddreg/raster.hpp"

#include <algorithm>
#include <cmath>

#include "ddreg/error.hpp"

namespace ddreg {

namespace {

constexpr double kSnap = 1e-9;

double snap(double v) {
    const double r = std::nearbyint(v);
    return std::abs(v - r) < kSnap ? r : v;
}

void require_square_side(const Raster &r, int side) {
    if (!r.square() || r.height() != side) {
        throw Error(Errc::SizeMismatch, "raster is " + std::to_string(r.height()) + "x" +
                                            std::to_string(r.width()) + ", transform expects side " +
                                            std::to_string(side));
    }
}

float tap(const Raster &r, long row, long col, float fill) {
    if (row < 0 || col < 0 || row >= r.height() || col >= r.width()) {
        return fill;
    }
    return r.at(static_cast<int>(row), static_cast<int>(col));
}

} // namespace

Raster::Raster(int height, int width, float fill)
    : height_(height), width_(width),
      data_(static_cast<size_t>(std::max(height, 0)) * static_cast<size_t>(std::max(width, 0)), fill) {
    if (height < 0 || width < 0) {
        throw Error(Errc::SizeMismatch, "negative raster dimensions");
    }
}

Raster::Raster(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (height < 0 || width < 0 ||
        data_.size() != static_cast<size_t>(height) * static_cast<size_t>(width)) {
        throw Error(Errc::SizeMismatch, "raster buffer does not match its dimensions");
    }
}

double percentile(std::span<const float> values, double pct) {
    if (values.empty()) {
        throw Error(Errc::SizeMismatch, "percentile of empty set");
    }
    std::vector<float> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[hi]) - sorted[lo]);
}

NormalizeResult normalize(const Raster &r, double lo_pct, double hi_pct) {
    if (r.empty()) {
        throw Error(Errc::SizeMismatch, "cannot normalize an empty raster");
    }
    if (!(lo_pct >= 0.0 && hi_pct <= 100.0 && lo_pct < hi_pct)) {
        throw Error(Errc::InvalidParam, "percentiles must satisfy 0 <= lo < hi <= 100");
    }
    for (float v : r.values()) {
        if (!std::isfinite(v)) {
            throw Error(Errc::InvalidParam, "raster contains non-finite values");
        }
    }
    NormalizeResult out{Raster(r.height(), r.width()), false};
    out.raster.value_range = {-1.0, 1.0};
    const double lo = percentile(r.values(), lo_pct);
    const double hi = percentile(r.values(), hi_pct);
    if (!(hi > lo)) {
        out.constant_image = true;
        return out;
    }
    const double gain = 2.0 / (hi - lo);
    auto dst = out.raster.values();
    auto src = r.values();
    for (size_t k = 0; k < src.size(); ++k) {
        dst[k] = static_cast<float>(std::clamp(-1.0 + (src[k] - lo) * gain, -1.0, 1.0));
    }
    return out;
}

float sample(const Raster &r, double row, double col, Interp interp, float fill) {
    row = snap(row);
    col = snap(col);
    if (interp == Interp::Nearest) {
        return tap(r, std::lrint(row), std::lrint(col), fill);
    }
    const double r0 = std::floor(row);
    const double c0 = std::floor(col);
    const double fr = row - r0;
    const double fc = col - c0;
    const auto ir = static_cast<long>(r0);
    const auto ic = static_cast<long>(c0);
    if (fr == 0.0 && fc == 0.0) {
        return tap(r, ir, ic, fill);
    }
    const double v00 = tap(r, ir, ic, fill);
    const double v01 = tap(r, ir, ic + 1, fill);
    const double v10 = tap(r, ir + 1, ic, fill);
    const double v11 = tap(r, ir + 1, ic + 1, fill);
    const double top = v00 + fc * (v01 - v00);
    const double bottom = v10 + fc * (v11 - v10);
    return static_cast<float>(top + fr * (bottom - top));
}

Raster warp_parametric(const Raster &r, const TransformParams &p, Interp interp, float fill) {
    p.validate();
    require_square_side(r, p.side);
    // Pull each output pixel back through the inverse coordinate map.
    const Mat3 back = inverse(build_coord(p));
    Raster out(r.height(), r.width(), fill);
    out.value_range = r.value_range;
    for (int row = 0; row < r.height(); ++row) {
        for (int col = 0; col < r.width(); ++col) {
            const PixelPoint src = back.apply({static_cast<double>(row), static_cast<double>(col)});
            out.at(row, col) = sample(r, src.row, src.col, interp, fill);
        }
    }
    return out;
}

Raster warp_by_affine(const Raster &r, const Mat3 &m, Interp interp, float fill) {
    if (m.role() != Role::Affine) {
        throw Error(Errc::RoleMismatch, "warp_by_affine needs an affine matrix");
    }
    require_square_side(r, m.side());
    const double half = 0.5 * r.width();
    const double center = 0.5 * (r.width() - 1);
    Raster out(r.height(), r.width(), fill);
    out.value_range = r.value_range;
    for (int row = 0; row < r.height(); ++row) {
        const double y = (row - center) / half;
        for (int col = 0; col < r.width(); ++col) {
            const double x = (col - center) / half;
            const double xs = m(0, 0) * x + m(0, 1) * y + m(0, 2);
            const double ys = m(1, 0) * x + m(1, 1) * y + m(1, 2);
            out.at(row, col) = sample(r, ys * half + center, xs * half + center, interp, fill);
        }
    }
    return out;
}

Raster center_crop(const Raster &r, int out_side) {
    if (out_side < 0 || out_side > r.height() || out_side > r.width()) {
        throw Error(Errc::SizeMismatch, "crop of " + std::to_string(out_side) + " exceeds raster");
    }
    const int top = (r.height() - out_side) / 2;
    const int left = (r.width() - out_side) / 2;
    Raster out(out_side, out_side);
    out.value_range = r.value_range;
    for (int row = 0; row < out_side; ++row) {
        for (int col = 0; col < out_side; ++col) {
            out.at(row, col) = r.at(row + top, col + left);
        }
    }
    return out;
}

Raster channel_mean(int height, int width, int channels, std::span<const float> interleaved) {
    if (channels < 1 ||
        interleaved.size() != static_cast<size_t>(height) * static_cast<size_t>(width) * static_cast<size_t>(channels)) {
        throw Error(Errc::SizeMismatch, "interleaved buffer does not match dimensions");
    }
    Raster out(height, width);
    auto dst = out.values();
    for (size_t k = 0; k < dst.size(); ++k) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
            acc += interleaved[k * static_cast<size_t>(channels) + static_cast<size_t>(c)];
        }
        dst[k] = static_cast<float>(acc / channels);
    }
    return out;
}

} // namespace ddreg
