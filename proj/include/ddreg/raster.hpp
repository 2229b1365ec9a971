#pragma once

#include <array>
#include <span>
#include <vector>

#include "ddreg/xform.hpp"

namespace ddreg {

// Single-channel float image, row-major.
class Raster {
  public:
    Raster() = default;
    Raster(int height, int width, float fill = 0.0f);
    Raster(int height, int width, std::vector<float> data);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool empty() const noexcept { return data_.empty(); }
    bool square() const noexcept { return height_ == width_; }

    float at(int row, int col) const { return data_[index(row, col)]; }
    float &at(int row, int col) { return data_[index(row, col)]; }

    std::span<const float> values() const noexcept { return data_; }
    std::span<float> values() noexcept { return data_; }

    // Declared intensity range, [-1, 1] after normalize().
    std::array<double, 2> value_range{0.0, 1.0};

    bool operator==(const Raster &other) const {
        return height_ == other.height_ && width_ == other.width_ && data_ == other.data_;
    }

  private:
    size_t index(int row, int col) const {
        return static_cast<size_t>(row) * static_cast<size_t>(width_) + static_cast<size_t>(col);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
};

enum class Interp { Nearest, Bilinear };

struct NormalizeResult {
    Raster raster;
    bool constant_image = false; // degenerate input; raster is all zeros
};

// Piecewise-linear map: lo_pct percentile -> -1, hi_pct percentile -> +1,
// clamped outside. Percentiles use linear interpolation between order stats.
NormalizeResult normalize(const Raster &r, double lo_pct = 0.5, double hi_pct = 99.5);

double percentile(std::span<const float> values, double pct);

Raster warp_parametric(const Raster &r, const TransformParams &p, Interp interp = Interp::Bilinear,
                       float fill = 0.0f);
Raster warp_by_affine(const Raster &r, const Mat3 &m, Interp interp = Interp::Bilinear,
                      float fill = 0.0f);

// Samples `r` at a continuous (row, col); out-of-image taps read `fill`.
float sample(const Raster &r, double row, double col, Interp interp, float fill);

Raster center_crop(const Raster &r, int out_side);

// Channel mean of an interleaved multi-channel buffer.
Raster channel_mean(int height, int width, int channels, std::span<const float> interleaved);

} // namespace ddreg
