#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "ddreg/raster.hpp"
#include "ddreg/xform.hpp"

namespace testutil {

// Scratch directory under the build tree (or /tmp when run by hand).
inline std::filesystem::path scratch(const std::string &name) {
    const char *root = std::getenv("DDREG_TEST_TMP");
    std::filesystem::path dir = std::filesystem::path(root ? root : "/tmp/ddreg_test") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Where the resampler reads from for output pixel (row, col), written from
// the flow-field definition: normalized x = (col - (L-1)/2) / (L/2), x first.
inline ddreg::PixelPoint flow_source(const ddreg::Mat3 &a, double row, double col) {
    const double L = a.side();
    const double x = (col - (L - 1) / 2) / (L / 2);
    const double y = (row - (L - 1) / 2) / (L / 2);
    const double xs = a(0, 0) * x + a(0, 1) * y + a(0, 2);
    const double ys = a(1, 0) * x + a(1, 1) * y + a(1, 2);
    return {ys * (L / 2) + (L - 1) / 2, xs * (L / 2) + (L - 1) / 2};
}

// Raster whose value is the flat pixel index, so a nearest-neighbor warp
// records where every output pixel was fetched from.
inline ddreg::Raster index_raster(int side) {
    ddreg::Raster r(side, side);
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) r.at(i, j) = static_cast<float>(i * side + j);
    }
    return r;
}

} // namespace testutil
