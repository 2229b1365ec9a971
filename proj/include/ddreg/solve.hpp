#pragma once

#include <cstdint>

#include "ddreg/normmatch.hpp"
#include "ddreg/xform.hpp"

namespace ddreg {

struct FitOptions {
    bool weighted = true;
    // Two-point hypothesize-and-verify before the final fit. Off unless
    // ablating the filters.
    bool ransac = false;
    int ransac_iters = 200;
    double ransac_inlier_px = 2.0;
    std::uint64_t ransac_seed = 0;
};

struct RigidFit {
    // Least-squares rotation and translation in pixel coordinates:
    // pf ~ R(theta) * pm + t, with R = [[cos, sin], [-sin, cos]] on (row, col).
    double theta = 0.0;
    double t_row = 0.0;
    double t_col = 0.0;
    TransformParams params; // same transform in centroid-rotation form, scale 1
    double residual_rms = 0.0;
    int n_used = 0;
    int side = 0;
};

RigidFit fit_rigid(const CorrespondenceSet &c, const FitOptions &opts = {});

struct FitMatrices {
    Mat3 coord;
    Mat3 affine;
};

FitMatrices fit_to_matrices(const RigidFit &fit, int side);

} // namespace ddreg
