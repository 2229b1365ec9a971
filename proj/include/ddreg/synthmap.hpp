#pragma once

#include <cstdint>
#include <vector>

#include "ddreg/match_map.hpp"
#include "ddreg/raster.hpp"
#include "ddreg/rng.hpp"
#include "ddreg/xform.hpp"

namespace ddreg {

struct SynthConfig {
    int src_side = 512;
    int out_side = 256;
    double theta_min_deg = -45.0;
    double theta_max_deg = 45.0;
    double trans_range = 32.0; // +/- pixels, both axes
    int coarse_grid = 8;
    int fine_grid = 16;
    double coarse_thresh = 0.0;
    double fine_thresh = 0.25;
    std::uint64_t seed = 0;

    // Structural invariants; throws InvalidParam.
    void validate() const;
    // Throws OutOfSupport when a crop corner could sample outside the source.
    void check_support() const;
};

struct GtMaps {
    MatchMap coarse;
    MatchMap fine;
    std::vector<int> cand_moving_coarse;
    std::vector<int> cand_fixed_coarse;
    std::vector<int> cand_moving_fine;
    std::vector<int> cand_fixed_fine;
};

struct SynthPair {
    Raster moving;
    Raster fixed;
    Raster mask_moving;
    Raster mask_fixed;
    TransformParams params_moving;
    TransformParams params_fixed;
    Mat3 gt_affine;            // moving -> fixed, built for out_side
    TransformParams gt_params; // decomposition of gt_affine
    GtMaps gt;
};

// Cells (row-major on grid x grid) whose patch mean exceeds `thresh`.
std::vector<int> candidate_patches(const Raster &mask, int grid, double thresh);

// One hierarchy of ground truth: moving candidate i matches fixed candidate
// j when the center of cell i, mapped by `coord`, falls inside cell j. Cells
// are half-open on the low side so refinements land in (-0.5, 0.5].
MatchMap match_level(const Mat3 &coord, const std::vector<int> &cand_moving,
                     const std::vector<int> &cand_fixed, int grid, MapLevel level, double theta);

GtMaps build_gt_maps(const Mat3 &gt_affine, const Raster &mask_moving, const Raster &mask_fixed,
                     const SynthConfig &cfg);

SynthPair synth_pair(const Raster &bright, const Raster &mask, const SynthConfig &cfg, Rng &rng);

// Procedural stand-in for an aligned brightfield image and its nucleus mask.
struct Phantom {
    Raster bright;
    Raster mask;
};

Phantom make_phantom(int side, Rng &rng, int n_cells = 70);

// True when some fixed or moving cell takes part in more than one positive.
bool has_one_to_multi(const MatchMap &gt);

} // namespace ddreg
