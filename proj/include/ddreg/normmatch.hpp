#pragma once

#include <optional>
#include <vector>

#include "ddreg/match_map.hpp"
#include "ddreg/rng.hpp"
#include "ddreg/xform.hpp"

namespace ddreg {

// ---------------------------------------------------------------------------
// Normalizers
// ---------------------------------------------------------------------------

// Elementwise product of the row-wise and column-wise softmax of s / temperature.
Plane dual_softmax(const ScoreMap &s, double temperature = 1.0);

// Log-domain Sinkhorn on exp(s / epsilon) without dustbins. Rows are driven
// to unit mass and columns to rows/cols mass, so square maps become
// approximately doubly stochastic.
Plane sinkhorn(const ScoreMap &s, int iters = 100, double epsilon = 1.0);

struct NormalizerStats {
    int count_gt_pos = 0;
    int above_0_5 = 0;
    int above_0_8 = 0;
    double max = 0.0;
    double micros = 0.0; // wall time of the normalizer call
};

struct ExperimentReport {
    NormalizerStats dual_softmax;
    NormalizerStats sinkhorn;
    bool one_to_multi = false;
};

// Positives sit `margin` above the negatives, plus N(0, noise_sigma) on every entry.
ScoreMap simulated_scores(const MatchMap &gt, double margin, double noise_sigma, Rng &rng);

ExperimentReport normalizer_experiment(const MatchMap &coarse_gt, double noise_sigma, Rng &rng,
                                     double margin = 10.0);

// ---------------------------------------------------------------------------
// Filtration
// ---------------------------------------------------------------------------

// conf > tau; tau must lie in [0, 1).
BoolPlane threshold_select(const MatchMap &m, double tau);

// Pre-normalization mode: raw logit > threshold.
BoolPlane threshold_scores(const ScoreMap &s, double threshold);

struct AnglePixel {
    int moving = 0;
    int fixed = 0;
    double cos = 1.0;
    double sin = 0.0;
};

enum class ZMode { Robust, Classic };

struct AngleFilterResult {
    std::vector<AnglePixel> kept;
    std::vector<double> kept_angles; // radians, unwrapped around `center`
    std::vector<AnglePixel> removed;
    double center = 0.0; // median (Robust) or mean (Classic)
    double spread = 0.0; // MAD (Robust) or standard deviation (Classic)
    bool pass_through = false;
};

std::vector<AnglePixel> selected_angles(const MatchMap &coarse, const BoolPlane &selected);

// Pixels within min_dev_deg of the center are always kept, whatever the
// spread; a near-zero MAD would otherwise flag sub-degree jitter.
AngleFilterResult zscore_angle_filter(const std::vector<AnglePixel> &pixels, double k = 3.5,
                                      ZMode mode = ZMode::Robust, double min_dev_deg = 1.0);

// Median absolute deviation of angles about their circular-unwrapped median.
double angle_mad(const std::vector<double> &angles);

BoolPlane pixels_to_plane(const std::vector<AnglePixel> &pixels, int rows, int cols);

// Each passing coarse pair switches on its 4x4 block of child pairs.
FilterMask expand_coarse_filter(const BoolPlane &coarse, int coarse_grid);

// ---------------------------------------------------------------------------
// Correspondences
// ---------------------------------------------------------------------------

struct Correspondence {
    PixelPoint moving; // centroid of the moving fine cell
    PixelPoint fixed;  // fixed cell centroid plus refinement
    double weight = 1.0;
    int moving_cell = 0;
    int fixed_cell = 0;
};

struct CorrespondenceSet {
    int side = 0;
    std::vector<Correspondence> items;

    size_t size() const noexcept { return items.size(); }
    bool empty() const noexcept { return items.empty(); }
};

CorrespondenceSet extract_correspondences(const MatchMap &fine, const FilterMask &filter, double tau);

// ---------------------------------------------------------------------------
// Mock matcher
// ---------------------------------------------------------------------------

struct Corruption {
    double drop_rate = 0.0;     // per GT positive, independently at each level
    double spurious_rate = 0.0; // spurious pairs as a fraction of GT positives
    double jitter_sigma = 0.0;  // radians on angles, fine cells on refinements
    double score_margin = 10.0; // logit gap between kept positives and background
    double score_noise = 0.0;   // N(0, score_noise) on every logit
    std::optional<double> spurious_angle_offset_deg; // unset: uniform random angle

    void validate() const;
};

struct MatcherOutput {
    MatchMap coarse; // level Scores: logits + cos/sin
    MatchMap fine;   // level Scores: logits + refinements
};

// Stands in for the trained network: corrupts ground-truth maps into raw
// score maps. Output values are float-representable so dumped score files
// reproduce runs exactly.
MatcherOutput mock_matcher(const MatchMap &gt_coarse, const MatchMap &gt_fine, const Corruption &corruption,
                           Rng &rng);

} // namespace ddreg
