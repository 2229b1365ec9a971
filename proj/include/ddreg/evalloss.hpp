#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ddreg/match_map.hpp"
#include "ddreg/xform.hpp"

namespace ddreg {

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossWeights {
    double lambda1 = 0.0; // enhanced negatives
    double lambda2 = 0.0; // remaining negatives
    double aux = 0.0;     // alpha (coarse angle) or beta (fine translation)

    void validate() const;
};

struct LossConfig {
    LossWeights coarse{500.0, 100.0, 20.0};
    LossWeights fine{50.0, 10.0, 20.0};
};

struct ConfLoss {
    double pos = 0.0;
    double neg1 = 0.0;
    double neg2 = 0.0;
    bool no_positives = false;
};

// Coarse: candidate pairs that are not GT positives.
BoolPlane coarse_enhance_mask(const MatchMap &gt_coarse, const std::vector<int> &cand_moving,
                              const std::vector<int> &cand_fixed);
// Fine: children of coarse positives that are not fine positives.
BoolPlane fine_enhance_mask(const MatchMap &gt_coarse, const MatchMap &gt_fine);

ConfLoss conf_loss(const Plane &pred, const Plane &gt, const BoolPlane &enhance);
inline ConfLoss coarse_conf_loss(const Plane &pred, const Plane &gt, const BoolPlane &enhance) {
    return conf_loss(pred, gt, enhance);
}

struct LossBreakdown {
    ConfLoss coarse;
    ConfLoss fine;
    double coarse_conf = 0.0; // pos + lambda1 * neg1 + lambda2 * neg2
    double fine_conf = 0.0;
    double angle = 0.0; // MSE of (cos, sin) on GT-positive coarse pixels
    double trans = 0.0; // MSE of refinements on GT-positive fine pixels
    double total = 0.0;
};

// Halved mean of squared channel differences over GT positives.
double aux_mse(const MatchMap &pred, const MatchMap &gt);

LossBreakdown total_loss(const MatchMap &pred_coarse, const MatchMap &gt_coarse, const BoolPlane &enhance_coarse,
                         const MatchMap &pred_fine, const MatchMap &gt_fine, const BoolPlane &enhance_fine,
                         const LossConfig &cfg = {});

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Mean Euclidean distance between the four corner pixel centers mapped by
// the coordinate forms of both matrices.
double corner_displacement(const Mat3 &gt, const Mat3 &pred, int side);

// |wrapped(theta_pred - theta_gt)| in degrees.
double angle_error_deg(const Mat3 &gt, const Mat3 &pred);

struct EvalRecord {
    std::string case_id;
    double theta_gt_deg = 0.0;
    double theta_err_deg = 0.0;
    double corner_px = 0.0;
    double corner_pct = 0.0;
    int n_matches = 0;
    int bucket = -1; // index into the bucket edges, -1 outside
    bool excluded = false; // no usable fit; corner_px is +inf

    bool success_1() const { return corner_pct < 1.0; }
    bool success_5() const { return corner_pct < 5.0; }
};

EvalRecord make_record(std::string case_id, const Mat3 &gt, const Mat3 &pred, int side, int n_matches,
                       const std::vector<double> &edges);
EvalRecord failed_record(std::string case_id, const Mat3 &gt, const std::vector<double> &edges);

struct CurvePoint {
    double threshold_pct = 0.0;
    double rate = 0.0;
};

struct SuccessRatios {
    double pct_under_1 = 0.0;
    double pct_under_5 = 0.0;
    std::vector<CurvePoint> curve; // 0% .. max_pct in 0.25% steps
};

// Fraction (in percent) of records with corner_pct strictly below threshold_pct.
double success_rate(const std::vector<EvalRecord> &records, double threshold_pct);

SuccessRatios success_ratios(const std::vector<EvalRecord> &records, double max_pct = 10.0);

const std::vector<double> &default_edges();
const std::vector<double> &shg_edges();

// Bucket of |theta| in degrees for half-open intervals (e_k, e_k+1].
int bucket_of(double abs_theta_deg, const std::vector<double> &edges);

struct BucketSummary {
    double lo = 0.0;
    double hi = 0.0;
    int n = 0;
    std::optional<double> mean_angle_err;
    std::optional<double> mean_corner_px; // over records with a fit
    std::optional<double> pct_under_1;
    std::optional<double> pct_under_5;
};

std::vector<BucketSummary> bucket_by_rotation(const std::vector<EvalRecord> &records,
                                              const std::vector<double> &edges);

} // namespace ddreg
