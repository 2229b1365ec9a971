#include "ddreg/evalloss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ddreg/error.hpp"

namespace ddreg {

namespace {

constexpr double kClamp = 1.0 - 1e-7;

double clamp_gap(double d) { return std::clamp(d, -kClamp, kClamp); }

void require_shape(const Plane &a, const Plane &b) {
    if (!a.same_shape(b)) {
        throw Error(Errc::SizeMismatch, "prediction and ground truth differ in shape");
    }
}

void require_edges(const std::vector<double> &edges) {
    if (edges.size() < 2) {
        throw Error(Errc::InvalidParam, "need at least two bucket edges");
    }
    for (size_t k = 1; k < edges.size(); ++k) {
        if (!(edges[k] > edges[k - 1])) {
            throw Error(Errc::InvalidParam, "bucket edges must be strictly increasing");
        }
    }
}

} // namespace

void LossWeights::validate() const {
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && aux >= 0.0)) {
        throw Error(Errc::InvalidParam, "loss weights must be non-negative");
    }
}

BoolPlane coarse_enhance_mask(const MatchMap &gt_coarse, const std::vector<int> &cand_moving,
                              const std::vector<int> &cand_fixed) {
    BoolPlane out(gt_coarse.conf.rows, gt_coarse.conf.cols);
    for (int i : cand_moving) {
        for (int j : cand_fixed) {
            if (!(gt_coarse.conf(i, j) > 0.0)) out.set(i, j, true);
        }
    }
    return out;
}

BoolPlane fine_enhance_mask(const MatchMap &gt_coarse, const MatchMap &gt_fine) {
    if (gt_fine.grid != 2 * gt_coarse.grid) {
        throw Error(Errc::SizeMismatch, "fine map must be on twice the coarse grid");
    }
    BoolPlane out(gt_fine.conf.rows, gt_fine.conf.cols);
    const int fg = gt_fine.grid;
    for (int u = 0; u < out.rows; ++u) {
        const int pu = parent_cell(u, fg);
        for (int v = 0; v < out.cols; ++v) {
            if (gt_coarse.conf(pu, parent_cell(v, fg)) > 0.0 && !(gt_fine.conf(u, v) > 0.0)) {
                out.set(u, v, true);
            }
        }
    }
    return out;
}

ConfLoss conf_loss(const Plane &pred, const Plane &gt, const BoolPlane &enhance) {
    require_shape(pred, gt);
    if (enhance.rows != gt.rows || enhance.cols != gt.cols) {
        throw Error(Errc::SizeMismatch, "enhance mask differs in shape");
    }
    ConfLoss out;
    double pos = 0.0, neg1 = 0.0, neg2 = 0.0;
    size_t n_pos = 0, n_neg1 = 0, n_neg2 = 0;
    for (size_t k = 0; k < gt.v.size(); ++k) {
        if (gt.v[k] > 0.0) {
            const double d = clamp_gap(pred.v[k] - gt.v[k]);
            pos += -std::log1p(d) - std::log1p(-d);
            ++n_pos;
        } else {
            const double term = -std::log1p(-std::min(pred.v[k], kClamp));
            if (enhance.v[k]) {
                neg1 += term;
                ++n_neg1;
            } else {
                neg2 += term;
                ++n_neg2;
            }
        }
    }
    out.no_positives = n_pos == 0;
    out.pos = n_pos ? pos / static_cast<double>(n_pos) : 0.0;
    out.neg1 = n_neg1 ? neg1 / static_cast<double>(n_neg1) : 0.0;
    out.neg2 = n_neg2 ? neg2 / static_cast<double>(n_neg2) : 0.0;
    return out;
}

double aux_mse(const MatchMap &pred, const MatchMap &gt) {
    require_shape(pred.conf, gt.conf);
    double acc = 0.0;
    size_t n = 0;
    for (size_t k = 0; k < gt.conf.v.size(); ++k) {
        if (!(gt.conf.v[k] > 0.0)) continue;
        const double a = pred.aux1.v[k] - gt.aux1.v[k];
        const double b = pred.aux2.v[k] - gt.aux2.v[k];
        acc += 0.5 * (a * a + b * b);
        ++n;
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

LossBreakdown total_loss(const MatchMap &pred_coarse, const MatchMap &gt_coarse, const BoolPlane &enhance_coarse,
                         const MatchMap &pred_fine, const MatchMap &gt_fine, const BoolPlane &enhance_fine,
                         const LossConfig &cfg) {
    cfg.coarse.validate();
    cfg.fine.validate();
    LossBreakdown out;
    out.coarse = conf_loss(pred_coarse.conf, gt_coarse.conf, enhance_coarse);
    out.fine = conf_loss(pred_fine.conf, gt_fine.conf, enhance_fine);
    out.coarse_conf = out.coarse.pos + cfg.coarse.lambda1 * out.coarse.neg1 + cfg.coarse.lambda2 * out.coarse.neg2;
    out.fine_conf = out.fine.pos + cfg.fine.lambda1 * out.fine.neg1 + cfg.fine.lambda2 * out.fine.neg2;
    out.angle = aux_mse(pred_coarse, gt_coarse);
    out.trans = aux_mse(pred_fine, gt_fine);
    out.total = out.coarse_conf + cfg.coarse.aux * out.angle + out.fine_conf + cfg.fine.aux * out.trans;
    return out;
}

double corner_displacement(const Mat3 &gt, const Mat3 &pred, int side) {
    if (gt.role() != pred.role()) {
        throw Error(Errc::RoleMismatch, "corner displacement needs matrices of the same role");
    }
    if (gt.side() != pred.side() || gt.side() != side) {
        throw Error(Errc::SizeMismatch, "matrices were built for a different image side");
    }
    const Mat3 cg = gt.role() == Role::Coord ? gt : affine_to_coord(gt);
    const Mat3 cp = pred.role() == Role::Coord ? pred : affine_to_coord(pred);
    const double e = side - 1.0;
    const PixelPoint corners[4] = {{0.0, 0.0}, {0.0, e}, {e, 0.0}, {e, e}};
    double acc = 0.0;
    for (const PixelPoint &p : corners) {
        const PixelPoint a = cg.apply(p);
        const PixelPoint b = cp.apply(p);
        acc += std::hypot(a.row - b.row, a.col - b.col);
    }
    return acc / 4.0;
}

double angle_error_deg(const Mat3 &gt, const Mat3 &pred) {
    if (gt.role() != pred.role()) {
        throw Error(Errc::RoleMismatch, "angle error needs matrices of the same role");
    }
    return std::abs(rad2deg(wrap_angle(decompose_params(pred).theta - decompose_params(gt).theta)));
}

int bucket_of(double abs_theta_deg, const std::vector<double> &edges) {
    for (size_t k = 0; k + 1 < edges.size(); ++k) {
        if (abs_theta_deg > edges[k] && abs_theta_deg <= edges[k + 1]) return static_cast<int>(k);
    }
    return -1;
}

EvalRecord make_record(std::string case_id, const Mat3 &gt, const Mat3 &pred, int side, int n_matches,
                       const std::vector<double> &edges) {
    EvalRecord r;
    r.case_id = std::move(case_id);
    r.theta_gt_deg = rad2deg(decompose_params(gt).theta);
    r.theta_err_deg = angle_error_deg(gt, pred);
    r.corner_px = corner_displacement(gt, pred, side);
    r.corner_pct = 100.0 * r.corner_px / side;
    r.n_matches = n_matches;
    r.bucket = bucket_of(std::abs(r.theta_gt_deg), edges);
    return r;
}

EvalRecord failed_record(std::string case_id, const Mat3 &gt, const std::vector<double> &edges) {
    EvalRecord r;
    r.case_id = std::move(case_id);
    r.theta_gt_deg = rad2deg(decompose_params(gt).theta);
    r.theta_err_deg = std::numeric_limits<double>::infinity();
    r.corner_px = std::numeric_limits<double>::infinity();
    r.corner_pct = std::numeric_limits<double>::infinity();
    r.bucket = bucket_of(std::abs(r.theta_gt_deg), edges);
    r.excluded = true;
    return r;
}

double success_rate(const std::vector<EvalRecord> &records, double threshold_pct) {
    if (records.empty()) {
        throw Error(Errc::EmptyBatch, "no records to summarize");
    }
    const auto hits = std::count_if(records.begin(), records.end(),
                                    [&](const EvalRecord &r) { return r.corner_pct < threshold_pct; });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

SuccessRatios success_ratios(const std::vector<EvalRecord> &records, double max_pct) {
    SuccessRatios out;
    out.pct_under_1 = success_rate(records, 1.0);
    out.pct_under_5 = success_rate(records, 5.0);
    const int steps = static_cast<int>(std::lround(max_pct / 0.25));
    for (int k = 0; k <= steps; ++k) {
        const double t = 0.25 * k;
        out.curve.push_back({t, success_rate(records, t)});
    }
    return out;
}

const std::vector<double> &default_edges() {
    static const std::vector<double> e{0.0, 45.0, 90.0};
    return e;
}

const std::vector<double> &shg_edges() {
    static const std::vector<double> e{0.0, 20.0, 35.0, 45.0, 90.0};
    return e;
}

std::vector<BucketSummary> bucket_by_rotation(const std::vector<EvalRecord> &records,
                                              const std::vector<double> &edges) {
    require_edges(edges);
    std::vector<BucketSummary> out;
    for (size_t k = 0; k + 1 < edges.size(); ++k) {
        BucketSummary b;
        b.lo = edges[k];
        b.hi = edges[k + 1];
        std::vector<EvalRecord> in;
        for (const EvalRecord &r : records) {
            if (bucket_of(std::abs(r.theta_gt_deg), edges) == static_cast<int>(k)) in.push_back(r);
        }
        b.n = static_cast<int>(in.size());
        if (!in.empty()) {
            double ang = 0.0, corner = 0.0;
            int fitted = 0;
            for (const EvalRecord &r : in) {
                if (r.excluded) continue;
                ang += r.theta_err_deg;
                corner += r.corner_px;
                ++fitted;
            }
            if (fitted > 0) {
                b.mean_angle_err = ang / fitted;
                b.mean_corner_px = corner / fitted;
            }
            b.pct_under_1 = success_rate(in, 1.0);
            b.pct_under_5 = success_rate(in, 5.0);
        }
        out.push_back(b);
    }
    return out;
}

} // namespace ddreg
