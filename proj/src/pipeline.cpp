#include "ddreg/pipeline.hpp"

namespace ddreg {

void PipelineConfig::validate() const {
    if (!(coarse_tau >= 0.0 && coarse_tau < 1.0) || !(fine_tau >= 0.0 && fine_tau < 1.0)) {
        throw Error(Errc::InvalidThreshold, "confidence thresholds must lie in [0, 1)");
    }
    if (!(temperature > 0.0) || sinkhorn_iters < 1 || !(sinkhorn_eps > 0.0) || !(z_k > 0.0) || !(z_min_dev_deg >= 0.0)) {
        throw Error(Errc::InvalidParam, "normalizer and filter parameters must be positive");
    }
    if (edges.size() < 2) {
        throw Error(Errc::InvalidParam, "need at least two bucket edges");
    }
}

CaseResult register_case(const std::string &case_id, const MatcherOutput &scores, const Mat3 &gt_affine,
                         const PipelineConfig &cfg) {
    cfg.validate();
    const int side = scores.coarse.side;
    CaseResult res;
    Intermediates &in = res.inter;

    in.coarse = scores.coarse;
    in.coarse.level = MapLevel::Coarse;
    in.coarse.conf = dual_softmax(scores.coarse.conf, cfg.temperature);
    in.fine = scores.fine;
    in.fine.level = MapLevel::Fine;
    in.fine.conf = sinkhorn(scores.fine.conf, cfg.sinkhorn_iters, cfg.sinkhorn_eps);

    in.coarse_selected = cfg.score_threshold ? threshold_scores(scores.coarse.conf, *cfg.score_threshold)
                                             : threshold_select(in.coarse, cfg.coarse_tau);

    const std::vector<AnglePixel> px = selected_angles(in.coarse, in.coarse_selected);
    if (cfg.z_filter) {
        in.angles = zscore_angle_filter(px, cfg.z_k, cfg.z_mode, cfg.z_min_dev_deg);
    } else {
        in.angles.kept = px;
        in.angles.pass_through = true;
    }
    const BoolPlane coarse_pass = pixels_to_plane(in.angles.kept, in.coarse.conf.rows, in.coarse.conf.cols);
    in.filter = expand_coarse_filter(coarse_pass, in.coarse.grid);

    if (cfg.score_threshold) {
        const BoolPlane fine_sel = threshold_scores(scores.fine.conf, *cfg.score_threshold);
        for (size_t k = 0; k < in.filter.v.size(); ++k) in.filter.v[k] &= fine_sel.v[k];
        in.correspondences = extract_correspondences(in.fine, in.filter, 0.0);
    } else {
        in.correspondences = extract_correspondences(in.fine, in.filter, cfg.fine_tau);
    }

    const int n = static_cast<int>(in.correspondences.size());
    if (n == 0) {
        res.failure = Errc::NoMatches;
        res.record = failed_record(case_id, gt_affine, cfg.edges);
        return res;
    }
    try {
        res.fit = fit_rigid(in.correspondences, cfg.fit);
    } catch (const Error &e) {
        if (e.code() != Errc::NotEnoughMatches && e.code() != Errc::DegenerateGeometry) throw;
        res.failure = e.code();
        res.record = failed_record(case_id, gt_affine, cfg.edges);
        res.record.n_matches = n;
        return res;
    }
    const Mat3 pred = fit_to_matrices(*res.fit, side).affine;
    res.record = make_record(case_id, gt_affine, pred, side, n, cfg.edges);
    return res;
}

} // namespace ddreg
