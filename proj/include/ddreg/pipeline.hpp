#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ddreg/error.hpp"
#include "ddreg/evalloss.hpp"
#include "ddreg/normmatch.hpp"
#include "ddreg/solve.hpp"

namespace ddreg {

struct PipelineConfig {
    double coarse_tau = 0.15;
    double fine_tau = 0.25;
    double temperature = 1.0;
    int sinkhorn_iters = 100;
    double sinkhorn_eps = 1.0;
    bool z_filter = true;
    double z_k = 3.5;
    ZMode z_mode = ZMode::Robust;
    double z_min_dev_deg = 1.0;
    // When set, both levels select on raw logits > threshold instead of
    // normalized confidence > tau.
    std::optional<double> score_threshold;
    FitOptions fit;
    std::vector<double> edges = default_edges();

    void validate() const;
};

struct Intermediates {
    MatchMap coarse; // dual-softmax confidence + raw cos/sin
    MatchMap fine;   // Sinkhorn confidence + raw refinements
    BoolPlane coarse_selected;
    AngleFilterResult angles;
    FilterMask filter;
    CorrespondenceSet correspondences;
};

struct CaseResult {
    EvalRecord record;
    std::optional<RigidFit> fit;
    std::optional<Errc> failure; // NoMatches, NotEnoughMatches or DegenerateGeometry
    Intermediates inter;
};

// Normalize -> threshold -> angle filter -> expand -> extract -> fit -> evaluate.
CaseResult register_case(const std::string &case_id, const MatcherOutput &scores, const Mat3 &gt_affine,
                         const PipelineConfig &cfg);

} // namespace ddreg
