#include "ddreg/solve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

#include "ddreg/error.hpp"

namespace ddreg {

namespace {

struct Core {
    double theta, t_row, t_col;
};

Core procrustes(std::span<const Correspondence> pts, bool weighted) {
    double sw = 0.0;
    double mr = 0.0, mc = 0.0, fr = 0.0, fc = 0.0;
    for (const Correspondence &p : pts) {
        const double w = weighted ? p.weight : 1.0;
        sw += w;
        mr += w * p.moving.row;
        mc += w * p.moving.col;
        fr += w * p.fixed.row;
        fc += w * p.fixed.col;
    }
    if (!(sw > 0.0)) {
        throw Error(Errc::InvalidParam, "weights must be positive");
    }
    mr /= sw;
    mc /= sw;
    fr /= sw;
    fc /= sw;

    double dot = 0.0;
    double cross = 0.0;
    double spread = 0.0;
    for (const Correspondence &p : pts) {
        const double w = weighted ? p.weight : 1.0;
        const double x0 = p.moving.row - mr;
        const double x1 = p.moving.col - mc;
        const double y0 = p.fixed.row - fr;
        const double y1 = p.fixed.col - fc;
        dot += w * (x0 * y0 + x1 * y1);
        cross += w * (y0 * x1 - y1 * x0);
        spread += w * (x0 * x0 + x1 * x1);
    }
    if (spread <= 1e-18 * sw) {
        throw Error(Errc::DegenerateGeometry, "all moving points coincide");
    }
    const double theta = std::atan2(cross, dot);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {theta, fr - (c * mr + s * mc), fc - (-s * mr + c * mc)};
}

double residual(const Core &k, const Correspondence &p) {
    const double c = std::cos(k.theta);
    const double s = std::sin(k.theta);
    const double er = c * p.moving.row + s * p.moving.col + k.t_row - p.fixed.row;
    const double ec = -s * p.moving.row + c * p.moving.col + k.t_col - p.fixed.col;
    return std::hypot(er, ec);
}

std::vector<Correspondence> ransac_inliers(const CorrespondenceSet &c, const FitOptions &opts) {
    Rng rng(opts.ransac_seed);
    std::uniform_int_distribution<size_t> pick(0, c.size() - 1);
    std::vector<Correspondence> best;
    for (int it = 0; it < opts.ransac_iters; ++it) {
        const size_t a = pick(rng);
        const size_t b = pick(rng);
        if (a == b) continue;
        const Correspondence pair[2] = {c.items[a], c.items[b]};
        Core k;
        try {
            k = procrustes(pair, false);
        } catch (const Error &) {
            continue;
        }
        std::vector<Correspondence> in;
        for (const Correspondence &p : c.items) {
            if (residual(k, p) <= opts.ransac_inlier_px) in.push_back(p);
        }
        if (in.size() > best.size()) best = std::move(in);
    }
    return best.size() >= 2 ? best : c.items;
}

} // namespace

RigidFit fit_rigid(const CorrespondenceSet &c, const FitOptions &opts) {
    if (c.size() < 2) {
        throw Error(Errc::NotEnoughMatches, "need at least 2 correspondences, got " + std::to_string(c.size()));
    }
    const std::vector<Correspondence> used = opts.ransac ? ransac_inliers(c, opts) : c.items;
    const Core k = procrustes(used, opts.weighted);

    RigidFit fit;
    fit.theta = k.theta;
    fit.t_row = k.t_row;
    fit.t_col = k.t_col;
    fit.n_used = static_cast<int>(used.size());
    fit.side = c.side;
    double ss = 0.0;
    for (const Correspondence &p : used) {
        const double r = residual(k, p);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / static_cast<double>(used.size()));
    if (c.side > 0) {
        fit.params = decompose_params(fit_to_matrices(fit, c.side).coord);
    } else {
        fit.params.theta = k.theta;
    }
    return fit;
}

FitMatrices fit_to_matrices(const RigidFit &fit, int side) {
    const double c = std::cos(fit.theta);
    const double s = std::sin(fit.theta);
    const Mat3 coord(Role::Coord, side, {c, s, fit.t_row, -s, c, fit.t_col, 0.0, 0.0, 1.0});
    return {coord, coord_to_affine(coord)};
}

} // namespace ddreg
