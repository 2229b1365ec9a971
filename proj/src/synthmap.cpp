#include "ddreg/synthmap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddreg/error.hpp"

namespace ddreg {

namespace {

// max of |cos t| + |sin t| over [lo, hi] (radians)
double max_swing(double lo, double hi) {
    auto swing = [](double t) { return std::abs(std::cos(t)) + std::abs(std::sin(t)); };
    double best = std::max(swing(lo), swing(hi));
    const double quarter = std::numbers::pi / 2.0;
    const double first = std::ceil((lo - quarter / 2.0) / quarter);
    for (double k = first; k * quarter + quarter / 2.0 <= hi; k += 1.0) {
        best = std::max(best, swing(k * quarter + quarter / 2.0));
    }
    return best;
}

double cell_center(int index, int cell_size) { return index * cell_size + 0.5 * (cell_size - 1); }

// Half-open on the low side: x in (k*P - 0.5, (k+1)*P - 0.5] -> k.
int cell_along(double x, int cell_size) {
    return static_cast<int>(std::ceil((x + 0.5) / cell_size)) - 1;
}

} // namespace

void SynthConfig::validate() const {
    auto fail = [](const std::string &what) { throw Error(Errc::InvalidParam, what); };
    if (src_side < 2 || out_side < 2) fail("image sides must be at least 2");
    if (out_side * 2 != src_side) fail("out_side must be half of src_side");
    if (coarse_grid <= 0 || out_side % coarse_grid != 0) fail("coarse_grid must divide out_side");
    if (fine_grid != 2 * coarse_grid) fail("fine_grid must be twice coarse_grid");
    if (out_side % fine_grid != 0) fail("fine_grid must divide out_side");
    if (!(theta_min_deg <= theta_max_deg)) fail("theta range is reversed");
    if (!(trans_range >= 0.0)) fail("trans_range must be non-negative");
    if (!std::isfinite(theta_min_deg) || !std::isfinite(theta_max_deg) || !std::isfinite(trans_range)) {
        fail("ranges must be finite");
    }
}

void SynthConfig::check_support() const {
    validate();
    const double swing = max_swing(deg2rad(theta_min_deg), deg2rad(theta_max_deg));
    const double reach = 0.5 * out_side * swing + trans_range;
    if (reach > 0.5 * src_side) {
        throw Error(Errc::OutOfSupport, "crop corners reach " + std::to_string(reach) +
                                            " px from center, source half-side is " +
                                            std::to_string(0.5 * src_side));
    }
}

std::vector<int> candidate_patches(const Raster &mask, int grid, double thresh) {
    if (!mask.square() || grid <= 0 || mask.height() % grid != 0) {
        throw Error(Errc::SizeMismatch, "grid must divide the square mask side");
    }
    const int cell = mask.height() / grid;
    std::vector<int> out;
    for (int gr = 0; gr < grid; ++gr) {
        for (int gc = 0; gc < grid; ++gc) {
            double acc = 0.0;
            for (int r = gr * cell; r < (gr + 1) * cell; ++r) {
                for (int c = gc * cell; c < (gc + 1) * cell; ++c) {
                    acc += mask.at(r, c);
                }
            }
            if (acc / (static_cast<double>(cell) * cell) > thresh) {
                out.push_back(gr * grid + gc);
            }
        }
    }
    return out;
}

MatchMap match_level(const Mat3 &coord, const std::vector<int> &cand_moving,
                     const std::vector<int> &cand_fixed, int grid, MapLevel level, double theta) {
    if (coord.role() != Role::Coord) {
        throw Error(Errc::RoleMismatch, "ground-truth matching needs a coordinate matrix");
    }
    MatchMap map(level, grid, coord.side());
    const int cell = map.cell_size();
    std::vector<char> fixed_ok(static_cast<size_t>(map.cells()), 0);
    for (int j : cand_fixed) {
        fixed_ok[static_cast<size_t>(j)] = 1;
    }
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (int i : cand_moving) {
        const PixelPoint center{cell_center(cell_row(i, grid), cell), cell_center(cell_col(i, grid), cell)};
        const PixelPoint q = coord.apply(center);
        const int jr = cell_along(q.row, cell);
        const int jc = cell_along(q.col, cell);
        if (jr < 0 || jc < 0 || jr >= grid || jc >= grid) {
            continue;
        }
        const int j = jr * grid + jc;
        if (!fixed_ok[static_cast<size_t>(j)]) {
            continue;
        }
        map.conf(i, j) = 1.0;
        if (level == MapLevel::Coarse) {
            map.aux1(i, j) = ct;
            map.aux2(i, j) = st;
        } else {
            map.aux1(i, j) = (q.row - cell_center(jr, cell)) / cell;
            map.aux2(i, j) = (q.col - cell_center(jc, cell)) / cell;
        }
    }
    return map;
}

GtMaps build_gt_maps(const Mat3 &gt_affine, const Raster &mask_moving, const Raster &mask_fixed,
                     const SynthConfig &cfg) {
    const Mat3 coord = affine_to_coord(gt_affine);
    const double theta = decompose_params(gt_affine).theta;
    GtMaps gt;
    gt.cand_moving_coarse = candidate_patches(mask_moving, cfg.coarse_grid, cfg.coarse_thresh);
    gt.cand_fixed_coarse = candidate_patches(mask_fixed, cfg.coarse_grid, cfg.coarse_thresh);
    gt.cand_moving_fine = candidate_patches(mask_moving, cfg.fine_grid, cfg.fine_thresh);
    gt.cand_fixed_fine = candidate_patches(mask_fixed, cfg.fine_grid, cfg.fine_thresh);
    gt.coarse = match_level(coord, gt.cand_moving_coarse, gt.cand_fixed_coarse, cfg.coarse_grid,
                            MapLevel::Coarse, theta);
    gt.fine = match_level(coord, gt.cand_moving_fine, gt.cand_fixed_fine, cfg.fine_grid,
                          MapLevel::Fine, theta);
    return gt;
}

SynthPair synth_pair(const Raster &bright, const Raster &mask, const SynthConfig &cfg, Rng &rng) {
    cfg.check_support();
    if (!bright.square() || bright.height() != cfg.src_side || !(mask.height() == bright.height() && mask.width() == bright.width())) {
        throw Error(Errc::SizeMismatch, "source rasters must be " + std::to_string(cfg.src_side) +
                                            " px square");
    }
    std::uniform_real_distribution<double> angle(deg2rad(cfg.theta_min_deg), deg2rad(cfg.theta_max_deg));
    std::uniform_real_distribution<double> shift(-cfg.trans_range, cfg.trans_range);

    auto draw = [&](int side) {
        TransformParams p;
        p.side = side;
        p.theta = angle(rng);
        p.dx = shift(rng);
        p.dy = shift(rng);
        return p;
    };

    SynthPair pair;
    const TransformParams src_moving = draw(cfg.src_side);
    const TransformParams src_fixed = draw(cfg.src_side);

    pair.moving = center_crop(warp_parametric(bright, src_moving, Interp::Bilinear), cfg.out_side);
    pair.mask_moving = center_crop(warp_parametric(mask, src_moving, Interp::Nearest), cfg.out_side);
    pair.fixed = center_crop(warp_parametric(bright, src_fixed, Interp::Bilinear), cfg.out_side);
    pair.mask_fixed = center_crop(warp_parametric(mask, src_fixed, Interp::Nearest), cfg.out_side);

    // Center crops share the rotation center, so the same parameters describe
    // each crop relative to the crop of the untransformed source.
    pair.params_moving = src_moving;
    pair.params_moving.side = cfg.out_side;
    pair.params_fixed = src_fixed;
    pair.params_fixed.side = cfg.out_side;

    pair.gt_affine = compose_moving_to_fixed(build_affine(pair.params_moving), build_affine(pair.params_fixed));
    pair.gt_params = decompose_params(pair.gt_affine);
    pair.gt = build_gt_maps(pair.gt_affine, pair.mask_moving, pair.mask_fixed, cfg);
    return pair;
}

Phantom make_phantom(int side, Rng &rng, int n_cells) {
    std::uniform_real_distribution<double> pos(0.0, side - 1.0);
    std::uniform_real_distribution<double> radius(0.02 * side, 0.045 * side);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.03);

    struct Cell {
        double r, c, a, b, phi, level;
    };
    std::vector<Cell> cells;
    cells.reserve(static_cast<size_t>(n_cells));
    for (int k = 0; k < n_cells; ++k) {
        const double a = radius(rng);
        cells.push_back({pos(rng), pos(rng), a, a * (0.6 + 0.4 * unit(rng)),
                         unit(rng) * std::numbers::pi, 0.5 + 0.5 * unit(rng)});
    }

    Phantom ph{Raster(side, side), Raster(side, side)};
    const double fx = 2.0 * std::numbers::pi * (1.0 + 2.0 * unit(rng)) / side;
    const double fy = 2.0 * std::numbers::pi * (1.0 + 2.0 * unit(rng)) / side;
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            double v = 0.25 + 0.1 * std::sin(fx * c) * std::cos(fy * r);
            float inside = 0.0f;
            for (const Cell &cell : cells) {
                const double dr = r - cell.r;
                const double dc = c - cell.c;
                if (std::abs(dr) > cell.a || std::abs(dc) > cell.a) {
                    continue;
                }
                const double u = (dr * std::cos(cell.phi) + dc * std::sin(cell.phi)) / cell.a;
                const double w = (-dr * std::sin(cell.phi) + dc * std::cos(cell.phi)) / cell.b;
                const double rho = u * u + w * w;
                if (rho <= 1.0) {
                    inside = 1.0f;
                    v = std::max(v, cell.level * (1.0 - 0.5 * rho));
                }
            }
            ph.bright.at(r, c) = static_cast<float>(v + noise(rng));
            ph.mask.at(r, c) = inside;
        }
    }
    ph.bright = normalize(ph.bright).raster;
    return ph;
}

bool has_one_to_multi(const MatchMap &gt) {
    const int n = gt.conf.rows;
    const int m = gt.conf.cols;
    std::vector<int> col_count(static_cast<size_t>(m), 0);
    for (int i = 0; i < n; ++i) {
        int row_count = 0;
        for (int j = 0; j < m; ++j) {
            if (gt.conf(i, j) > 0.0) {
                ++row_count;
                ++col_count[static_cast<size_t>(j)];
            }
        }
        if (row_count > 1) return true;
    }
    return std::any_of(col_count.begin(), col_count.end(), [](int c) { return c > 1; });
}

} // namespace ddreg
