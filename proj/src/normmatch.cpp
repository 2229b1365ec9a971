#include "ddreg/normmatch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "ddreg/error.hpp"
#include "ddreg/synthmap.hpp"

namespace ddreg {

namespace {

constexpr double kMadScale = 1.4826;
constexpr double kTieTol = 1e-6;

void require_finite(const ScoreMap &s) {
    if (s.rows <= 0 || s.cols <= 0) {
        throw Error(Errc::SizeMismatch, "score map is empty");
    }
    for (double x : s.v) {
        if (!std::isfinite(x)) {
            throw Error(Errc::InvalidParam, "score map has non-finite entries");
        }
    }
}

double median_of(std::vector<double> xs) {
    const size_t n = xs.size();
    std::sort(xs.begin(), xs.end());
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Shifts each angle by multiples of 2*pi into (ref - pi, ref + pi].
std::vector<double> unwrap_around(const std::vector<double> &angles, double ref) {
    std::vector<double> out;
    out.reserve(angles.size());
    for (double a : angles) {
        out.push_back(ref + wrap_angle(a - ref));
    }
    return out;
}

double circular_mean(const std::vector<double> &angles) {
    double c = 0.0;
    double s = 0.0;
    for (double a : angles) {
        c += std::cos(a);
        s += std::sin(a);
    }
    return std::atan2(s, c);
}

// Median on the circle: unwrap around the mean direction, take the median,
// then unwrap once more around that median.
double circular_median(const std::vector<double> &angles, std::vector<double> &unwrapped) {
    double ref = circular_mean(angles);
    unwrapped = unwrap_around(angles, ref);
    ref = median_of(unwrapped);
    unwrapped = unwrap_around(angles, ref);
    return median_of(unwrapped);
}

double round_to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

void round_plane(Plane &p) {
    for (double &x : p.v) {
        x = round_to_float(x);
    }
}

} // namespace

Plane dual_softmax(const ScoreMap &s, double temperature) {
    require_finite(s);
    if (!(temperature > 0.0)) {
        throw Error(Errc::InvalidParam, "temperature must be positive");
    }
    const int n = s.rows;
    const int m = s.cols;
    std::vector<double> row_lse(static_cast<size_t>(n));
    std::vector<double> col_lse(static_cast<size_t>(m));
    for (int i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j) mx = std::max(mx, s(i, j) / temperature);
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += std::exp(s(i, j) / temperature - mx);
        row_lse[static_cast<size_t>(i)] = mx + std::log(acc);
    }
    for (int j = 0; j < m; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) mx = std::max(mx, s(i, j) / temperature);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += std::exp(s(i, j) / temperature - mx);
        col_lse[static_cast<size_t>(j)] = mx + std::log(acc);
    }
    Plane out(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double z = s(i, j) / temperature;
            out(i, j) = std::exp(2.0 * z - row_lse[static_cast<size_t>(i)] - col_lse[static_cast<size_t>(j)]);
        }
    }
    return out;
}

Plane sinkhorn(const ScoreMap &s, int iters, double epsilon) {
    require_finite(s);
    if (iters < 1) {
        throw Error(Errc::InvalidParam, "sinkhorn needs at least one iteration");
    }
    if (!(epsilon > 0.0)) {
        throw Error(Errc::InvalidParam, "epsilon must be positive");
    }
    const auto n = static_cast<size_t>(s.rows);
    const auto m = static_cast<size_t>(s.cols);
    const double log_row_mass = 0.0;
    const double log_col_mass = std::log(static_cast<double>(n) / static_cast<double>(m));

    // Potentials u, v stay in the log domain. The kernels are stabilized per
    // row (per column) so each half-step is a product with bounded entries.
    std::vector<double> z(n * m);
    for (size_t k = 0; k < z.size(); ++k) z[k] = s.v[k] / epsilon;

    std::vector<double> row_max(n, -std::numeric_limits<double>::infinity());
    std::vector<double> col_max(m, -std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < m; ++j) {
            row_max[i] = std::max(row_max[i], z[i * m + j]);
            col_max[j] = std::max(col_max[j], z[i * m + j]);
        }
    }
    std::vector<double> k_row(n * m);  // exp(z - row_max), row-major
    std::vector<double> k_colT(m * n); // exp(z - col_max), transposed
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < m; ++j) {
            k_row[i * m + j] = std::exp(z[i * m + j] - row_max[i]);
            k_colT[j * n + i] = std::exp(z[i * m + j] - col_max[j]);
        }
    }

    std::vector<double> u(n, 0.0);
    std::vector<double> v(m, 0.0);
    std::vector<double> ev(m);
    std::vector<double> eu(n);

    // log sum_j exp(z_ij + pot_j), falling back to a direct log-sum-exp when
    // the stabilized product underflows.
    auto half_step = [](const std::vector<double> &kern, const std::vector<double> &zz, bool transposed,
                        size_t rows, size_t cols, const std::vector<double> &maxes,
                        const std::vector<double> &pot, std::vector<double> &epot, double log_mass,
                        std::vector<double> &out) {
        const double pmax = *std::max_element(pot.begin(), pot.end());
        for (size_t j = 0; j < cols; ++j) epot[j] = std::exp(pot[j] - pmax);
        for (size_t i = 0; i < rows; ++i) {
            const double *krow = &kern[i * cols];
            double acc = 0.0;
            for (size_t j = 0; j < cols; ++j) acc += krow[j] * epot[j];
            double lse;
            if (acc > 1e-280) {
                lse = maxes[i] + pmax + std::log(acc);
            } else {
                double mx = -std::numeric_limits<double>::infinity();
                for (size_t j = 0; j < cols; ++j) {
                    const double zij = transposed ? zz[j * rows + i] : zz[i * cols + j];
                    mx = std::max(mx, zij + pot[j]);
                }
                double a2 = 0.0;
                for (size_t j = 0; j < cols; ++j) {
                    const double zij = transposed ? zz[j * rows + i] : zz[i * cols + j];
                    a2 += std::exp(zij + pot[j] - mx);
                }
                lse = mx + std::log(a2);
            }
            out[i] = log_mass - lse;
        }
    };

    for (int it = 0; it < iters; ++it) {
        half_step(k_row, z, false, n, m, row_max, v, ev, log_row_mass, u);
        half_step(k_colT, z, true, m, n, col_max, u, eu, log_col_mass, v);
    }

    Plane out(s.rows, s.cols);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < m; ++j) {
            out.v[i * m + j] = std::exp(z[i * m + j] + u[i] + v[j]);
        }
    }
    return out;
}

ScoreMap simulated_scores(const MatchMap &gt, double margin, double noise_sigma, Rng &rng) {
    ScoreMap s(gt.conf.rows, gt.conf.cols);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    for (size_t k = 0; k < s.v.size(); ++k) {
        s.v[k] = margin * gt.conf.v[k] + (noise_sigma > 0.0 ? noise(rng) : 0.0);
    }
    return s;
}

ExperimentReport normalizer_experiment(const MatchMap &coarse_gt, double noise_sigma, Rng &rng, double margin) {
    ExperimentReport report;
    report.one_to_multi = has_one_to_multi(coarse_gt);
    const ScoreMap s = simulated_scores(coarse_gt, margin, noise_sigma, rng);

    auto measure = [&](auto &&normalizer, NormalizerStats &stats) {
        const auto t0 = std::chrono::steady_clock::now();
        const Plane p = normalizer(s);
        const auto t1 = std::chrono::steady_clock::now();
        stats.micros = std::chrono::duration<double, std::micro>(t1 - t0).count();
        stats.max = *std::max_element(p.v.begin(), p.v.end());
        for (size_t k = 0; k < p.v.size(); ++k) {
            if (coarse_gt.conf.v[k] > 0.0) {
                ++stats.count_gt_pos;
                if (p.v[k] > 0.5) ++stats.above_0_5;
                if (p.v[k] > 0.8) ++stats.above_0_8;
            }
        }
    };
    measure([](const ScoreMap &x) { return dual_softmax(x); }, report.dual_softmax);
    measure([](const ScoreMap &x) { return sinkhorn(x); }, report.sinkhorn);
    return report;
}

BoolPlane threshold_select(const MatchMap &m, double tau) {
    if (!(tau >= 0.0 && tau < 1.0)) {
        throw Error(Errc::InvalidThreshold, "confidence threshold must lie in [0, 1)");
    }
    BoolPlane out(m.conf.rows, m.conf.cols);
    for (size_t k = 0; k < m.conf.v.size(); ++k) {
        out.v[k] = m.conf.v[k] > tau ? 1 : 0;
    }
    return out;
}

BoolPlane threshold_scores(const ScoreMap &s, double threshold) {
    if (!std::isfinite(threshold)) {
        throw Error(Errc::InvalidThreshold, "score threshold must be finite");
    }
    BoolPlane out(s.rows, s.cols);
    for (size_t k = 0; k < s.v.size(); ++k) {
        out.v[k] = s.v[k] > threshold ? 1 : 0;
    }
    return out;
}

std::vector<AnglePixel> selected_angles(const MatchMap &coarse, const BoolPlane &selected) {
    if (selected.rows != coarse.conf.rows || selected.cols != coarse.conf.cols) {
        throw Error(Errc::SizeMismatch, "selection does not match the coarse map");
    }
    std::vector<AnglePixel> out;
    for (int i = 0; i < selected.rows; ++i) {
        for (int j = 0; j < selected.cols; ++j) {
            if (selected(i, j)) {
                out.push_back({i, j, coarse.aux1(i, j), coarse.aux2(i, j)});
            }
        }
    }
    return out;
}

AngleFilterResult zscore_angle_filter(const std::vector<AnglePixel> &pixels, double k, ZMode mode,
                                      double min_dev_deg) {
    AngleFilterResult res;
    std::vector<double> raw;
    raw.reserve(pixels.size());
    for (const AnglePixel &p : pixels) {
        raw.push_back(std::atan2(p.sin, p.cos));
    }
    if (pixels.size() < 3) {
        res.pass_through = true;
        res.kept = pixels;
        res.kept_angles = raw;
        if (!raw.empty()) res.center = circular_mean(raw);
        return res;
    }

    std::vector<double> unwrapped;
    if (mode == ZMode::Robust) {
        res.center = circular_median(raw, unwrapped);
        std::vector<double> dev;
        dev.reserve(unwrapped.size());
        for (double a : unwrapped) dev.push_back(std::abs(a - res.center));
        res.spread = median_of(dev);
    } else {
        const double ref = circular_mean(raw);
        unwrapped = unwrap_around(raw, ref);
        res.center = std::accumulate(unwrapped.begin(), unwrapped.end(), 0.0) / static_cast<double>(unwrapped.size());
        double ss = 0.0;
        for (double a : unwrapped) ss += (a - res.center) * (a - res.center);
        res.spread = std::sqrt(ss / static_cast<double>(unwrapped.size()));
    }
    const double scale = mode == ZMode::Robust ? kMadScale * res.spread : res.spread;
    const double floor = std::max(kTieTol, deg2rad(min_dev_deg));

    for (size_t n = 0; n < pixels.size(); ++n) {
        const double dev = std::abs(unwrapped[n] - res.center);
        const bool keep = dev <= floor || (scale > 0.0 && dev / scale <= k);
        if (keep) {
            res.kept.push_back(pixels[n]);
            res.kept_angles.push_back(unwrapped[n]);
        } else {
            res.removed.push_back(pixels[n]);
        }
    }
    return res;
}

double angle_mad(const std::vector<double> &angles) {
    if (angles.empty()) return 0.0;
    std::vector<double> unwrapped;
    const double med = circular_median(angles, unwrapped);
    std::vector<double> dev;
    dev.reserve(unwrapped.size());
    for (double a : unwrapped) dev.push_back(std::abs(a - med));
    return median_of(dev);
}

BoolPlane pixels_to_plane(const std::vector<AnglePixel> &pixels, int rows, int cols) {
    BoolPlane out(rows, cols);
    for (const AnglePixel &p : pixels) {
        out.set(p.moving, p.fixed, true);
    }
    return out;
}

FilterMask expand_coarse_filter(const BoolPlane &coarse, int coarse_grid) {
    const int nc = coarse_grid * coarse_grid;
    if (coarse.rows != nc || coarse.cols != nc) {
        throw Error(Errc::SizeMismatch, "coarse map must be grid^2 x grid^2");
    }
    const int fine_grid = 2 * coarse_grid;
    const int nf = fine_grid * fine_grid;
    FilterMask out(nf, nf);
    for (int i = 0; i < nc; ++i) {
        for (int j = 0; j < nc; ++j) {
            if (!coarse(i, j)) continue;
            const int ir = cell_row(i, coarse_grid) * 2;
            const int ic = cell_col(i, coarse_grid) * 2;
            const int jr = cell_row(j, coarse_grid) * 2;
            const int jc = cell_col(j, coarse_grid) * 2;
            for (int a = 0; a < 4; ++a) {
                const int u = (ir + a / 2) * fine_grid + ic + a % 2;
                for (int b = 0; b < 4; ++b) {
                    const int v = (jr + b / 2) * fine_grid + jc + b % 2;
                    out.set(u, v, true);
                }
            }
        }
    }
    return out;
}

CorrespondenceSet extract_correspondences(const MatchMap &fine, const FilterMask &filter, double tau) {
    if (filter.rows != fine.conf.rows || filter.cols != fine.conf.cols) {
        throw Error(Errc::SizeMismatch, "filter does not match the fine map");
    }
    if (!(tau >= 0.0 && tau < 1.0)) {
        throw Error(Errc::InvalidThreshold, "confidence threshold must lie in [0, 1)");
    }
    CorrespondenceSet set;
    set.side = fine.side;
    const int grid = fine.grid;
    const double cell = fine.cell_size();
    const double off = 0.5 * (cell - 1.0);
    for (int u = 0; u < filter.rows; ++u) {
        for (int v = 0; v < filter.cols; ++v) {
            if (!filter(u, v) || !(fine.conf(u, v) > tau)) continue;
            Correspondence c;
            c.moving_cell = u;
            c.fixed_cell = v;
            c.moving = {cell_row(u, grid) * cell + off, cell_col(u, grid) * cell + off};
            c.fixed = {cell_row(v, grid) * cell + off + fine.aux1(u, v) * cell,
                       cell_col(v, grid) * cell + off + fine.aux2(u, v) * cell};
            c.weight = fine.conf(u, v);
            set.items.push_back(c);
        }
    }
    return set;
}

void Corruption::validate() const {
    auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
    if (!(drop_rate >= 0.0 && drop_rate <= 1.0) || !rate_ok(spurious_rate)) {
        throw Error(Errc::InvalidParam, "corruption rates must lie in [0, 1)");
    }
    if (!(jitter_sigma >= 0.0) || !(score_noise >= 0.0) || !std::isfinite(score_margin)) {
        throw Error(Errc::InvalidParam, "corruption sigmas must be non-negative");
    }
}

MatcherOutput mock_matcher(const MatchMap &gt_coarse, const MatchMap &gt_fine, const Corruption &corruption,
                           Rng &rng) {
    corruption.validate();
    if (gt_fine.grid != 2 * gt_coarse.grid || gt_fine.side != gt_coarse.side) {
        throw Error(Errc::SizeMismatch, "fine map must be on twice the coarse grid");
    }
    // Spurious picks come from their own stream so the same seed yields the
    // same drops and jitter with or without spurious injection.
    Rng spur_rng(rng());

    MatcherOutput out{MatchMap(MapLevel::Scores, gt_coarse.grid, gt_coarse.side),
                      MatchMap(MapLevel::Scores, gt_fine.grid, gt_fine.side)};
    std::bernoulli_distribution drop(std::min(corruption.drop_rate, 1.0));
    std::normal_distribution<double> noise(0.0, 1.0);
    auto jitter = [&]() { return corruption.jitter_sigma > 0.0 ? corruption.jitter_sigma * noise(rng) : 0.0; };
    auto logit_noise = [&]() { return corruption.score_noise > 0.0 ? corruption.score_noise * noise(rng) : 0.0; };

    double gt_theta = 0.0;
    bool have_theta = false;

    auto corrupt_level = [&](const MatchMap &gt, MatchMap &scores) {
        for (size_t k = 0; k < scores.conf.v.size(); ++k) {
            scores.conf.v[k] = logit_noise();
        }
        for (int i = 0; i < gt.conf.rows; ++i) {
            for (int j = 0; j < gt.conf.cols; ++j) {
                if (!(gt.conf(i, j) > 0.0)) continue;
                if (gt.level == MapLevel::Coarse && !have_theta) {
                    gt_theta = std::atan2(gt.aux2(i, j), gt.aux1(i, j));
                    have_theta = true;
                }
                if (corruption.drop_rate > 0.0 && drop(rng)) continue;
                scores.conf(i, j) += corruption.score_margin;
                if (gt.level == MapLevel::Coarse) {
                    const double a = std::atan2(gt.aux2(i, j), gt.aux1(i, j)) + jitter();
                    scores.aux1(i, j) = std::cos(a);
                    scores.aux2(i, j) = std::sin(a);
                } else {
                    scores.aux1(i, j) = gt.aux1(i, j) + jitter();
                    scores.aux2(i, j) = gt.aux2(i, j) + jitter();
                }
            }
        }
    };
    corrupt_level(gt_coarse, out.coarse);
    corrupt_level(gt_fine, out.fine);

    if (corruption.spurious_rate > 0.0) {
        auto count_pos = [](const MatchMap &m) {
            return static_cast<int>(std::count_if(m.conf.v.begin(), m.conf.v.end(), [](double x) { return x > 0.0; }));
        };
        const int n_coarse = static_cast<int>(std::lround(corruption.spurious_rate * count_pos(gt_coarse)));
        const int n_fine = static_cast<int>(std::lround(corruption.spurious_rate * count_pos(gt_fine)));
        const int nc = gt_coarse.cells();
        const int nf = gt_fine.cells();
        std::uniform_int_distribution<int> pick_coarse(0, nc - 1);
        std::uniform_int_distribution<int> pick_fine(0, nf - 1);
        std::uniform_int_distribution<int> pick_child(0, 3);
        std::uniform_real_distribution<double> any_angle(-std::numbers::pi, std::numbers::pi);
        std::uniform_real_distribution<double> any_offset(-0.5, 0.5);

        std::vector<std::pair<int, int>> coarse_pairs;
        std::set<std::pair<int, int>> used;
        int guard = 0;
        while (static_cast<int>(coarse_pairs.size()) < n_coarse && guard++ < 100 * (n_coarse + 1)) {
            const int i = pick_coarse(spur_rng);
            const int j = pick_coarse(spur_rng);
            if (gt_coarse.conf(i, j) > 0.0 || !used.insert({i, j}).second) continue;
            coarse_pairs.emplace_back(i, j);
            const double a = corruption.spurious_angle_offset_deg
                                 ? gt_theta + deg2rad(*corruption.spurious_angle_offset_deg)
                                 : any_angle(spur_rng);
            out.coarse.conf(i, j) += corruption.score_margin;
            out.coarse.aux1(i, j) = std::cos(a);
            out.coarse.aux2(i, j) = std::sin(a);
        }

        const int cg = gt_coarse.grid;
        const int fg = gt_fine.grid;
        used.clear();
        guard = 0;
        int placed = 0;
        while (placed < n_fine && guard++ < 100 * (n_fine + 1)) {
            int u = 0;
            int v = 0;
            if (!coarse_pairs.empty()) {
                // Wrong coarse matches drag their fine children along.
                const auto [i, j] = coarse_pairs[static_cast<size_t>(placed) % coarse_pairs.size()];
                const int a = pick_child(spur_rng);
                const int b = pick_child(spur_rng);
                u = (cell_row(i, cg) * 2 + a / 2) * fg + cell_col(i, cg) * 2 + a % 2;
                v = (cell_row(j, cg) * 2 + b / 2) * fg + cell_col(j, cg) * 2 + b % 2;
            } else {
                u = pick_fine(spur_rng);
                v = pick_fine(spur_rng);
            }
            if (gt_fine.conf(u, v) > 0.0 || !used.insert({u, v}).second) continue;
            out.fine.conf(u, v) += corruption.score_margin;
            out.fine.aux1(u, v) = any_offset(spur_rng);
            out.fine.aux2(u, v) = any_offset(spur_rng);
            ++placed;
        }
    }

    for (MatchMap *m : {&out.coarse, &out.fine}) {
        round_plane(m->conf);
        round_plane(m->aux1);
        round_plane(m->aux2);
    }
    return out;
}

} // namespace ddreg
