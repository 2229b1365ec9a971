#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ddreg/error.hpp"
#include "ddreg/evalloss.hpp"
#include "ddreg/solve.hpp"
#include "ddreg/synthmap.hpp"

using namespace ddreg;

namespace {

PixelPoint rigid(double theta, double tr, double tc, PixelPoint p) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {c * p.row + s * p.col + tr, -s * p.row + c * p.col + tc};
}

CorrespondenceSet exact_set(std::mt19937_64 &rng, int n, double theta, double tr, double tc, int side = 256) {
    std::uniform_real_distribution<double> u(0.0, side - 1.0);
    std::uniform_real_distribution<double> w(0.3, 1.0);
    CorrespondenceSet cs;
    cs.side = side;
    for (int k = 0; k < n; ++k) {
        Correspondence c;
        c.moving = {u(rng), u(rng)};
        c.fixed = rigid(theta, tr, tc, c.moving);
        c.weight = w(rng);
        cs.items.push_back(c);
    }
    return cs;
}

double objective(const CorrespondenceSet &cs, double theta, double tr, double tc) {
    double acc = 0.0;
    for (const Correspondence &c : cs.items) {
        const PixelPoint q = rigid(theta, tr, tc, c.moving);
        acc += c.weight * ((q.row - c.fixed.row) * (q.row - c.fixed.row) + (q.col - c.fixed.col) * (q.col - c.fixed.col));
    }
    return acc;
}

} // namespace

TEST_CASE("two exact points determine the fit") {
    CorrespondenceSet cs;
    cs.side = 256;
    const double th = deg2rad(25.0);
    for (PixelPoint p : {PixelPoint{30, 40}, PixelPoint{200, 90}}) {
        cs.items.push_back({p, rigid(th, 10, -4, p), 1.0, 0, 0});
    }
    const RigidFit f = fit_rigid(cs);
    CHECK(std::abs(f.theta - th) < 1e-9);
    CHECK(std::abs(f.t_row - 10) < 1e-9);
    CHECK(std::abs(f.t_col + 4) < 1e-9);
    CHECK(f.n_used == 2);
}

TEST_CASE("exact point sets fit with zero residual") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ang(-3.1, 3.1);
    std::uniform_real_distribution<double> sh(-50, 50);
    for (int k = 0; k < 100; ++k) {
        const double th = ang(rng);
        const CorrespondenceSet cs = exact_set(rng, 16, th, sh(rng), sh(rng));
        const RigidFit f = fit_rigid(cs);
        CHECK(f.residual_rms < 1e-9);
        CHECK(std::abs(wrap_angle(f.theta - th)) < 1e-9);
    }
}

TEST_CASE("more matches give smaller errors under jitter") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> jit(0.0, 1.0);
    double medians[3];
    const int counts[3] = {5, 20, 50};
    for (int n = 0; n < 3; ++n) {
        std::vector<double> err;
        for (int seed = 0; seed < 200; ++seed) {
            CorrespondenceSet cs = exact_set(rng, counts[n], 0.3, 5, -7);
            for (Correspondence &c : cs.items) {
                c.fixed.row += jit(rng);
                c.fixed.col += jit(rng);
                c.weight = 1.0;
            }
            const RigidFit f = fit_rigid(cs);
            const Mat3 truth(Role::Coord, 256, {std::cos(0.3), std::sin(0.3), 5, -std::sin(0.3), std::cos(0.3), -7, 0, 0, 1});
            err.push_back(corner_displacement(truth, fit_to_matrices(f, 256).coord, 256));
        }
        std::nth_element(err.begin(), err.begin() + 100, err.end());
        medians[n] = err[100];
    }
    CHECK(medians[1] < medians[0]);
    CHECK(medians[2] < medians[1]);
}

TEST_CASE("fit minimizes the weighted objective") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> jit(0.0, 2.0);
    for (int k = 0; k < 50; ++k) {
        CorrespondenceSet cs = exact_set(rng, 12, 0.1 * k, 3, 4);
        for (Correspondence &c : cs.items) {
            c.fixed.row += jit(rng);
            c.fixed.col += jit(rng);
        }
        const RigidFit f = fit_rigid(cs);
        const double best = objective(cs, f.theta, f.t_row, f.t_col);
        for (double dth : {-0.1, 0.1}) {
            CHECK(objective(cs, f.theta + deg2rad(dth), f.t_row, f.t_col) >= best);
        }
        for (double d : {-0.5, 0.5}) {
            CHECK(objective(cs, f.theta, f.t_row + d, f.t_col) >= best);
            CHECK(objective(cs, f.theta, f.t_row, f.t_col + d) >= best);
        }
    }
}

TEST_CASE("rotating the fixed points about the center adds to the angle") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> jit(0.0, 1.0);
    const double h = 127.5;
    for (int k = 0; k < 50; ++k) {
        CorrespondenceSet cs = exact_set(rng, 10, 0.2, 1, 2);
        for (Correspondence &c : cs.items) c.fixed.row += jit(rng);
        const RigidFit f = fit_rigid(cs);
        const double phi = 0.05 * k - 1.0;
        CorrespondenceSet rot = cs;
        for (Correspondence &c : rot.items) {
            const PixelPoint d = rigid(phi, 0, 0, {c.fixed.row - h, c.fixed.col - h});
            c.fixed = {d.row + h, d.col + h};
        }
        CHECK(std::abs(wrap_angle(fit_rigid(rot).theta - f.theta - phi)) < 1e-9);
    }
}

TEST_CASE("weight scale does not matter") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> jit(0.0, 1.0);
    CorrespondenceSet cs = exact_set(rng, 20, -0.7, 8, 3);
    for (Correspondence &c : cs.items) c.fixed.col += jit(rng);
    const RigidFit a = fit_rigid(cs);
    for (Correspondence &c : cs.items) c.weight *= 37.0;
    const RigidFit b = fit_rigid(cs);
    CHECK(std::abs(a.theta - b.theta) < 1e-12);
    CHECK(std::abs(a.t_row - b.t_row) < 1e-12 * 256);
    CHECK(std::abs(a.t_col - b.t_col) < 1e-12 * 256);
}

TEST_CASE("unweighted and ransac options") {
    std::mt19937_64 rng(6);
    CorrespondenceSet cs = exact_set(rng, 30, 0.4, -6, 9);
    // One heavy outlier drags the weighted fit; RANSAC ignores it.
    cs.items[0].fixed.row += 80;
    cs.items[0].weight = 1.0;
    FitOptions weighted;
    const RigidFit plain = fit_rigid(cs, weighted);
    CHECK(plain.residual_rms > 1.0);
    FitOptions robust;
    robust.ransac = true;
    const RigidFit r = fit_rigid(cs, robust);
    CHECK(r.n_used == 29);
    CHECK(std::abs(r.theta - 0.4) < 1e-9);

    FitOptions uw;
    uw.weighted = false;
    CorrespondenceSet two = exact_set(rng, 8, 0.1, 0, 0);
    CHECK(std::abs(fit_rigid(two, uw).theta - 0.1) < 1e-9);
}

TEST_CASE("fit errors") {
    CorrespondenceSet cs;
    cs.side = 64;
    try {
        fit_rigid(cs);
        FAIL("expected NotEnoughMatches");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::NotEnoughMatches);
    }
    cs.items.push_back({{5, 5}, {6, 6}, 1.0, 0, 0});
    CHECK_THROWS_AS(fit_rigid(cs), Error);
    cs.items.push_back({{5, 5}, {7, 7}, 1.0, 0, 0});
    try {
        fit_rigid(cs);
        FAIL("expected DegenerateGeometry");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::DegenerateGeometry);
    }
}

TEST_CASE("fit to matrices") {
    RigidFit id;
    const FitMatrices m = fit_to_matrices(id, 64);
    CHECK(max_abs_diff(m.coord, Mat3::identity(Role::Coord, 64)) < 1e-15);
    CHECK(max_abs_diff(m.affine, Mat3::identity(Role::Affine, 64)) < 1e-15);

    // Quarter turn about the center of a 256 image.
    RigidFit q;
    q.theta = deg2rad(90.0);
    q.t_row = 0.0;
    q.t_col = 255.0;
    const FitMatrices qm = fit_to_matrices(q, 256);
    TransformParams p;
    p.side = 256;
    p.theta = deg2rad(90.0);
    CHECK(max_abs_diff(qm.coord, build_coord(p)) < 1e-9);
    CHECK(std::abs(decompose_params(qm.affine).theta - q.theta) < 1e-9);

    SynthConfig cfg;
    Rng rng(8);
    const Phantom ph = make_phantom(512, rng);
    const SynthPair pair = synth_pair(ph.bright, ph.mask, cfg, rng);
    const CorrespondenceSet cs = extract_correspondences(pair.gt.fine, FilterMask(256, 256, true), 0.25);
    const RigidFit f = fit_rigid(cs);
    CHECK(max_abs_diff(fit_to_matrices(f, 256).affine, pair.gt_affine) < 1e-6);
    CHECK(std::abs(f.params.theta - pair.gt_params.theta) < 1e-9);
}
