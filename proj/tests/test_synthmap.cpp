#include <doctest.h>

#include <cmath>

#include "ddreg/error.hpp"
#include "ddreg/synthmap.hpp"

using namespace ddreg;

namespace {

SynthConfig small_config() {
    SynthConfig cfg;
    cfg.src_side = 128;
    cfg.out_side = 64;
    cfg.coarse_grid = 4;
    cfg.fine_grid = 8;
    cfg.trans_range = 8;
    return cfg;
}

int positives(const MatchMap &m) {
    int n = 0;
    for (double v : m.conf.v) n += v > 0.0;
    return n;
}

} // namespace

TEST_CASE("candidate patches") {
    CHECK(candidate_patches(Raster(256, 256, 1.0f), 8, 0.0).size() == 64);
    CHECK(candidate_patches(Raster(256, 256, 0.0f), 8, 0.0).empty());

    // Three and a half cell columns covered: boundary cells have mean 0.5.
    Raster half(256, 256, 0.0f);
    for (int r = 0; r < 256; ++r) {
        for (int c = 0; c < 112; ++c) half.at(r, c) = 1.0f;
    }
    const std::vector<int> cells = candidate_patches(half, 8, 0.25);
    CHECK(cells.size() == 32);
    for (int k : cells) CHECK(cell_col(k, 8) <= 3);
    CHECK(candidate_patches(half, 8, 0.5).size() == 24);
    CHECK_THROWS_AS(candidate_patches(half, 7, 0.0), Error);
}

TEST_CASE("identity transform gives identity maps") {
    SynthConfig cfg;
    const Raster full(256, 256, 1.0f);
    const GtMaps gt = build_gt_maps(Mat3::identity(Role::Affine, 256), full, full, cfg);
    REQUIRE(gt.coarse.conf.rows == 64);
    REQUIRE(gt.fine.conf.rows == 256);
    for (int i = 0; i < 64; ++i) {
        for (int j = 0; j < 64; ++j) {
            CHECK(gt.coarse.conf(i, j) == (i == j ? 1.0 : 0.0));
        }
        CHECK(gt.coarse.aux1(i, i) == 1.0);
        CHECK(gt.coarse.aux2(i, i) == 0.0);
    }
    CHECK(positives(gt.fine) == 256);
    for (int u = 0; u < 256; ++u) {
        CHECK(gt.fine.conf(u, u) == 1.0);
        CHECK(gt.fine.aux1(u, u) == 0.0);
        CHECK(gt.fine.aux2(u, u) == 0.0);
    }
}

TEST_CASE("quarter turn permutes the coarse cells") {
    SynthConfig cfg;
    const Raster full(256, 256, 1.0f);
    TransformParams p;
    p.side = 256;
    p.theta = deg2rad(90.0);
    const GtMaps gt = build_gt_maps(build_affine(p), full, full, cfg);
    CHECK(positives(gt.coarse) == 64);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            // Clockwise: (row, col) -> (col, G-1-row).
            const int i = r * 8 + c;
            const int j = c * 8 + (7 - r);
            CHECK(gt.coarse.conf(i, j) == 1.0);
            CHECK(gt.coarse.aux1(i, j) == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(gt.coarse.aux2(i, j) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("ground truth structure on random pairs") {
    const SynthConfig cfg = small_config();
    int consistent = 0;
    int total = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        const Phantom ph = make_phantom(cfg.src_side, rng, 12);
        const SynthPair pair = synth_pair(ph.bright, ph.mask, cfg, rng);
        const MatchMap &c = pair.gt.coarse;
        const MatchMap &f = pair.gt.fine;
        for (int i = 0; i < c.conf.rows; ++i) {
            int row = 0;
            for (int j = 0; j < c.conf.cols; ++j) {
                if (c.conf(i, j) > 0) {
                    ++row;
                    CHECK(c.aux1(i, j) * c.aux1(i, j) + c.aux2(i, j) * c.aux2(i, j) == doctest::Approx(1.0));
                } else {
                    CHECK(c.aux1(i, j) == 0.0);
                    CHECK(c.aux2(i, j) == 0.0);
                }
            }
            CHECK(row <= 4);
        }
        for (int u = 0; u < f.conf.rows; ++u) {
            int row = 0;
            for (int v = 0; v < f.conf.cols; ++v) {
                if (!(f.conf(u, v) > 0)) continue;
                ++row;
                CHECK(f.aux1(u, v) > -0.5);
                CHECK(f.aux1(u, v) <= 0.5);
                CHECK(f.aux2(u, v) > -0.5);
                CHECK(f.aux2(u, v) <= 0.5);
                ++total;
                consistent += c.conf(parent_cell(u, f.grid), parent_cell(v, f.grid)) > 0;
            }
            CHECK(row <= 1);
        }
        // The recorded draws explain the ground-truth matrix.
        const double expect = wrap_angle(pair.params_fixed.theta - pair.params_moving.theta);
        CHECK(std::abs(wrap_angle(decompose_params(pair.gt_affine).theta - expect)) < 1e-9);
    }
    REQUIRE(total > 0);
    MESSAGE("fine positives whose parent pair is a coarse positive: " << consistent << "/" << total);
}

TEST_CASE("zero ranges reproduce the source crop") {
    SynthConfig cfg = small_config();
    cfg.theta_min_deg = cfg.theta_max_deg = 0.0;
    cfg.trans_range = 0.0;
    Rng rng(3);
    const Phantom ph = make_phantom(cfg.src_side, rng, 12);
    const SynthPair pair = synth_pair(ph.bright, ph.mask, cfg, rng);
    CHECK(pair.moving == pair.fixed);
    CHECK(pair.moving == center_crop(ph.bright, cfg.out_side));
    CHECK(max_abs_diff(pair.gt_affine, Mat3::identity(Role::Affine, cfg.out_side)) < 1e-12);
}

TEST_CASE("seeded synthesis is bit-identical") {
    const SynthConfig cfg = small_config();
    auto make = [&]() {
        Rng rng(99);
        const Phantom ph = make_phantom(cfg.src_side, rng, 12);
        return synth_pair(ph.bright, ph.mask, cfg, rng);
    };
    const SynthPair a = make();
    const SynthPair b = make();
    CHECK(a.moving == b.moving);
    CHECK(a.mask_fixed == b.mask_fixed);
    CHECK(a.gt.coarse == b.gt.coarse);
    CHECK(a.gt.fine == b.gt.fine);
    CHECK(a.gt_affine.data() == b.gt_affine.data());
}

TEST_CASE("config validation and support") {
    SynthConfig cfg;
    CHECK_NOTHROW(cfg.check_support());
    cfg.trans_range = 100;
    try {
        cfg.check_support();
        FAIL("expected OutOfSupport");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::OutOfSupport);
    }
    SynthConfig bad;
    bad.fine_grid = 12;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = SynthConfig{};
    bad.out_side = 200;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("one-to-multi detection") {
    MatchMap m(MapLevel::Coarse, 2, 4);
    m.conf(0, 0) = 1;
    m.conf(1, 1) = 1;
    CHECK_FALSE(has_one_to_multi(m));
    m.conf(2, 1) = 1;
    CHECK(has_one_to_multi(m));
}
