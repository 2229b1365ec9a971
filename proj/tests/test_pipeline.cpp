#include <doctest.h>

#include <algorithm>

#include "ddreg/error.hpp"
#include "ddreg/pipeline.hpp"
#include "ddreg/synthmap.hpp"

using namespace ddreg;

namespace {

SynthPair make_pair(std::uint64_t seed) {
    SynthConfig cfg;
    Rng rng(seed);
    const Phantom ph = make_phantom(cfg.src_side, rng);
    return synth_pair(ph.bright, ph.mask, cfg, rng);
}

} // namespace

TEST_CASE("clean scores recover the transform") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SynthPair pair = make_pair(seed);
        Rng rng(seed + 100);
        const MatcherOutput out = mock_matcher(pair.gt.coarse, pair.gt.fine, Corruption{}, rng);
        const CaseResult r = register_case("c", out, pair.gt_affine, PipelineConfig{});
        REQUIRE(r.fit.has_value());
        CHECK_FALSE(r.failure.has_value());
        CHECK(r.record.corner_px < 1e-4);
        CHECK(r.record.theta_err_deg < 1e-4);
        CHECK(r.record.n_matches == static_cast<int>(r.inter.correspondences.size()));
        CHECK(r.record.n_matches > 0);
        CHECK(r.inter.angles.removed.empty());
    }
}

TEST_CASE("dropping every positive leaves nothing to fit") {
    const SynthPair pair = make_pair(4);
    Corruption c;
    c.drop_rate = 1.0;
    Rng rng(5);
    const MatcherOutput out = mock_matcher(pair.gt.coarse, pair.gt.fine, c, rng);
    const CaseResult r = register_case("empty", out, pair.gt_affine, PipelineConfig{});
    CHECK_FALSE(r.fit.has_value());
    REQUIRE(r.failure.has_value());
    CHECK(*r.failure == Errc::NoMatches);
    CHECK(r.record.excluded);
    CHECK_FALSE(r.record.success_5());
}

TEST_CASE("more drops mean fewer matches") {
    const double rates[3] = {0.0, 0.3, 0.6};
    double mean_matches[3] = {0, 0, 0};
    for (int k = 0; k < 3; ++k) {
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            const SynthPair pair = make_pair(seed + 10);
            Corruption c;
            c.drop_rate = rates[k];
            Rng rng(seed);
            const MatcherOutput out = mock_matcher(pair.gt.coarse, pair.gt.fine, c, rng);
            mean_matches[k] += register_case("d", out, pair.gt_affine, PipelineConfig{}).record.n_matches;
        }
    }
    CHECK(mean_matches[1] < mean_matches[0]);
    CHECK(mean_matches[2] < mean_matches[1]);
}

TEST_CASE("angle filter removes spurious pairs with a wrong angle") {
    const SynthPair pair = make_pair(6);
    Corruption c;
    c.spurious_rate = 0.3;
    c.spurious_angle_offset_deg = 60.0;
    Rng rng(7);
    const MatcherOutput out = mock_matcher(pair.gt.coarse, pair.gt.fine, c, rng);
    PipelineConfig cfg;
    const CaseResult with = register_case("f", out, pair.gt_affine, cfg);
    cfg.z_filter = false;
    const CaseResult without = register_case("n", out, pair.gt_affine, cfg);
    CHECK_FALSE(with.inter.angles.removed.empty());
    REQUIRE(with.fit.has_value());
    CHECK(with.record.corner_px < 1.0);
    CHECK(with.record.corner_px <= without.record.corner_px);
}

TEST_CASE("score threshold mode selects on raw logits") {
    const SynthPair pair = make_pair(8);
    Rng rng(9);
    const MatcherOutput out = mock_matcher(pair.gt.coarse, pair.gt.fine, Corruption{}, rng);
    PipelineConfig cfg;
    cfg.score_threshold = 5.0;
    const CaseResult r = register_case("s", out, pair.gt_affine, cfg);
    REQUIRE(r.fit.has_value());
    CHECK(r.record.corner_px < 1e-4);
    cfg.score_threshold = 50.0;
    CHECK(*register_case("s", out, pair.gt_affine, cfg).failure == Errc::NoMatches);
}

TEST_CASE("pipeline config validation") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.coarse_tau = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = PipelineConfig{};
    cfg.sinkhorn_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = PipelineConfig{};
    cfg.z_k = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
