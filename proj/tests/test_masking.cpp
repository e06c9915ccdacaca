#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "tsrnet/masking.hpp"
#include "tsrnet/rng.hpp"

using namespace tsrnet;

TEST_CASE("default ratios give exact cardinalities at default sizes") {
    MaskSpec m = sample_masks(1000, 12, 118, MaskRatios{}, 42);
    REQUIRE(m.time_mask.size() == 12);
    for (const auto& lead : m.time_mask) {
        CHECK(lead.size() == 300);   // floor(0.30 * 1000)
        std::set<int> uniq(lead.begin(), lead.end());
        CHECK(uniq.size() == lead.size());
        CHECK(*uniq.begin() >= 0);
        CHECK(*uniq.rbegin() < 1000);
    }
    CHECK(m.stripe_mask.size() == 23);   // floor(0.20 * 118)
    std::set<int> uniq(m.stripe_mask.begin(), m.stripe_mask.end());
    CHECK(uniq.size() == m.stripe_mask.size());
}

TEST_CASE("cardinality is exact across many seeds and sizes") {
    Rng meta(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int D = 10 + static_cast<int>(meta.bounded(500));
        const int W = 5 + static_cast<int>(meta.bounded(200));
        const double tr = meta.uniform(0.0, 1.0);
        const double sr = meta.uniform(0.0, 1.0);
        MaskSpec m = sample_masks(D, 3, W, MaskRatios{tr, sr, 1}, meta.next_u64());
        for (const auto& lead : m.time_mask)
            CHECK(static_cast<int>(lead.size()) == mask_count(tr, D));
        CHECK(static_cast<int>(m.stripe_mask.size()) == mask_count(sr, W));
    }
}

TEST_CASE("same seed reproduces identical masks, different seeds differ") {
    MaskSpec a = sample_masks(500, 4, 60, MaskRatios{}, 99);
    MaskSpec b = sample_masks(500, 4, 60, MaskRatios{}, 99);
    CHECK(a.time_mask == b.time_mask);
    CHECK(a.stripe_mask == b.stripe_mask);
    MaskSpec c = sample_masks(500, 4, 60, MaskRatios{}, 100);
    CHECK(a.time_mask != c.time_mask);
}

TEST_CASE("leads draw independent time masks but share one stripe mask") {
    MaskSpec m = sample_masks(1000, 12, 118, MaskRatios{}, 7);
    bool all_same = true;
    for (std::size_t n = 1; n < m.time_mask.size(); ++n)
        if (m.time_mask[n] != m.time_mask[0]) all_same = false;
    CHECK_FALSE(all_same);

    // stripe zeroing must hit the same frames in every lead
    Tensor spec({12, 33, 118});
    spec.fill(1.0);
    Tensor masked = apply_stripe_mask(spec, m);
    for (int frame : m.stripe_mask)
        for (int lead = 0; lead < 12; ++lead)
            for (int f = 0; f < 33; ++f)
                CHECK(masked.at(lead, f, frame) == 0.0);
}

TEST_CASE("per-position mask probability is close to the ratio") {
    // D=10, ratio 0.30 masks exactly 3 of 10 points; over many seeds each
    // position should be hit about 30% of the time.
    const int D = 10, trials = 10000;
    std::vector<int> hits(static_cast<std::size_t>(D), 0);
    for (int s = 0; s < trials; ++s) {
        auto mask = sample_time_mask(D, 1, 0.30, static_cast<std::uint64_t>(s) + 1);
        for (int idx : mask[0]) ++hits[static_cast<std::size_t>(idx)];
    }
    for (int i = 0; i < D; ++i) {
        const double p = static_cast<double>(hits[static_cast<std::size_t>(i)]) / trials;
        CHECK(std::fabs(p - 0.30) < 0.02);
    }
}

TEST_CASE("applying a mask zeroes exactly the chosen positions") {
    Rng rng(13);
    Tensor ecg({50, 3});
    for (std::size_t i = 0; i < ecg.size(); ++i) ecg[i] = 1.0 + rng.normal();
    MaskSpec m = sample_masks(50, 3, 20, MaskRatios{0.3, 0.2, 1}, 17);
    Tensor masked = apply_time_mask(ecg, m);
    for (int lead = 0; lead < 3; ++lead) {
        std::set<int> hit(m.time_mask[static_cast<std::size_t>(lead)].begin(),
                          m.time_mask[static_cast<std::size_t>(lead)].end());
        for (int i = 0; i < 50; ++i) {
            if (hit.count(i))
                CHECK(masked.at(i, lead) == 0.0);
            else
                CHECK(masked.at(i, lead) == ecg.at(i, lead));   // bit-exact copy
        }
    }
    // applying twice changes nothing further
    Tensor again = apply_time_mask(masked, m);
    for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i] == masked[i]);
}

TEST_CASE("ratio endpoints 0 and 1") {
    MaskSpec none = sample_masks(40, 2, 15, MaskRatios{0.0, 0.0, 1}, 3);
    CHECK(none.time_mask[0].empty());
    CHECK(none.stripe_mask.empty());

    MaskSpec all = sample_masks(40, 2, 15, MaskRatios{1.0, 1.0, 1}, 3);
    for (const auto& lead : all.time_mask) CHECK(lead.size() == 40);
    CHECK(all.stripe_mask.size() == 15);
}

TEST_CASE("block stripes keep the exact cardinality and form runs") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto frames = sample_stripe_mask(118, 0.20, seed, 4);
        CHECK(frames.size() == 23);
        CHECK(std::is_sorted(frames.begin(), frames.end()));
    }
}

TEST_CASE("invalid arguments are rejected") {
    CHECK_THROWS_AS(sample_time_mask(10, 1, 1.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_stripe_mask(10, -0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_stripe_mask(10, 0.5, 1, 0), std::invalid_argument);

    MaskSpec bad;
    bad.time_mask = {{99}};
    Tensor ecg({10, 1});
    CHECK_THROWS_AS(apply_time_mask(ecg, bad), std::out_of_range);
}

TEST_CASE("step seeds are distinct across epochs and batches") {
    std::set<std::uint64_t> seen;
    for (int e = 0; e < 50; ++e)
        for (int b = 0; b < 50; ++b)
            seen.insert(step_mask_seed(42, e, b));
    CHECK(seen.size() == 2500);
    CHECK(step_mask_seed(42, 3, 7) == step_mask_seed(42, 3, 7));
    CHECK(step_mask_seed(42, 3, 7) != step_mask_seed(43, 3, 7));
}
