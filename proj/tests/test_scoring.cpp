#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "tsrnet/loss.hpp"
#include "tsrnet/peaks.hpp"
#include "tsrnet/rng.hpp"
#include "tsrnet/scoring.hpp"

using namespace tsrnet;

namespace {

Tensor random_tensor(int d, int n, Rng& rng, double scale = 1.0) {
    Tensor t({d, n});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

// Brute-force oracle: average the per-point loss terms over the masked rows.
double peak_error_oracle(const Tensor& y, const Tensor& sigma, const Tensor& x,
                         const std::vector<int>& indices) {
    double sum = 0.0;
    for (int idx : indices)
        for (int n = 0; n < y.dim(1); ++n) {
            const double r = y.at(idx, n) - x.at(idx, n);
            sum += std::exp(-sigma.at(idx, n)) * r * r + sigma.at(idx, n);
        }
    return sum / (static_cast<double>(indices.size()) * y.dim(1));
}

} // namespace

TEST_CASE("full mask reproduces the unrestricted loss") {
    Rng rng(2);
    const int D = 40, N = 3;
    Tensor y = random_tensor(D, N, rng), sigma = random_tensor(D, N, rng, 0.5),
           x = random_tensor(D, N, rng);
    PeakMask full;
    for (int i = 0; i < D; ++i) full.indices.push_back(i);
    CHECK_THAT(peak_error(y, sigma, x, full),
               Catch::Matchers::WithinRel(restoration_loss(y, sigma, x).total, 1e-12));
}

TEST_CASE("two-row mask on a hand example") {
    // sigma = 0 so terms are plain squared residuals: rows {1,2} of
    // residuals [1,5,9,2] give (25 + 81) / 2 = 53... single lead
    Tensor x({4, 1}), y({4, 1}), sigma({4, 1});
    const double res[4] = {1.0, 5.0, 9.0, 2.0};
    for (int i = 0; i < 4; ++i) y.at(i, 0) = x.at(i, 0) + res[i];
    PeakMask m;
    m.indices = {1, 2};
    CHECK_THAT(peak_error(y, sigma, x, m), Catch::Matchers::WithinAbs(53.0, 1e-12));
}

TEST_CASE("random masks match the brute-force oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int D = 20 + static_cast<int>(rng.bounded(80));
        const int N = 1 + static_cast<int>(rng.bounded(4));
        Tensor y = random_tensor(D, N, rng), sigma = random_tensor(D, N, rng, 0.6),
               x = random_tensor(D, N, rng);
        PeakMask m;
        m.indices = rng.sample_without_replacement(D, 1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(D))));
        CHECK_THAT(peak_error(y, sigma, x, m),
                   Catch::Matchers::WithinRel(peak_error_oracle(y, sigma, x, m.indices), 1e-10));
    }
}

TEST_CASE("empty mask falls back to the full-signal score") {
    Rng rng(9);
    Tensor y = random_tensor(10, 2, rng), sigma = random_tensor(10, 2, rng),
           x = random_tensor(10, 2, rng);
    PeakMask empty;
    CHECK(peak_error(y, sigma, x, empty) == restoration_loss(y, sigma, x).total);
}

TEST_CASE("out-of-range mask index is rejected") {
    Tensor t({4, 1});
    PeakMask m;
    m.indices = {4};
    CHECK_THROWS_AS(peak_error(t, t, t, m), std::out_of_range);
}

TEST_CASE("perfectly separated scores give AUC 1") {
    std::vector<std::pair<bool, double>> s = {
        {false, 0.1}, {false, 0.2}, {false, 0.3}, {true, 0.9}, {true, 1.1}};
    CHECK(roc_auc(s).auc == 1.0);
}

TEST_CASE("inverted separation gives AUC 0 and identical scores give 0.5") {
    std::vector<std::pair<bool, double>> inv = {{true, 0.1}, {false, 0.9}};
    CHECK(roc_auc(inv).auc == 0.0);
    std::vector<std::pair<bool, double>> tied = {
        {true, 0.5}, {false, 0.5}, {true, 0.5}, {false, 0.5}};
    CHECK(roc_auc(tied).auc == 0.5);
}

TEST_CASE("small mixed example has AUC 0.75") {
    // positives {2, 4}, negatives {1, 3}: pairs won 3 of 4
    std::vector<std::pair<bool, double>> s = {
        {false, 1.0}, {true, 2.0}, {false, 3.0}, {true, 4.0}};
    CHECK_THAT(roc_auc(s).auc, Catch::Matchers::WithinAbs(0.75, 1e-12));
}

TEST_CASE("trapezoid area equals the rank statistic, ties included") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<bool, double>> s;
        const int n = 10 + static_cast<int>(rng.bounded(60));
        for (int i = 0; i < n; ++i) {
            // quantized scores force frequent ties
            const double score = std::floor(rng.uniform(0.0, 8.0)) / 4.0;
            s.emplace_back(rng.uniform(0.0, 1.0) < 0.4, score);
        }
        // guarantee both classes
        s.emplace_back(true, 0.5);
        s.emplace_back(false, 0.5);
        RocResult r = roc_auc(s);
        CHECK_THAT(trapezoid_auc(r.points), Catch::Matchers::WithinAbs(r.auc, 1e-9));
        CHECK(r.points.front().fpr == 0.0);
        CHECK(r.points.front().tpr == 0.0);
        CHECK(r.points.back().fpr == 1.0);
        CHECK(r.points.back().tpr == 1.0);
    }
}

TEST_CASE("AUC is invariant under strictly increasing transforms") {
    Rng rng(33);
    std::vector<std::pair<bool, double>> s;
    for (int i = 0; i < 50; ++i) s.emplace_back(i % 3 == 0, rng.normal());
    const double base = roc_auc(s).auc;
    auto t = s;
    for (auto& [lab, score] : t) score = std::exp(2.0 * score) + 5.0;
    CHECK_THAT(roc_auc(t).auc, Catch::Matchers::WithinAbs(base, 1e-12));
}

TEST_CASE("single-class input is rejected") {
    std::vector<std::pair<bool, double>> only_pos = {{true, 1.0}, {true, 2.0}};
    CHECK_THROWS_AS(roc_auc(only_pos), std::invalid_argument);
    CHECK_THROWS_AS(roc_auc({}), std::invalid_argument);
}

TEST_CASE("report round trip preserves scores and labels") {
    std::vector<RecordScore> scores = {
        {"rec_a", Label::normal, 0.125},
        {"rec_b", Label::abnormal, 2.7182818284590451},
        {"rec_c", Label::normal, -0.5},
        {"rec_d", Label::abnormal, 1e-9},
    };
    ScoreReport report = assemble_report(scores, "fp123");
    CHECK(report.config_fingerprint == "fp123");
    CHECK(report.auc == 0.75);

    const auto dir = std::filesystem::temp_directory_path() / "tsrnet_scoring_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "report.tsv";
    save_report(path, report);
    auto loaded = load_report_scores(path);
    REQUIRE(loaded.size() == scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        CHECK(loaded[i].record_id == scores[i].record_id);
        CHECK(loaded[i].label == scores[i].label);
        CHECK(loaded[i].score == scores[i].score);   // 17 digits round-trips doubles
    }
    std::filesystem::remove_all(dir);
}
