#include "clt/density.hpp"
#include "clt/error.hpp"
#include "clt/functionals.hpp"
#include "clt/oracle_mc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace clt;

namespace {

const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
const DistributionSpec kNormal{Family::gaussian, {0, 1}, false, {}};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
double variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

bool covers(const EstimateWithCI& e, double truth) { return std::abs(e.point - truth) <= e.half_width_99; }

template <typename E>
void expect_error(ErrorCode code, E&& fn) {
    try {
        fn();
        FAIL() << "no error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code);
    }
}

}  // namespace

TEST(Rng, Deterministic) {
    Rng a(7), b(7), c(8);
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        EXPECT_EQ(u, b.uniform());
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
    EXPECT_NE(a.normal(), c.normal());
}

TEST(Sample, Moments) {
    const auto g = sample(kNormal, 1000000, 1);
    EXPECT_LT(std::abs(mean(g.values)), 4.0 / 1000.0);
    const auto u = sample({Family::uniform, {0, 1}, false, {}}, 1000000, 2);
    EXPECT_NEAR(variance(u.values), 1.0 / 12.0, 1e-3);
    for (auto spec : {DistributionSpec{Family::exponential, {1}, true, {}},
                      DistributionSpec{Family::gaussian_mixture, {0.5, -2, 1, 0.5, 2, 1}, true, {}},
                      DistributionSpec{Family::triangular, {0, 0.2, 1}, true, {}}}) {
        const auto s = sample(spec, 200000, 3);
        EXPECT_NEAR(mean(s.values), 0.0, 0.015) << family_name(spec.family);
        EXPECT_NEAR(variance(s.values), 1.0, 0.03) << family_name(spec.family);
    }
}

TEST(Sample, TabulatedInverseCdf) {
    const DistributionSpec tab{Family::tabulated, {}, false, parse_table("0 0\n1 2\n")};  // density 2x on [0,1]
    const auto s = sample(tab, 200000, 4);
    EXPECT_NEAR(mean(s.values), 2.0 / 3.0, 3e-3);
    for (double x : s.values) ASSERT_TRUE(x >= 0.0 && x <= 1.0);
}

TEST(Sample, OuTimeKeepsUnitVariance) {
    const auto s = sample({Family::uniform, {0, 1}, true, {}}, 200000, 5, 0.5);
    EXPECT_NEAR(variance(s.values), 1.0, 0.02);
    EXPECT_EQ(s.ou_time, 0.5);
}

TEST(Sample, SeedDeterminism) {
    const DistributionSpec mix{Family::gaussian_mixture, {0.5, -2, 1, 0.5, 2, 1}, true, {}};
    EXPECT_EQ(sample(mix, 10000, 11).values, sample(mix, 10000, 11).values);
    EXPECT_NE(sample(mix, 10000, 11).values, sample(mix, 10000, 12).values);
    const auto a = sample_sum_pairs(mix, 1, 2, 50000, 3), b = sample_sum_pairs(mix, 1, 2, 50000, 3);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.y, b.y);
    const auto ea = mc_maxcorr(a.x, a.y, 64), eb = mc_maxcorr(b.x, b.y, 64);
    EXPECT_EQ(ea.point, eb.point);
    EXPECT_EQ(ea.half_width_99, eb.half_width_99);
}

TEST(Entropy, ClosedFormsAtFullSize) {
    EXPECT_TRUE(covers(mc_entropy(sample(kNormal, 1000000, 21)), kHalfLog2PiE));
    EXPECT_TRUE(covers(mc_entropy(sample({Family::uniform, {0, 1}, false, {}}, 1000000, 22)), 0.0));
    // U1 + U2 on [0, 2]: drawn directly as a sum.
    const auto p = sample_sum_pairs({Family::uniform, {0, 1}, false, {}}, 1, 2, 1000000, 23);
    SampleSet tri;
    tri.values = p.y;
    EXPECT_TRUE(covers(mc_entropy(tri), 0.5));
}

TEST(Entropy, BiasShrinksUnderDoubling) {
    const auto small = mc_entropy(sample(kNormal, 100000, 31));
    const auto big = mc_entropy(sample(kNormal, 200000, 31));
    EXPECT_LE(std::abs(big.point - kHalfLog2PiE), std::abs(small.point - kHalfLog2PiE) + small.half_width_99);
}

TEST(Entropy, Errors) {
    expect_error(ErrorCode::TooFewSamples, [] { mc_entropy(sample(kNormal, 5000, 1)); });
}

TEST(Fisher, GaussianTruths) {
    EXPECT_TRUE(covers(mc_fisher(sample(kNormal, 1000000, 41)), 1.0));
    const auto wide = mc_fisher(sample({Family::gaussian, {0, 2}, false, {}}, 1000000, 42));
    EXPECT_TRUE(covers(wide, 0.25)) << wide.point << " +- " << wide.half_width_99;
}

TEST(Fisher, SmoothedUniformAgainstGrid) {
    const DistributionSpec u{Family::uniform, {0, 1}, true, {}};
    const auto s = sample(u, 1000000, 43, 0.05);
    const auto j = mc_fisher(s);
    const GridSpec g = GridSpec::lattice(-12, 12, 4096);
    const auto base = ou_evolve(make_density(u, g), 0.05);
    const double j_grid = fisher_information(convolve(base, make_density({Family::gaussian, {0, j.bandwidth}, false, {}}, g)));
    EXPECT_LE(std::abs(j.smoothed_point - j_grid), j.smoothed_half_width_99);
    EXPECT_NEAR(j.point, fisher_information(base), 3.0 * j.half_width_99);
}

TEST(Fisher, Errors) {
    const auto s = sample(kNormal, 20000, 1);
    expect_error(ErrorCode::BandwidthNonPositive, [&] { mc_fisher(s, 0.0); });
    expect_error(ErrorCode::TooFewSamples, [] { mc_fisher(sample(kNormal, 500, 1)); });
}

TEST(MaxCorr, DistributionFreeTargets) {
    const auto g = sample_sum_pairs(kNormal, 1, 2, 1000000, 51);
    EXPECT_TRUE(covers(mc_maxcorr(g.x, g.y), 0.5));
    const auto e = sample_sum_pairs({Family::exponential, {1}, true, {}}, 2, 3, 1000000, 52);
    EXPECT_TRUE(covers(mc_maxcorr(e.x, e.y), 2.0 / 3.0));
    const auto x = sample(kNormal, 100000, 53).values;
    EXPECT_NEAR(mc_maxcorr(x, x, 64).point, 1.0, 1e-3);
}

TEST(MaxCorr, Errors) {
    const auto p = sample_sum_pairs(kNormal, 1, 2, 100000, 1);
    expect_error(ErrorCode::NonPositiveParameter, [&] { mc_maxcorr(p.x, p.y, 16); });
    auto shorter = p.y;
    shorter.pop_back();
    expect_error(ErrorCode::GridMismatch, [&] { mc_maxcorr(p.x, shorter, 64); });
    const auto few = sample_sum_pairs(kNormal, 1, 2, 8000, 1);
    expect_error(ErrorCode::TooFewSamples, [&] { mc_maxcorr(few.x, few.y, 64); });
}

// 99% intervals should contain the truth in at least 95 of 100 seeded runs.
// ACE binning bias is about -2e-3 at 64 bins for this N, so 128.
TEST(Calibration, GaussianGroundTruth) {
    constexpr int kRuns = 100;
    constexpr std::size_t kCount = 100000;
    int h_hits = 0, j_hits = 0, r_hits = 0;
    for (int r = 0; r < kRuns; ++r) {
        const auto s = sample(kNormal, kCount, 1000 + r);
        h_hits += covers(mc_entropy(s), kHalfLog2PiE);
        j_hits += covers(mc_fisher(s), 1.0);
        const auto p = sample_sum_pairs(kNormal, 1, 2, kCount, 5000 + r);
        r_hits += covers(mc_maxcorr(p.x, p.y, 128), 0.5);
    }
    RecordProperty("entropy_coverage", h_hits);
    RecordProperty("fisher_coverage", j_hits);
    RecordProperty("maxcorr_coverage", r_hits);
    EXPECT_GE(h_hits, 95);
    EXPECT_GE(j_hits, 95);
    EXPECT_GE(r_hits, 95);
    std::printf("coverage entropy %d fisher %d maxcorr %d of %d\n", h_hits, j_hits, r_hits, kRuns);
}

TEST(Csv, Rows) {
    EXPECT_EQ(mc_csv_header(), "quantity,point,ci99,n_samples,seed\n");
    EstimateWithCI e{0.5, 0.001, 1000000};
    EXPECT_EQ(mc_csv_row("maxcorr", e, 9), "maxcorr,0.5,0.001,1000000,9\n");
}
