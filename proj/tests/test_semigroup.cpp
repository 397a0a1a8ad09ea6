#include "clt/error.hpp"
#include "clt/functionals.hpp"
#include "clt/semigroup.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace clt;

namespace {

const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

GridDensity standardized(Family f, std::vector<double> p, std::size_t points = 2048) {
    return make_density({f, std::move(p), true, {}}, GridSpec::lattice(-12, 28, points));
}

}  // namespace

TEST(Schedule, Geometric) {
    const auto s = geometric_schedule(1e-3, 1.25, 40.0);
    EXPECT_DOUBLE_EQ(s.times.front(), 1e-3);
    EXPECT_DOUBLE_EQ(s.cutoff, s.times.back());
    EXPECT_GE(s.cutoff, 40.0 * (1 - 1e-12));
    for (std::size_t i = 1; i < s.times.size(); ++i) EXPECT_GT(s.times[i], s.times[i - 1]);
    EXPECT_THROW(geometric_schedule(0.0, 1.2, 10.0), Error);
    EXPECT_THROW(geometric_schedule(1e-3, 1.0, 10.0), Error);
}

TEST(Integrate, ExactOnPowerLawPlusConstantHead) {
    // g = t^-0.5 on [0, T]: the head fit is exact, trapezoid error is controlled.
    const auto s = geometric_schedule(1e-4, 1.02, 1.0);
    std::vector<double> g;
    for (double t : s.times) g.push_back(1.0 / std::sqrt(t));
    const auto q = integrate_flow(s.times, g);
    EXPECT_NEAR(q.head, 2.0 * std::sqrt(1e-4), 1e-12);
}

TEST(Integrate, ExponentialTail) {
    const auto s = geometric_schedule(1e-3, 1.01, 5.0);
    std::vector<double> g;
    for (double t : s.times) g.push_back(std::exp(-2.0 * t));
    const auto q = integrate_flow(s.times, g);
    EXPECT_NEAR(q.total, 0.5, 1e-4);
    EXPECT_NEAR(q.tail, std::exp(-10.0) / 2.0, 1e-6);
}

TEST(Flow, GaussianFixedPoint) {
    const auto z = standardized(Family::gaussian, {0, 1});
    const auto tr = fisher_along_flow(z, geometric_schedule());
    for (double j : tr.fisher_values) EXPECT_NEAR(j, 1.0, 1e-6);
    EXPECT_NEAR(tr.entropy_gap, 0.0, 1e-6);
    EXPECT_NEAR(debruijn_gap(z, geometric_schedule()), 0.0, 1e-6);
}

TEST(Flow, StandardizedUniformClosedForm) {
    const auto u = standardized(Family::uniform, {0, 1}, 4096);
    const auto tr = fisher_along_flow(u, geometric_schedule());
    EXPECT_NEAR(tr.entropy_gap, kHalfLog2PiE - 0.5 * std::log(12.0), 1e-3);
    for (double j : tr.fisher_values) EXPECT_GE(j, 1.0 - 1e-6);
    EXPECT_LT(std::abs(tr.fisher_values.back() - 1.0), 1e-5);
}

TEST(Flow, AgreesWithDirectEntropy) {
    const std::vector<GridDensity> battery = {
        standardized(Family::gaussian_mixture, {0.5, -2, 1, 0.5, 2, 1}),
        ou_evolve(standardized(Family::exponential, {1}), 0.01),
        ou_evolve(standardized(Family::uniform, {0, 1}), 0.01),
    };
    for (const auto& d : battery) {
        const double gap = debruijn_gap(d, geometric_schedule());
        EXPECT_NEAR(gap, kHalfLog2PiE - entropy(d), 1e-3);
        const double fine = debruijn_gap(d, geometric_schedule(1e-3, std::sqrt(1.05)));
        EXPECT_LT(std::abs(fine - gap), 2e-4);
    }
}

TEST(Flow, Errors) {
    const auto wide = make_density({Family::gaussian, {0, 2}, false, {}}, GridSpec(-30, 30, 2048));
    try {
        fisher_along_flow(wide, geometric_schedule());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::VarianceNotUnit);
    }
    const auto u = ou_evolve(standardized(Family::uniform, {0, 1}), 0.01);
    try {
        fisher_along_flow(u, geometric_schedule(1e-3, 1.05, 0.5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TailNotConverged);
    }
    try {
        fisher_along_flow(u, FlowSchedule{{0.1, 0.05}, 0.05, 1e-5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NegativeTime);
    }
}

TEST(Monotonicity, GaussianAndDiagonal) {
    const DistributionSpec g{Family::gaussian, {0, 1}, true, {}};
    const auto r = monotonicity_via_flow(g, 1, 3, geometric_schedule(), {12.0, 1024, 0.01});
    EXPECT_TRUE(r.fisher_dominance);
    EXPECT_NEAR(r.entropy_difference, 0.0, 1e-6);
    const DistributionSpec u{Family::uniform, {0, 1}, true, {}};
    const auto d = monotonicity_via_flow(u, 2, 2, geometric_schedule(), {12.0, 1024, 0.01});
    EXPECT_EQ(d.entropy_difference, 0.0);
}

TEST(Monotonicity, SmoothedUniformMatchesDirect) {
    const DistributionSpec u{Family::uniform, {0, 1}, true, {}};
    const GridPolicy policy{12.0, 2048, 0.01};
    const auto r = monotonicity_via_flow(u, 1, 2, geometric_schedule(), policy);
    EXPECT_TRUE(r.fisher_dominance);
    const auto fam = build_family(u, 2, policy);
    const double direct = entropy(rescale(fam.sum(2), 1 / std::sqrt(2.0))) - entropy(fam.sum(1));
    EXPECT_NEAR(r.entropy_difference, direct, 1e-3);
    EXPECT_GT(r.entropy_difference, 0.0);
    for (std::size_t i = 0; i < r.times.size(); ++i) EXPECT_LE(r.fisher_n[i], r.fisher_m[i] + 1e-6);
}

TEST(Csv, TraceLayout) {
    const auto tr = fisher_along_flow(standardized(Family::gaussian, {0, 1}, 512), geometric_schedule(1e-2, 2.0, 1.0));
    const auto csv = to_csv(tr);
    EXPECT_EQ(csv.rfind("t,fisher\n", 0), 0u);
    EXPECT_NE(csv.find("# entropy_gap="), std::string::npos);
}
