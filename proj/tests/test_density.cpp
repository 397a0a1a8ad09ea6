#include "clt/density.hpp"
#include "clt/error.hpp"
#include "clt/functionals.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace clt;

namespace {

double normal_pdf(double x, double mu, double var) {
    return std::exp(-(x - mu) * (x - mu) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

double sup_diff(const GridDensity& d, const std::function<double(double)>& f) {
    double worst = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) worst = std::max(worst, std::abs(d.values[i] - f(d.grid.x(i))));
    return worst;
}

DistributionSpec gaussian(double mu, double sd) { return {Family::gaussian, {mu, sd}, false, {}}; }
DistributionSpec uniform01() { return {Family::uniform, {0.0, 1.0}, false, {}}; }

void expect_valid(const GridDensity& d) {
    for (double v : d.values) ASSERT_GE(v, 0.0);
    EXPECT_NEAR(d.integral(), 1.0, 1e-10);
}

}  // namespace

TEST(MakeDensity, StandardNormalPointwise) {
    const auto d = make_density(gaussian(0, 1), GridSpec(-10, 10, 1024));
    EXPECT_LT(sup_diff(d, [](double x) { return normal_pdf(x, 0, 1); }), 1e-12);
    expect_valid(d);
}

TEST(MakeDensity, UniformInsideAndOutside) {
    const auto d = make_density(uniform01(), GridSpec::lattice(-2, 3, 1024));
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        const double x = d.grid.x(i);
        if (x > d.grid.step() && x < 1.0 - d.grid.step()) {
            EXPECT_NEAR(d.values[i], 1.0, 1e-12);
        }
        if (x < -d.grid.step() || x > 1.0 + d.grid.step()) {
            EXPECT_EQ(d.values[i], 0.0);
        }
    }
    expect_valid(d);
    EXPECT_FALSE(d.smooth);
}

TEST(MakeDensity, MixtureMoments) {
    const DistributionSpec mix{Family::gaussian_mixture, {0.5, -2, 1, 0.5, 2, 1}, false, {}};
    const auto m = moments(make_density(mix, GridSpec(-15, 15, 4096)));
    EXPECT_NEAR(m.mean, 0.0, 1e-6);
    EXPECT_NEAR(m.variance, 5.0, 1e-6);
}

TEST(MakeDensity, StandardizedFamiliesHaveUnitVariance) {
    for (auto spec : {DistributionSpec{Family::uniform, {0, 1}, true, {}},
                      DistributionSpec{Family::exponential, {2.0}, true, {}},
                      DistributionSpec{Family::triangular, {0, 0.3, 1}, true, {}},
                      DistributionSpec{Family::gaussian_mixture, {0.3, -1, 0.5, 0.7, 2, 1}, true, {}}}) {
        const GridSpec g = GridSpec::lattice(-12, 30, 8192);
        const auto m = moments(make_density(spec, g));
        // Cell averages across a jump shift low moments by O(h^2).
        const double tol = std::max(1e-8, g.step() * g.step());
        EXPECT_NEAR(m.mean, 0.0, tol) << family_name(spec.family);
        EXPECT_NEAR(m.variance, 1.0, tol) << family_name(spec.family);
    }
}

TEST(MakeDensity, Errors) {
    EXPECT_THROW(
        {
            try {
                make_density(gaussian(0, 1), GridSpec(-2, 2, 256));
            } catch (const Error& e) {
                EXPECT_EQ(e.code(), ErrorCode::GridTooNarrow);
                throw;
            }
        },
        Error);
    try {
        make_density(gaussian(0, -1), GridSpec(-10, 10, 256));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonPositiveParameter);
    }
    try {
        parse_family("cauchy");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownFamily);
    }
    try {
        GridSpec(-1, 1, 1000);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidGrid);
    }
}

TEST(Normalize, IdempotentAndScaleFree) {
    const auto d = make_density(gaussian(0.3, 1.2), GridSpec(-12, 12, 1024));
    const auto once = normalize(d);
    for (std::size_t i = 0; i < d.values.size(); ++i) EXPECT_NEAR(once.values[i], d.values[i], 1e-15);
    auto doubled = d;
    for (double& v : doubled.values) v *= 2.0;
    const auto back = normalize(doubled);
    for (std::size_t i = 0; i < d.values.size(); ++i) EXPECT_NEAR(back.values[i], d.values[i], 1e-15);

    auto zero = d;
    std::fill(zero.values.begin(), zero.values.end(), 0.0);
    try {
        normalize(zero);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroMass);
    }
}

TEST(Convolve, UniformsGiveTriangle) {
    const GridSpec g = GridSpec::lattice(-1, 2, 4096);
    const auto u = make_density(uniform01(), g);
    const auto t = convolve(u, u);
    // Cell averages of the tent; exact at the nodes up to the kink cells.
    double worst = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        const double x = t.grid.x(i);
        if (std::abs(x) < 2 * g.step() || std::abs(x - 1) < 2 * g.step() || std::abs(x - 2) < 2 * g.step()) continue;
        const double tent = x <= 0 || x >= 2 ? 0.0 : 1.0 - std::abs(x - 1.0);
        worst = std::max(worst, std::abs(t.values[i] - tent));
    }
    EXPECT_LT(worst, 1e-6);
    expect_valid(t);
}

TEST(Convolve, GaussianClosure) {
    const GridSpec g(-12, 12, 2048);
    const auto a = make_density(gaussian(0, 1), g);
    const auto c = convolve(a, a);
    EXPECT_LT(sup_diff(c, [](double x) { return normal_pdf(x, 0, 2); }), 1e-8);
}

TEST(Convolve, NearDeltaIsIdentity) {
    const GridSpec g = GridSpec::lattice(-12, 12, 2048);
    const DistributionSpec mix{Family::gaussian_mixture, {0.5, -2, 1, 0.5, 2, 1}, false, {}};
    const auto f = make_density(mix, g);
    const auto delta = make_density(gaussian(0, g.step() / 100), g);
    const auto c = convolve(f, delta);
    const auto back = restrict_to(c, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) worst = std::max(worst, std::abs(back.values[i] - f.values[i]));
    EXPECT_LT(worst, 1e-6);
}

TEST(Convolve, CommutesAndAddsMoments) {
    const GridSpec g = GridSpec::lattice(-14, 30, 4096);
    std::vector<GridDensity> battery = {
        make_density(gaussian(0.5, 1.5), g),
        make_density({Family::exponential, {1.5}, false, {}}, g),
        make_density({Family::gaussian_mixture, {0.4, -1, 0.5, 0.6, 2, 1}, false, {}}, g),
        make_density({Family::triangular, {-1, 0, 2}, false, {}}, g),
    };
    for (const auto& a : battery)
        for (const auto& b : battery) {
            const auto ab = convolve(a, b), ba = convolve(b, a);
            for (std::size_t i = 0; i < ab.values.size(); ++i) ASSERT_NEAR(ab.values[i], ba.values[i], 1e-10);
            const auto ma = moments(a), mb = moments(b), mc = moments(ab);
            EXPECT_NEAR(mc.mean, ma.mean + mb.mean, 1e-6 * std::max(1.0, std::abs(mc.mean)));
            EXPECT_NEAR(mc.variance, ma.variance + mb.variance, 1e-6 * mc.variance);
            expect_valid(ab);
        }
}

TEST(Convolve, StepMismatch) {
    const auto a = make_density(gaussian(0, 1), GridSpec(-10, 10, 1024));
    const auto b = make_density(gaussian(0, 1), GridSpec(-10, 10, 2048));
    try {
        convolve(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StepMismatch);
    }
}

TEST(Rescale, IdentityScalingAndRoundTrip) {
    const auto d = make_density(gaussian(0, 1), GridSpec(-10, 10, 1024));
    const auto same = rescale(d, 1.0);
    EXPECT_EQ(same.values, d.values);
    const auto wide = rescale(d, 2.0);
    EXPECT_LT(sup_diff(wide, [](double x) { return normal_pdf(x, 0, 4); }), 1e-8);
    const auto back = rescale(wide, 0.5);
    for (std::size_t i = 0; i < d.values.size(); ++i) EXPECT_NEAR(back.values[i], d.values[i], 1e-8);
    try {
        rescale(d, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonPositiveAlpha);
    }
}

TEST(Rescale, UniformEntropyShiftsByLog2) {
    const auto u = make_density(uniform01(), GridSpec::lattice(-1, 2, 4096));
    EXPECT_NEAR(entropy(rescale(u, 2.0)) - entropy(u), std::log(2.0), 1e-6);
}

TEST(OuEvolve, IdentityFixedPointAndMixing) {
    const GridSpec g = GridSpec::lattice(-12, 12, 2048);
    const DistributionSpec mix{Family::gaussian_mixture, {0.5, -2, 1, 0.5, 2, 1}, true, {}};
    const auto d = make_density(mix, g);
    const auto same = ou_evolve(d, 0.0);
    for (std::size_t i = 0; i < d.values.size(); ++i) EXPECT_NEAR(same.values[i], d.values[i], 1e-12);

    const auto mixed = ou_evolve(d, 10.0);
    EXPECT_LT(sup_diff(mixed, [](double x) { return normal_pdf(x, 0, 1); }), 1e-4);

    const auto z = make_density(gaussian(0, 1), g);
    for (double t : {0.01, 0.3, 2.0})
        EXPECT_LT(sup_diff(ou_evolve(z, t), [](double x) { return normal_pdf(x, 0, 1); }), 1e-8);

    try {
        ou_evolve(d, -0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NegativeTime);
    }
}

TEST(OuEvolve, SemigroupLawAndUnitVariance) {
    const GridSpec g = GridSpec::lattice(-12, 30, 4096);
    const auto d = make_density({Family::exponential, {1.0}, true, {}}, g);
    for (double s : {0.1, 0.5})
        for (double t : {0.1, 0.5}) {
            const auto two = ou_evolve(ou_evolve(d, s), t);
            const auto one = ou_evolve(d, s + t);
            for (std::size_t i = 0; i < one.values.size(); ++i) ASSERT_NEAR(two.values[i], one.values[i], 1e-6);
            const double decay = std::exp(-2.0 * (s + t));
            EXPECT_NEAR(moments(one).variance, decay * moments(d).variance + 1.0 - decay, 1e-6);
            EXPECT_NEAR(moments(one).variance, 1.0, 1e-5);
            EXPECT_TRUE(one.smooth);
        }
}

TEST(OuEvolve, DerivativeMatchesDifferenceQuotient) {
    const GridSpec g = GridSpec::lattice(-12, 12, 4096);
    const auto d = make_density({Family::uniform, {0, 1}, true, {}}, g);
    const double t = 0.05;
    const auto f = ou_evolve(d, t);
    const auto df = ou_evolve_derivative(d, t);
    const double h = g.step();
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 2; i + 2 < f.values.size(); ++i) {
        const double fd = (f.values[i - 2] - 8 * f.values[i - 1] + 8 * f.values[i + 1] - f.values[i + 2]) / (12 * h);
        worst = std::max(worst, std::abs(fd - df[i]));
        scale = std::max(scale, std::abs(df[i]));
    }
    EXPECT_LT(worst / scale, 1e-3);
}

TEST(BuildFamily, GaussianClosure) {
    const auto fam = build_family(gaussian(0.2, 1.0), 4);
    for (int k = 1; k <= 4; ++k) {
        const auto& s = fam.sum(k);
        EXPECT_LT(sup_diff(s, [k](double x) { return normal_pdf(x, 0.2 * k, k); }), 1e-7) << k;
        EXPECT_EQ(s.grid, fam.grid());
    }
}

TEST(BuildFamily, UniformPairIsTriangle) {
    const auto fam = build_family(uniform01(), 2, {12.0, 4096, 0.0});
    EXPECT_FALSE(fam.base.smooth);
    const auto& tri = fam.sum(2);
    const double h = tri.grid.step();
    // Off-node jumps cost O(h) pointwise next to the kinks and O(h^2) in the moments.
    EXPECT_LT(sup_diff(tri, [](double x) { return x <= 0 || x >= 2 ? 0.0 : 1.0 - std::abs(x - 1.0); }), 2 * h);
    const auto m = moments(tri);
    EXPECT_NEAR(m.mean, 1.0, h * h);
    EXPECT_NEAR(m.variance, 1.0 / 6.0, h * h);
    EXPECT_NEAR(entropy(tri), 0.5, 1e-5);
}

TEST(BuildFamily, SingleMember) {
    const auto fam = build_family(gaussian(0, 1), 1);
    EXPECT_EQ(fam.sum_densities.size(), 1u);
    EXPECT_THROW(fam.sum(2), Error);
}

TEST(BuildFamily, GridCoversSpread) {
    const DistributionSpec s{Family::exponential, {1.0}, true, {}};
    const auto fam = build_family(s, 8);
    EXPECT_LE(fam.grid().lower(), -12.0 * std::sqrt(8.0) + 1e-9);
    EXPECT_GE(fam.grid().upper(), 12.0 * std::sqrt(8.0) - 1e-9);
    for (int k = 1; k <= 8; ++k) expect_valid(fam.sum(k));
}

TEST(Tabulated, TriangleTableMatchesParametric) {
    const auto table = parse_table("0 0\n0.5 2 # peak\n1 0\n");
    const DistributionSpec tab{Family::tabulated, {}, false, table};
    const DistributionSpec tri{Family::triangular, {0, 0.5, 1}, false, {}};
    const GridSpec g = GridSpec::lattice(-1, 2, 2048);
    const auto a = make_density(tab, g), b = make_density(tri, g);
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-2);
    EXPECT_NEAR(moments(a).mean, 0.5, 1e-6);
    EXPECT_THROW(parse_table("0 1\n2\n"), Error);
    EXPECT_THROW(parse_table("0 1 5\n"), Error);
}
