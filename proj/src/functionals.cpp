#include "clt/functionals.hpp"

#include "clt/csv.hpp"
#include "clt/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace clt {

namespace {

// Five-point first-derivative weights (times 1/(12h)), indexed by the position
// of the evaluation point inside the window.
constexpr std::array<std::array<double, 5>, 5> kFive = {{
    {-25.0, 48.0, -36.0, 16.0, -3.0},
    {-3.0, -10.0, 18.0, -6.0, 1.0},
    {1.0, -8.0, 0.0, 8.0, -1.0},
    {-1.0, 6.0, -18.0, 10.0, 3.0},
    {3.0, -16.0, 36.0, -48.0, 25.0},
}};

// Three-point weights (times 1/(2h)).
constexpr std::array<std::array<double, 3>, 3> kThree = {{
    {-3.0, 4.0, -1.0},
    {-1.0, 0.0, 1.0},
    {1.0, -4.0, 3.0},
}};

void require_normalized(const GridDensity& d) {
    const double mass = d.integral();
    if (std::abs(mass - 1.0) > 1e-8)
        throw Error(ErrorCode::NotNormalized, "density integrates to " + std::to_string(mass));
}

void require_smooth(const GridDensity& d) {
    if (!d.smooth)
        throw Error(ErrorCode::NonSmoothInput,
                    "density has jumps; mollify it with ou_evolve before differentiating");
}

}  // namespace

std::vector<bool> floor_mask(const GridDensity& d, double floor_relative) {
    const double peak = *std::max_element(d.values.begin(), d.values.end());
    const double floor = floor_relative * peak;
    std::vector<bool> valid(d.values.size());
    for (std::size_t i = 0; i < d.values.size(); ++i) valid[i] = d.values[i] >= floor && d.values[i] > 0.0;
    return valid;
}

std::vector<double> density_derivative(const GridDensity& d, const std::vector<bool>& valid) {
    const std::size_t n = d.values.size();
    const double h = d.grid.step();
    const auto& f = d.values;
    std::vector<double> out(n, 0.0);

    std::size_t i = 0;
    while (i < n) {
        if (!valid[i]) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < n && valid[end]) ++end;
        const std::size_t lo = i;
        const std::size_t len = end - lo;
        for (std::size_t k = lo; k < end; ++k) {
            if (len >= 5) {
                const std::size_t start = std::clamp(k, lo + 2, end - 3) - 2;
                const auto& c = kFive[k - start];
                double acc = 0.0;
                for (std::size_t j = 0; j < 5; ++j) acc += c[j] * f[start + j];
                out[k] = acc / (12.0 * h);
            } else if (len >= 3) {
                const std::size_t start = std::clamp(k, lo + 1, end - 2) - 1;
                const auto& c = kThree[k - start];
                out[k] = (c[0] * f[start] + c[1] * f[start + 1] + c[2] * f[start + 2]) / (2.0 * h);
            } else if (len == 2) {
                out[k] = (f[lo + 1] - f[lo]) / h;
            }
        }
        i = end;
    }
    return out;
}

double entropy(const GridDensity& d, const NumericConfig& config) {
    require_normalized(d);
    const auto valid = floor_mask(d, config.floor_relative);
    const auto w = trapezoid_weights(d.grid);
    double h = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        if (valid[i]) h -= w[i] * d.values[i] * std::log(d.values[i]);
    }
    return h;
}

ScoreField score(const GridDensity& d, const NumericConfig& config) {
    require_smooth(d);
    auto valid = floor_mask(d, config.floor_relative);
    auto deriv = density_derivative(d, valid);
    ScoreField s{d.grid, std::vector<double>(d.values.size(), 0.0), std::move(valid)};
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        if (s.valid[i]) s.values[i] = deriv[i] / d.values[i];
    }
    return s;
}

double fisher_information(const GridDensity& d, const NumericConfig& config) {
    require_smooth(d);
    const auto valid = floor_mask(d, config.floor_relative);
    const auto deriv = density_derivative(d, valid);
    const auto w = trapezoid_weights(d.grid);
    double j = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        if (valid[i]) j += w[i] * deriv[i] * deriv[i] / d.values[i];
    }
    return j;
}

Moments moments(const GridDensity& d) {
    const auto w = trapezoid_weights(d.grid);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        m0 += w[i] * d.values[i];
        m1 += w[i] * d.values[i] * d.grid.x(i);
    }
    const double mean = m1 / m0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        const double dx = d.grid.x(i) - mean;
        m2 += w[i] * d.values[i] * dx * dx;
    }
    return {mean, m2 / m0};
}

bool entropy_nondecreasing(const std::vector<double>& h, double tolerance) {
    for (std::size_t i = 1; i < h.size(); ++i)
        if (h[i] < h[i - 1] - tolerance) return false;
    return true;
}

bool fisher_nonincreasing(const std::vector<double>& j, double tolerance) {
    for (std::size_t i = 1; i < j.size(); ++i)
        if (j[i] > j[i - 1] + tolerance) return false;
    return true;
}

FunctionalReport report(const IidSumFamily& family, double tolerance, const NumericConfig& config) {
    FunctionalReport r;
    r.tolerance = tolerance;
    for (int n = 1; n <= family.n_max; ++n) {
        const auto u = rescale(family.sum(n), 1.0 / std::sqrt(static_cast<double>(n)));
        r.n_values.push_back(n);
        r.entropy_std.push_back(entropy(u, config));
        r.fisher_std.push_back(fisher_information(u, config));
        r.variance_std.push_back(moments(u).variance);
    }
    r.entropy_monotone = entropy_nondecreasing(r.entropy_std, tolerance);
    r.fisher_monotone = fisher_nonincreasing(r.fisher_std, tolerance);
    return r;
}

std::string to_csv(const FunctionalReport& r) {
    std::string out = "n,entropy,fisher,variance\n";
    for (std::size_t i = 0; i < r.n_values.size(); ++i) {
        out += std::to_string(r.n_values[i]) + ',' + format_number(r.entropy_std[i]) + ',' +
               format_number(r.fisher_std[i]) + ',' + format_number(r.variance_std[i]) + '\n';
    }
    return out;
}

}  // namespace clt
