#pragma once

// One-dimensional probability densities sampled on uniform grids, together
// with the operations needed to form i.i.d. sums: convolution, rescaling and
// Ornstein-Uhlenbeck evolution.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clt {

/// Tolerances shared by every numerical routine. Passed by const reference;
/// the defaults are the values the verification suites are calibrated for.
struct NumericConfig {
    double tail_epsilon = 1e-10;      // admissible probability mass outside a grid
    double floor_relative = 1e-12;    // density floor as a fraction of the max density
    double clamp_mass_limit = 1e-12;  // FFT round-off mass that may be clamped away
};

/// Uniform grid on [lower, upper] with a power-of-two number of points.
class GridSpec {
public:
    static constexpr std::size_t kMinPoints = 64;

    /// Throws InvalidGrid unless upper > lower and points is a power of two >= 64.
    GridSpec(double lower, double upper, std::size_t points);

    /// Grid whose lower edge is an integer multiple of its step and which covers
    /// [lo, hi]. Sums of grid abscissae then land exactly on the same lattice.
    static GridSpec lattice(double lo, double hi, std::size_t points);

    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    std::size_t points() const noexcept { return points_; }
    double step() const noexcept { return step_; }
    double x(std::size_t i) const noexcept { return lower_ + static_cast<double>(i) * step_; }

    bool same_step(const GridSpec& other, double rel_tol = 1e-9) const noexcept;
    bool operator==(const GridSpec& other) const noexcept;

private:
    double lower_;
    double upper_;
    std::size_t points_;
    double step_;
};

/// Trapezoid quadrature weights for a grid.
std::vector<double> trapezoid_weights(const GridSpec& grid);
double trapezoid(const GridSpec& grid, std::span<const double> values);

struct GridDensity {
    GridSpec grid;
    std::vector<double> values;
    double tail_mass_bound = 0.0;
    // False for densities with jumps (raw uniform, triangular, exponential) that
    // have not been mollified; score and Fisher information refuse those.
    bool smooth = true;

    double integral() const { return trapezoid(grid, values); }
};

enum class Family { gaussian, uniform, triangular, gaussian_mixture, exponential, tabulated };

Family parse_family(std::string_view name);
std::string_view family_name(Family family);

/// Parameter layouts:
///   gaussian          mean, stddev
///   uniform           a, b
///   triangular        a, mode, b
///   gaussian_mixture  (weight, mean, stddev) repeated
///   exponential       rate
///   tabulated         none; abscissa/density pairs live in `table`
struct DistributionSpec {
    Family family = Family::gaussian;
    std::vector<double> parameters;
    bool standardize = false;
    std::vector<std::pair<double, double>> table;
};

/// Reads a two-column "x value" text file; '#' starts a comment.
std::vector<std::pair<double, double>> load_table(const std::filesystem::path& path);
std::vector<std::pair<double, double>> parse_table(std::string_view text);

/// Throws on malformed parameters (NonPositiveParameter / UnknownFamily).
void validate(const DistributionSpec& spec);

/// Mean and variance of the law described by `spec`, after standardization
/// when requested (so 0 and 1 in that case).
std::pair<double, double> spec_moments(const DistributionSpec& spec);
/// Mean and variance before standardization.
std::pair<double, double> spec_raw_moments(const DistributionSpec& spec);

/// Interval outside of which the law of `spec` has mass below `tail`.
std::pair<double, double> spec_support(const DistributionSpec& spec, double tail);

/// Pdf and cdf of the (possibly standardized) law, for parametric families.
double spec_pdf(const DistributionSpec& spec, double x);
double spec_cdf(const DistributionSpec& spec, double x);
/// d/dx of spec_pdf; gaussian and mixture only (NonSmoothInput otherwise).
double spec_pdf_derivative(const DistributionSpec& spec, double x);

bool family_is_smooth(Family family);

GridDensity make_density(const DistributionSpec& spec, const GridSpec& grid,
                         const NumericConfig& config = {});
GridDensity normalize(const GridDensity& d);

/// Density of the sum of independent draws from a and b. Linear (zero-padded)
/// convolution; the output grid starts at a.lower + b.lower.
GridDensity convolve(const GridDensity& a, const GridDensity& b, const NumericConfig& config = {});

/// Density of alpha * X, carried on the grid [alpha*lower, alpha*upper].
GridDensity rescale(const GridDensity& d, double alpha);

/// Law of exp(-t) Z + sqrt(1 - exp(-2t)) G on the input grid.
GridDensity ou_evolve(const GridDensity& d, double t, const NumericConfig& config = {});
/// Exact y-derivative of ou_evolve(d, t) for t > 0, with the same normalization.
std::vector<double> ou_evolve_derivative(const GridDensity& d, double t);

/// Re-expresses d on `target`, which must share d's step and lattice. Mass that
/// falls outside `target` is added to tail_mass_bound (GridOverflow beyond tail_epsilon).
GridDensity restrict_to(const GridDensity& d, const GridSpec& target, const NumericConfig& config = {});

/// Exact shift by an integer number of grid steps (grid moves, values do not).
GridDensity shift_by_steps(const GridDensity& d, long steps);

struct GridPolicy {
    double k_spread = 12.0;
    std::size_t points = 4096;
    double t_smooth = 0.01;
};

struct IidSumFamily {
    GridDensity base;
    int n_max = 1;
    std::vector<GridDensity> sum_densities;  // entry k-1 holds the density of S_k
    std::vector<double> base_derivative;     // analytic f_1' on the grid; empty if unknown

    const GridSpec& grid() const { return base.grid; }
    const GridDensity& sum(int k) const;
};

/// Base density (mollified by ou_evolve(t_smooth) when the family is not smooth
/// and t_smooth > 0) plus its self-convolutions S_1..S_n_max on one lattice grid.
IidSumFamily build_family(const DistributionSpec& spec, int n_max, const GridPolicy& policy = {},
                          const NumericConfig& config = {});

/// Family grown from an already-discretized base density on a lattice grid.
IidSumFamily build_family(const GridDensity& base, int n_max, const NumericConfig& config = {});

}  // namespace clt
