#pragma once

// Monte Carlo cross-checks that share nothing with the grid pipeline except the
// DistributionSpec: sampling, spacing entropy, cross-fitted KDE Fisher
// information, and binned ACE maximal correlation.
//
// Generator: std::mt19937_64 (fully specified by the standard). Uniforms take the
// top 53 bits; normals come from Box-Muller. Both are written out here rather
// than taken from <random> distributions, whose algorithms are unspecified.

#include "clt/density.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace clt {

inline constexpr const char* kGeneratorName = "mt19937_64";

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct SampleSet {
    std::vector<double> values;
    std::uint64_t seed = 0;
    DistributionSpec spec;
    double ou_time = 0.0;  // draws are exp(-t) X + sqrt(1 - exp(-2t)) G when > 0
};

/// count i.i.d. draws. Parametric families draw exactly; tabulated inverts the
/// piecewise-linear cdf.
SampleSet sample(const DistributionSpec& spec, std::size_t count, std::uint64_t seed, double ou_time = 0.0);

/// Jointly drawn (S_m, S_n) with S_n = S_m + an independent S_{n-m}.
struct PairedSamples {
    std::vector<double> x;  // S_m
    std::vector<double> y;  // S_n
    std::uint64_t seed = 0;
};
PairedSamples sample_sum_pairs(const DistributionSpec& spec, int m, int n, std::size_t count, std::uint64_t seed,
                               double ou_time = 0.0);

struct EstimateWithCI {
    double point = 0.0;
    double half_width_99 = 0.0;
    std::size_t n_samples = 0;
};

/// Number of batches / splits behind every confidence interval.
inline constexpr int kBatches = 20;

/// Bias-corrected m-spacing estimator, m = round(count^(1/3)), windows clipped at
/// the sample ends. Needs count >= 1e4.
EstimateWithCI mc_entropy(const SampleSet& s);

struct FisherEstimate : EstimateWithCI {
    double bandwidth = 0.0;
    // J(X + bZ), Z standard normal: what the kernel estimate actually targets.
    double smoothed_point = 0.0;
    double smoothed_half_width_99 = 0.0;
};

/// 1.06 * sample sd * count^(-1/5).
double default_bandwidth(const SampleSet& s);

/// Kernel estimate of J(X + bZ) with three-fold cross-fitting (the score at a
/// point of one fold is the product of the scores estimated on the other two,
/// which removes the squared-noise bias of the plug-in), then the
/// Gaussian-exact back-correction J = J_b / (1 - b^2 J_b) as `point`.
FisherEstimate mc_fisher(const SampleSet& s, double bandwidth);
FisherEstimate mc_fisher(const SampleSet& s);

/// Alternating conditional expectations on a bins x bins table of equal-mass
/// bins; r^2 is the converged Rayleigh quotient. The CI comes from kBatches
/// disjoint splits.
EstimateWithCI mc_maxcorr(const std::vector<double>& x, const std::vector<double>& y, int bins = 256,
                          int max_iter = 1000);

/// CSV header "quantity,point,ci99,n_samples,seed".
std::string mc_csv_header();
std::string mc_csv_row(const std::string& quantity, const EstimateWithCI& e, std::uint64_t seed);

}  // namespace clt
