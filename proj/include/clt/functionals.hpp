#pragma once

#include "clt/density.hpp"

#include <string>
#include <vector>

namespace clt {

/// rho = f'/f on the density's grid. valid[i] is false where f is below the floor.
struct ScoreField {
    GridSpec grid;
    std::vector<double> values;
    std::vector<bool> valid;
};

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Differential entropy in nats; 0 log 0 = 0 and sub-floor samples are dropped.
double entropy(const GridDensity& d, const NumericConfig& config = {});

/// Fourth-order finite-difference derivative of the density; the stencil is
/// kept inside the region where f is above the floor (one-sided near its edges).
std::vector<double> density_derivative(const GridDensity& d, const std::vector<bool>& valid);
std::vector<bool> floor_mask(const GridDensity& d, double floor_relative);

ScoreField score(const GridDensity& d, const NumericConfig& config = {});

/// Integral of (f')^2 / f over the above-floor region.
double fisher_information(const GridDensity& d, const NumericConfig& config = {});

Moments moments(const GridDensity& d);

/// Per-n entropy and Fisher information of the standardized sums U_n = S_n / sqrt(n).
struct FunctionalReport {
    std::vector<int> n_values;
    std::vector<double> entropy_std;
    std::vector<double> fisher_std;
    std::vector<double> variance_std;
    bool entropy_monotone = false;
    bool fisher_monotone = false;
    double tolerance = 0.0;
};

FunctionalReport report(const IidSumFamily& family, double tolerance, const NumericConfig& config = {});

/// h(U_{n+1}) >= h(U_n) - tol for every consecutive pair.
bool entropy_nondecreasing(const std::vector<double>& entropy_std, double tolerance);
/// J(U_{n+1}) <= J(U_n) + tol for every consecutive pair.
bool fisher_nonincreasing(const std::vector<double>& fisher_std, double tolerance);

/// "n,entropy,fisher,variance" with 12 significant digits.
std::string to_csv(const FunctionalReport& report);

}  // namespace clt
