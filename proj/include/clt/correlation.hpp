#pragma once

// Conditional-expectation operators between partial sums S_m and S_n of an
// i.i.d. family, the L2 contraction they induce, and maximal correlation by
// power iteration.

#include "clt/density.hpp"
#include "clt/functionals.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <vector>

namespace clt {

/// A test function sampled on a grid. `valid` is all-true unless the values
/// came out of a masked operation.
struct GridFunction {
    GridSpec grid;
    std::vector<double> values;
    std::vector<bool> valid;
};

GridFunction sample_function(const GridSpec& grid, const std::function<double(double)>& fn);
/// Score values with sub-floor entries set to zero.
GridFunction to_grid_function(const ScoreField& score);

/// Discretized theta -> E[theta(S_m) | S_n]. The joint law of (S_m, S_n) is the
/// grid pmf P[s, x] = f_m(x) f_{n-m}(s - x) h^2 restricted to the above-floor
/// supports; kernel rows are P normalized by their sums.
struct CondExpKernel {
    int m = 0;
    int n = 0;
    GridSpec grid;
    std::vector<std::size_t> rows;    // grid indices of the conditioning values s
    std::vector<std::size_t> cols;    // grid indices of the S_m values x
    Eigen::MatrixXd kernel;           // rows.size() x cols.size(), row-stochastic
    Eigen::VectorXd row_weight;       // marginal pmf of S_n on rows (sums to 1)
    Eigen::VectorXd col_weight;       // marginal pmf of S_m on cols (sums to 1)
    std::vector<bool> support_mask;   // over the whole grid: true at rows

    /// E[theta(S_m) | S_n = s] for theta given on cols.
    Eigen::VectorXd forward(const Eigen::VectorXd& theta_cols) const;
    /// E[phi(S_n) | S_m = x] for phi given on rows; the adjoint of forward.
    Eigen::VectorXd backward(const Eigen::VectorXd& phi_rows) const;
    Eigen::VectorXd restrict_cols(const GridFunction& theta) const;
};

CondExpKernel build_kernel(const IidSumFamily& family, int m, int n, const NumericConfig& config = {});

/// s -> E[theta(S_m) | S_n = s]; entries outside the support are flagged invalid.
GridFunction cond_exp(const CondExpKernel& k, const GridFunction& theta);

/// E|E[theta(S_m)|S_n]|^2 / E|theta(S_m)|^2 after centering theta under S_m.
double contraction_ratio(const CondExpKernel& k, const GridFunction& theta);

struct MaxCorrResult {
    double r2 = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> rayleigh;      // Rayleigh quotient per iteration, first run
    double r2_random_start = 0.0;      // second run from a fixed pseudorandom start
    int iterations_random_start = 0;
    bool converged_random_start = false;
    std::vector<double> rayleigh_random_start;
};

/// Power iteration on E[E[. | S_n] | S_m] restricted to functions centred under S_m.
MaxCorrResult maximal_correlation(const IidSumFamily& family, int m, int n, int max_iter = 500,
                                  double tol = 1e-10, const NumericConfig& config = {});
MaxCorrResult maximal_correlation(const CondExpKernel& kernel, int max_iter = 500, double tol = 1e-10);

struct ScoreProjectionError {
    double weighted_sup_error = 0.0;  // max |diff| * f_n / max f_n
    double l2_error = 0.0;            // sqrt(E_n[diff^2])
    std::size_t points = 0;           // grid points compared
    // Same measures against (f_1' * f_{n-1}) / f_n built from the analytic base
    // derivative. NaN when the family carries no base_derivative.
    double reference_sup_error = std::numeric_limits<double>::quiet_NaN();
    double reference_l2_error = std::numeric_limits<double>::quiet_NaN();
};

/// Score of S_n from the analytic base derivative: f_n' = f_1' * f_{n-1}.
ScoreField reference_score(const IidSumFamily& family, int n, const NumericConfig& config = {});

/// Compares score(f_n) with E[score_m(S_m) | S_n] on the region f_n >= 1e-6 max f_n.
ScoreProjectionError verify_score_projection(const IidSumFamily& family, int m, int n,
                                             const NumericConfig& config = {});

}  // namespace clt
