#pragma once

// Ornstein-Uhlenbeck flow Z_t = e^{-t} Z + sqrt(1 - e^{-2t}) G and the de Bruijn
// quadrature h(G) - h(Z) = int_0^inf (J(Z_t) - 1) dt.

#include "clt/density.hpp"

#include <string>
#include <vector>

namespace clt {

struct FlowSchedule {
    std::vector<double> times;  // strictly increasing, times[0] > 0
    double cutoff = 0.0;        // last scheduled time
    double tail_tol = 1e-5;     // integration stops once |J - 1| < tail_tol
};

/// t_i = t0 * ratio^i for t_i <= t_max (t_max itself is appended if missed).
FlowSchedule geometric_schedule(double t0 = 1e-3, double ratio = 1.05, double t_max = 40.0,
                                double tail_tol = 1e-5);

struct FlowTrace {
    std::vector<double> times;          // times actually evaluated (truncated at convergence)
    std::vector<double> fisher_values;  // J(Z_t)
    double entropy_gap = 0.0;
    double head_correction = 0.0;       // part of entropy_gap from [0, times[0]]
    double tail_correction = 0.0;       // part of entropy_gap beyond the last node
};

/// Quadrature of g over [0, inf) from samples on increasing nodes t_i > 0: trapezoid
/// between nodes; on [0, t0] the integral of g ~ A t^-p + B fitted through the first
/// three (geometric) nodes, p in [-1, 0.9], else t0 g(t0); past the end g_last / lambda
/// when the last two samples decay like exp(-lambda t).
struct FlowIntegral {
    double total = 0.0;
    double head = 0.0;
    double tail = 0.0;
};
FlowIntegral integrate_flow(const std::vector<double>& times, const std::vector<double>& g);

/// Throws VarianceNotUnit if |Var - 1| > 1e-3, TailNotConverged if the schedule runs out first.
FlowTrace fisher_along_flow(const GridDensity& d, const FlowSchedule& schedule, const NumericConfig& config = {});
double debruijn_gap(const GridDensity& d, const FlowSchedule& schedule, const NumericConfig& config = {});

/// "t,fisher" rows followed by "# entropy_gap=<value>".
std::string to_csv(const FlowTrace& trace);

struct FlowMonotonicity {
    bool fisher_dominance = false;   // J((U_n)_t) <= J((U_m)_t) + 1e-6 at every evaluated t
    double entropy_difference = 0.0; // int (J((U_m)_t) - J((U_n)_t)) dt, approximates h(U_n) - h(U_m)
    std::vector<double> times;
    std::vector<double> fisher_m;
    std::vector<double> fisher_n;
};

/// J((U_k)_t) for k = 1..n_max along one schedule; fisher[k-1][i] belongs to times[i].
/// Stops once every k is within tail_tol of 1.
struct SumFlow {
    std::vector<double> times;
    std::vector<std::vector<double>> fisher;
};
SumFlow standardized_sums_along_flow(const DistributionSpec& spec, int n_max, const FlowSchedule& schedule,
                                     const GridPolicy& policy = {}, const NumericConfig& config = {});

/// Dominance and entropy difference for one pair, read off a SumFlow.
FlowMonotonicity compare_sums(const SumFlow& flow, int m, int n);

/// (U_k)_t is the standardized k-fold sum of i.i.d. copies of the base evolved to time t.
/// The base is the one build_family(spec, n, policy) uses (smoothed if non-smooth).
FlowMonotonicity monotonicity_via_flow(const DistributionSpec& spec, int m, int n, const FlowSchedule& schedule,
                                       const GridPolicy& policy = {}, const NumericConfig& config = {});

}  // namespace clt
