#include "clt/semigroup.hpp"

#include "clt/csv.hpp"
#include "clt/error.hpp"
#include "clt/functionals.hpp"

#include <algorithm>
#include <cmath>

namespace clt {

namespace {

void require_unit_variance(const GridDensity& d) {
    const double var = moments(d).variance;
    if (std::abs(var - 1.0) > 1e-3)
        throw Error(ErrorCode::VarianceNotUnit, "flow needs a unit-variance input, got " + std::to_string(var));
}

void require_schedule(const FlowSchedule& s) {
    if (s.times.empty() || !(s.times.front() > 0.0))
        throw Error(ErrorCode::NegativeTime, "flow schedule must start at a positive time");
    for (std::size_t i = 1; i < s.times.size(); ++i)
        if (!(s.times[i] > s.times[i - 1]))
            throw Error(ErrorCode::NegativeTime, "flow schedule must be strictly increasing");
}

[[noreturn]] void tail_failure(double t, double residual) {
    throw Error(ErrorCode::TailNotConverged,
                "|J - 1| = " + std::to_string(residual) + " at the last scheduled time " + std::to_string(t));
}

}  // namespace

FlowSchedule geometric_schedule(double t0, double ratio, double t_max, double tail_tol) {
    if (!(t0 > 0.0) || !(ratio > 1.0) || !(t_max > t0))
        throw Error(ErrorCode::NonPositiveParameter, "geometric schedule needs t0 > 0, ratio > 1, t_max > t0");
    FlowSchedule s;
    s.tail_tol = tail_tol;
    for (double t = t0; t <= t_max * (1.0 + 1e-12); t *= ratio) s.times.push_back(t);
    if (s.times.back() < t_max * (1.0 - 1e-12)) s.times.push_back(t_max);
    s.cutoff = s.times.back();
    return s;
}

FlowIntegral integrate_flow(const std::vector<double>& t, const std::vector<double>& g) {
    FlowIntegral r;
    if (t.empty()) return r;

    r.head = t[0] * g[0];
    if (t.size() >= 3) {
        // g ~ A t^-p + B through the first three nodes. On a geometric grid
        // (t1/t0 = t2/t1 = q) the fit is closed form: q^-p = (g1 - g2) / (g0 - g1).
        const double q = t[1] / t[0];
        const double d01 = g[0] - g[1];
        const double d12 = g[1] - g[2];
        if (std::abs(t[2] / t[1] - q) < 1e-9 * q && d01 != 0.0 && d12 / d01 > 0.0) {
            const double p = std::clamp(-std::log(d12 / d01) / std::log(q), -1.0, 0.9);
            const double decay = std::pow(q, -p);
            const double a = d01 / (1.0 - decay);  // A t0^-p
            const double b = g[0] - a;
            r.head = a * t[0] / (1.0 - p) + b * t[0];
        }
    }

    double body = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) body += 0.5 * (t[i] - t[i - 1]) * (g[i] + g[i - 1]);

    const std::size_t k = t.size();
    if (k >= 2 && g[k - 1] > 0.0 && g[k - 2] > g[k - 1]) {
        const double lambda = std::log(g[k - 2] / g[k - 1]) / (t[k - 1] - t[k - 2]);
        r.tail = g[k - 1] / lambda;
    }
    r.total = r.head + body + r.tail;
    return r;
}

FlowTrace fisher_along_flow(const GridDensity& d, const FlowSchedule& schedule, const NumericConfig& config) {
    require_schedule(schedule);
    if (std::abs(d.integral() - 1.0) > 1e-8) throw Error(ErrorCode::NotNormalized, "flow input is not normalized");
    require_unit_variance(d);

    FlowTrace trace;
    bool converged = false;
    for (double t : schedule.times) {
        const double j = fisher_information(ou_evolve(d, t, config), config);
        trace.times.push_back(t);
        trace.fisher_values.push_back(j);
        if (std::abs(j - 1.0) < schedule.tail_tol) {
            converged = true;
            break;
        }
    }
    if (!converged) tail_failure(trace.times.back(), std::abs(trace.fisher_values.back() - 1.0));

    std::vector<double> g(trace.fisher_values.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = trace.fisher_values[i] - 1.0;
    const auto q = integrate_flow(trace.times, g);
    trace.entropy_gap = q.total;
    trace.head_correction = q.head;
    trace.tail_correction = q.tail;
    return trace;
}

double debruijn_gap(const GridDensity& d, const FlowSchedule& schedule, const NumericConfig& config) {
    return fisher_along_flow(d, schedule, config).entropy_gap;
}

std::string to_csv(const FlowTrace& trace) {
    std::string out = "t,fisher\n";
    for (std::size_t i = 0; i < trace.times.size(); ++i)
        out += format_number(trace.times[i]) + ',' + format_number(trace.fisher_values[i]) + '\n';
    out += "# entropy_gap=" + format_number(trace.entropy_gap) + '\n';
    return out;
}

SumFlow standardized_sums_along_flow(const DistributionSpec& spec, int n_max, const FlowSchedule& schedule,
                                     const GridPolicy& policy, const NumericConfig& config) {
    require_schedule(schedule);
    const auto family = build_family(spec, n_max, policy, config);
    require_unit_variance(family.base);

    SumFlow flow;
    flow.fisher.resize(static_cast<std::size_t>(n_max));
    bool converged = false;
    double worst = 0.0;
    for (double t : schedule.times) {
        // Evolving each summand by t evolves the standardized sum by t.
        const auto evolved = build_family(ou_evolve(family.base, t, config), n_max, config);
        flow.times.push_back(t);
        worst = 0.0;
        for (int k = 1; k <= n_max; ++k) {
            const auto u = rescale(evolved.sum(k), 1.0 / std::sqrt(static_cast<double>(k)));
            const double j = fisher_information(u, config);
            flow.fisher[static_cast<std::size_t>(k - 1)].push_back(j);
            worst = std::max(worst, std::abs(j - 1.0));
        }
        if (worst < schedule.tail_tol) {
            converged = true;
            break;
        }
    }
    if (!converged) tail_failure(flow.times.back(), worst);
    return flow;
}

FlowMonotonicity compare_sums(const SumFlow& flow, int m, int n) {
    if (m < 1 || m > n || static_cast<std::size_t>(n) > flow.fisher.size())
        throw Error(ErrorCode::IndexOutOfRange, "compare_sums needs 1 <= m <= n <= n_max");
    FlowMonotonicity result;
    result.times = flow.times;
    result.fisher_m = flow.fisher[static_cast<std::size_t>(m - 1)];
    result.fisher_n = flow.fisher[static_cast<std::size_t>(n - 1)];
    result.fisher_dominance = true;
    for (std::size_t i = 0; i < result.times.size(); ++i)
        if (result.fisher_n[i] > result.fisher_m[i] + 1e-6) result.fisher_dominance = false;
    if (m == n) return result;

    // h(U_n) - h(U_m) = int (J_m - 1) - (J_n - 1) dt; each leg gets its own head/tail model.
    std::vector<double> gm(result.times.size()), gn(result.times.size());
    for (std::size_t i = 0; i < gm.size(); ++i) {
        gm[i] = result.fisher_m[i] - 1.0;
        gn[i] = result.fisher_n[i] - 1.0;
    }
    result.entropy_difference = integrate_flow(result.times, gm).total - integrate_flow(result.times, gn).total;
    return result;
}

FlowMonotonicity monotonicity_via_flow(const DistributionSpec& spec, int m, int n, const FlowSchedule& schedule,
                                       const GridPolicy& policy, const NumericConfig& config) {
    if (m < 1 || m > n) throw Error(ErrorCode::IndexOutOfRange, "monotonicity_via_flow needs 1 <= m <= n");
    return compare_sums(standardized_sums_along_flow(spec, n, schedule, policy, config), m, n);
}

}  // namespace clt
