#include "clt/correlation.hpp"

#include "clt/error.hpp"
#include "clt/fft.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace clt {

namespace {

std::vector<std::size_t> above_floor(const GridDensity& d, double floor_relative) {
    const auto mask = floor_mask(d, floor_relative);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) idx.push_back(i);
    return idx;
}

double weighted_mean(const Eigen::VectorXd& w, const Eigen::VectorXd& v) { return w.dot(v) / w.sum(); }

double weighted_norm2(const Eigen::VectorXd& w, const Eigen::VectorXd& v) {
    return w.dot(v.cwiseProduct(v));
}

struct PowerRun {
    double r2 = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> rayleigh;
};

PowerRun power_iterate(const CondExpKernel& k, Eigen::VectorXd theta, int max_iter, double tol) {
    PowerRun run;
    const auto& wm = k.col_weight;
    const auto& wn = k.row_weight;
    theta.array() -= weighted_mean(wm, theta);
    double norm = std::sqrt(weighted_norm2(wm, theta));
    if (!(norm > 0.0)) throw Error(ErrorCode::ConstantFunction, "power iteration start is constant");
    theta /= norm;

    double previous = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd image = k.forward(theta);
        // <theta, A theta>_m = ||K theta||_n^2 with ||theta||_m = 1.
        const double rq = weighted_norm2(wn, image);
        run.rayleigh.push_back(rq);
        run.r2 = rq;
        run.iterations = it;
        if (std::abs(rq - previous) < tol) {
            run.converged = true;
            break;
        }
        previous = rq;
        theta = k.backward(image);
        theta.array() -= weighted_mean(wm, theta);
        norm = std::sqrt(weighted_norm2(wm, theta));
        if (!(norm > 0.0)) {
            // The operator annihilated every centred direction: r^2 = 0.
            run.converged = true;
            break;
        }
        theta /= norm;
    }
    return run;
}

}  // namespace

GridFunction sample_function(const GridSpec& grid, const std::function<double(double)>& fn) {
    GridFunction g{grid, std::vector<double>(grid.points()), std::vector<bool>(grid.points(), true)};
    for (std::size_t i = 0; i < grid.points(); ++i) g.values[i] = fn(grid.x(i));
    return g;
}

GridFunction to_grid_function(const ScoreField& score) {
    GridFunction g{score.grid, score.values, score.valid};
    for (std::size_t i = 0; i < g.values.size(); ++i)
        if (!g.valid[i]) g.values[i] = 0.0;
    return g;
}

Eigen::VectorXd CondExpKernel::forward(const Eigen::VectorXd& theta_cols) const { return kernel * theta_cols; }

Eigen::VectorXd CondExpKernel::backward(const Eigen::VectorXd& phi_rows) const {
    Eigen::VectorXd weighted = row_weight.cwiseProduct(phi_rows);
    Eigen::VectorXd out = kernel.transpose() * weighted;
    return out.cwiseQuotient(col_weight);
}

Eigen::VectorXd CondExpKernel::restrict_cols(const GridFunction& theta) const {
    if (!(theta.grid == grid)) throw Error(ErrorCode::GridMismatch, "test function lives on another grid");
    Eigen::VectorXd v(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const double value = theta.values[cols[j]];
        if (!std::isfinite(value)) throw Error(ErrorCode::GridMismatch, "test function is not finite");
        v[static_cast<Eigen::Index>(j)] = value;
    }
    return v;
}

CondExpKernel build_kernel(const IidSumFamily& family, int m, int n, const NumericConfig& config) {
    if (m < 1 || m > n || n > family.n_max)
        throw Error(ErrorCode::IndexOutOfRange, "kernel requires 1 <= m <= n <= n_max, got m=" +
                                                    std::to_string(m) + " n=" + std::to_string(n));
    const GridSpec& grid = family.grid();
    const double h = grid.step();
    const auto& fm = family.sum(m);
    const auto& fn = family.sum(n);

    CondExpKernel k{m, n, grid, {}, {}, {}, {}, {}, {}};
    k.rows = above_floor(fn, config.floor_relative);
    k.cols = above_floor(fm, config.floor_relative);
    k.support_mask.assign(grid.points(), false);
    for (auto s : k.rows) k.support_mask[s] = true;

    const auto nr = static_cast<Eigen::Index>(k.rows.size());
    const auto nc = static_cast<Eigen::Index>(k.cols.size());
    k.kernel.setZero(nr, nc);

    if (m == n) {
        // S_n given S_n: point mass on the diagonal.
        std::size_t j = 0;
        for (Eigen::Index r = 0; r < nr; ++r) {
            while (j < k.cols.size() && k.cols[j] < k.rows[static_cast<std::size_t>(r)]) ++j;
            if (j == k.cols.size() || k.cols[j] != k.rows[static_cast<std::size_t>(r)])
                throw Error(ErrorCode::DegenerateRow, "diagonal kernel support mismatch");
            k.kernel(r, static_cast<Eigen::Index>(j)) = fn.values[k.rows[static_cast<std::size_t>(r)]] * h * h;
        }
    } else {
        const auto& fd = family.sum(n - m);
        const long origin = std::lround(grid.lower() / h);  // lattice index of grid.lower()
        const long npts = static_cast<long>(grid.points());
        for (Eigen::Index r = 0; r < nr; ++r) {
            const long is = static_cast<long>(k.rows[static_cast<std::size_t>(r)]);
            for (Eigen::Index c = 0; c < nc; ++c) {
                const long ix = static_cast<long>(k.cols[static_cast<std::size_t>(c)]);
                const long j = is - ix - origin;  // grid index of s - x
                if (j < 0 || j >= npts) continue;
                k.kernel(r, c) = fm.values[static_cast<std::size_t>(ix)] * fd.values[static_cast<std::size_t>(j)] * h * h;
            }
        }
    }

    k.row_weight = k.kernel.rowwise().sum();
    k.col_weight = k.kernel.colwise().sum().transpose();
    for (Eigen::Index r = 0; r < nr; ++r) {
        const double expected = fn.values[k.rows[static_cast<std::size_t>(r)]] * h;
        if (!(k.row_weight[r] > 1e-6 * expected))
            throw Error(ErrorCode::DegenerateRow,
                        "row mass vanishes at s=" + std::to_string(grid.x(k.rows[static_cast<std::size_t>(r)])));
        k.kernel.row(r) /= k.row_weight[r];
    }
    for (Eigen::Index c = 0; c < nc; ++c) {
        if (!(k.col_weight[c] > 0.0))
            throw Error(ErrorCode::DegenerateRow, "column carries no joint mass");
    }
    const double total = k.row_weight.sum();
    k.row_weight /= total;
    k.col_weight /= total;
    return k;
}

GridFunction cond_exp(const CondExpKernel& k, const GridFunction& theta) {
    const Eigen::VectorXd image = k.forward(k.restrict_cols(theta));
    GridFunction out{k.grid, std::vector<double>(k.grid.points(), 0.0), k.support_mask};
    for (std::size_t r = 0; r < k.rows.size(); ++r) out.values[k.rows[r]] = image[static_cast<Eigen::Index>(r)];
    return out;
}

double contraction_ratio(const CondExpKernel& k, const GridFunction& theta) {
    Eigen::VectorXd t = k.restrict_cols(theta);
    t.array() -= weighted_mean(k.col_weight, t);
    const double denom = weighted_norm2(k.col_weight, t);
    if (!(denom >= 1e-14)) throw Error(ErrorCode::ConstantFunction, "centred test function has no variance");
    return weighted_norm2(k.row_weight, k.forward(t)) / denom;
}

MaxCorrResult maximal_correlation(const CondExpKernel& k, int max_iter, double tol) {
    MaxCorrResult result;
    Eigen::VectorXd start(static_cast<Eigen::Index>(k.cols.size()));
    for (std::size_t j = 0; j < k.cols.size(); ++j) start[static_cast<Eigen::Index>(j)] = k.grid.x(k.cols[j]);

    auto first = power_iterate(k, start, max_iter, tol);
    result.r2 = first.r2;
    result.iterations = first.iterations;
    result.converged = first.converged;
    result.rayleigh = std::move(first.rayleigh);

    std::mt19937_64 gen(20170321);
    for (auto& v : start) v = static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    auto second = power_iterate(k, start, max_iter, tol);
    result.r2_random_start = second.r2;
    result.iterations_random_start = second.iterations;
    result.converged_random_start = second.converged;
    result.rayleigh_random_start = std::move(second.rayleigh);
    return result;
}

MaxCorrResult maximal_correlation(const IidSumFamily& family, int m, int n, int max_iter, double tol,
                                  const NumericConfig& config) {
    return maximal_correlation(build_kernel(family, m, n, config), max_iter, tol);
}

ScoreField reference_score(const IidSumFamily& family, int n, const NumericConfig& config) {
    if (family.base_derivative.empty())
        throw Error(ErrorCode::NonSmoothInput, "family has no analytic base derivative");
    const auto& fn = family.sum(n);
    const GridSpec& grid = family.grid();
    std::vector<double> deriv = family.base_derivative;
    if (n > 1) {
        // Linear convolution on the lattice; index 0 of the product sits at 2*lower.
        const auto& prev = family.sum(n - 1).values;
        const auto full = linear_convolution(deriv, prev);
        const long origin = std::lround(grid.lower() / grid.step());
        for (std::size_t i = 0; i < grid.points(); ++i) {
            const long j = static_cast<long>(i) - origin;
            deriv[i] = (j >= 0 && static_cast<std::size_t>(j) < full.size())
                           ? full[static_cast<std::size_t>(j)] * grid.step()
                           : 0.0;
        }
    }
    ScoreField s{grid, std::vector<double>(grid.points(), 0.0), floor_mask(fn, config.floor_relative)};
    for (std::size_t i = 0; i < grid.points(); ++i)
        if (s.valid[i]) s.values[i] = deriv[i] / fn.values[i];
    return s;
}

namespace {

void compare_scores(const GridDensity& fn, const std::vector<double>& a, const std::vector<bool>& va,
                    const GridFunction& b, double& sup, double& l2, std::size_t* points) {
    const double peak = *std::max_element(fn.values.begin(), fn.values.end());
    const auto w = trapezoid_weights(fn.grid);
    double acc = 0.0, mass = 0.0;
    sup = 0.0;
    for (std::size_t i = 0; i < fn.values.size(); ++i) {
        if (fn.values[i] < 1e-6 * peak || !va[i] || !b.valid[i]) continue;
        const double diff = a[i] - b.values[i];
        sup = std::max(sup, std::abs(diff) * fn.values[i] / peak);
        acc += w[i] * fn.values[i] * diff * diff;
        mass += w[i] * fn.values[i];
        if (points) ++*points;
    }
    l2 = std::sqrt(acc / mass);
}

}  // namespace

ScoreProjectionError verify_score_projection(const IidSumFamily& family, int m, int n,
                                             const NumericConfig& config) {
    const auto kernel = build_kernel(family, m, n, config);
    const auto& fn = family.sum(n);
    const auto direct = score(fn, config);
    const auto projected = cond_exp(kernel, to_grid_function(score(family.sum(m), config)));

    ScoreProjectionError err;
    compare_scores(fn, direct.values, direct.valid, projected, err.weighted_sup_error, err.l2_error,
                   &err.points);
    if (!family.base_derivative.empty()) {
        const auto ref = reference_score(family, n, config);
        compare_scores(fn, ref.values, ref.valid, projected, err.reference_sup_error, err.reference_l2_error,
                       nullptr);
    }
    return err;
}

}  // namespace clt
