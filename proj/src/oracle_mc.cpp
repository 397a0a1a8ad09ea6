#include "clt/oracle_mc.hpp"

#include "clt/csv.hpp"
#include "clt/error.hpp"
#include "clt/fft.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace clt {

namespace {

// Two-sided 99% Student t quantile with kBatches - 1 = 19 degrees of freedom.
constexpr double kT99 = 2.860934606;

constexpr std::size_t kMinSamples = 10000;

void require_samples(std::size_t n, std::size_t minimum, const char* what) {
    if (n < minimum)
        throw Error(ErrorCode::TooFewSamples, std::string(what) + " needs at least " + std::to_string(minimum) +
                                                  " samples, got " + std::to_string(n));
}

// Draws from the unstandardized law.
class RawSampler {
public:
    explicit RawSampler(const DistributionSpec& spec) : spec_(spec) {
        if (spec.family == Family::gaussian_mixture) {
            double acc = 0.0;
            for (std::size_t i = 0; i < spec.parameters.size(); i += 3) cumulative_.push_back(acc += spec.parameters[i]);
            for (double& c : cumulative_) c /= acc;
        } else if (spec.family == Family::tabulated) {
            double acc = 0.0;
            cumulative_.push_back(0.0);
            for (std::size_t i = 1; i < spec.table.size(); ++i) {
                acc += 0.5 * (spec.table[i].second + spec.table[i - 1].second) *
                       (spec.table[i].first - spec.table[i - 1].first);
                cumulative_.push_back(acc);
            }
            for (double& c : cumulative_) c /= acc;
        }
    }

    double operator()(Rng& rng) const {
        const auto& p = spec_.parameters;
        switch (spec_.family) {
            case Family::gaussian: return p[0] + p[1] * rng.normal();
            case Family::uniform: return p[0] + (p[1] - p[0]) * rng.uniform();
            case Family::triangular: {
                const double a = p[0], c = p[1], b = p[2];
                const double u = rng.uniform();
                if (u < (c - a) / (b - a)) return a + std::sqrt(u * (b - a) * (c - a));
                return b - std::sqrt((1.0 - u) * (b - a) * (b - c));
            }
            case Family::gaussian_mixture: {
                const double u = rng.uniform();
                const auto k = static_cast<std::size_t>(
                    std::upper_bound(cumulative_.begin(), cumulative_.end() - 1, u) - cumulative_.begin());
                return p[3 * k + 1] + p[3 * k + 2] * rng.normal();
            }
            case Family::exponential: return -std::log1p(-rng.uniform()) / p[0];
            case Family::tabulated: return table_inverse(rng.uniform());
        }
        throw Error(ErrorCode::UnknownFamily, "unhandled family");
    }

private:
    // The table density is linear on each segment, so its cdf is quadratic there.
    double table_inverse(double u) const {
        const auto& t = spec_.table;
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), 1, t.size() - 1);
        const double x0 = t[i - 1].first, x1 = t[i].first;
        const double mass = cumulative_[i] - cumulative_[i - 1];
        const double target = u - cumulative_[i - 1];
        if (mass <= 0.0) return x0;
        // Solve f0 d + slope d^2 / 2 = target with the segment rescaled to unit mass.
        const double f0 = t[i - 1].second, f1 = t[i].second;
        const double width = x1 - x0;
        const double seg = 0.5 * (f0 + f1) * width;
        const double g0 = f0 / seg * mass, slope = (f1 - f0) / width / seg * mass;
        double d;
        if (std::abs(slope) < 1e-14 * std::max(g0, 1e-300)) {
            d = target / g0;
        } else {
            const double disc = std::max(0.0, g0 * g0 + 2.0 * slope * target);
            d = 2.0 * target / (g0 + std::sqrt(disc));
        }
        return std::clamp(x0 + d, x0, x1);
    }

    const DistributionSpec& spec_;
    std::vector<double> cumulative_;
};

struct Standardizer {
    double shift = 0.0;
    double scale = 1.0;
    double a = 1.0;      // OU contraction
    double sigma = 0.0;  // OU noise
};

Standardizer make_standardizer(const DistributionSpec& spec, double ou_time) {
    if (!(ou_time >= 0.0)) throw Error(ErrorCode::NegativeTime, "OU time must be nonnegative");
    Standardizer st;
    if (spec.standardize) {
        const auto [mean, var] = spec_raw_moments(spec);
        st.shift = mean;
        st.scale = std::sqrt(var);
    }
    st.a = std::exp(-ou_time);
    st.sigma = std::sqrt(-std::expm1(-2.0 * ou_time));
    return st;
}

double draw(const RawSampler& raw, const Standardizer& st, Rng& rng) {
    double v = (raw(rng) - st.shift) / st.scale;
    if (st.sigma > 0.0) v = st.a * v + st.sigma * rng.normal();
    return v;
}

EstimateWithCI spread_ci(const std::vector<double>& per_batch, double point, std::size_t n) {
    const double mean = std::accumulate(per_batch.begin(), per_batch.end(), 0.0) / static_cast<double>(per_batch.size());
    double ss = 0.0;
    for (double v : per_batch) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(per_batch.size() - 1));
    return {point, kT99 * sd / std::sqrt(static_cast<double>(per_batch.size())), n};
}

template <class Fn>
EstimateWithCI batched(const std::vector<double>& values, double point, Fn&& estimate) {
    const std::size_t n = values.size();
    std::vector<double> per_batch;
    for (int b = 0; b < kBatches; ++b) {
        const std::size_t lo = n * static_cast<std::size_t>(b) / kBatches;
        const std::size_t hi = n * static_cast<std::size_t>(b + 1) / kBatches;
        per_batch.push_back(estimate(std::vector<double>(values.begin() + static_cast<long>(lo),
                                                         values.begin() + static_cast<long>(hi))));
    }
    return spread_ci(per_batch, point, n);
}

// --- entropy --------------------------------------------------------------

// Digamma at a positive integer.
double digamma(std::size_t k) {
    double x = static_cast<double>(k);
    double acc = 0.0;
    while (x < 10.0) acc -= 1.0 / x++;
    const double r = 1.0 / (x * x);
    return acc + std::log(x) - 0.5 / x - r * (1.0 / 12.0 - r * (1.0 / 120.0 - r / 252.0));
}

// Spacing estimator over order statistics v_(i-m) .. v_(i+m), clipped at the ends
// of the sample. Each term subtracts E log(U_(j) - U_(k)) for uniform order
// statistics, psi(j - k) - psi(n + 1), so the estimator is exact in mean for a
// locally flat density.
double spacing_entropy_sorted(const std::vector<double>& v, std::size_t m) {
    const std::size_t n = v.size();
    const double psi_n1 = digamma(n + 1);
    std::vector<double> psi(2 * m + 1);
    for (std::size_t k = 1; k <= 2 * m; ++k) psi[k] = digamma(k);

    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= m ? i - m : 0;
        const std::size_t hi = std::min(i + m, n - 1);
        const double spacing = std::max(v[hi] - v[lo], std::numeric_limits<double>::min());
        acc += std::log(spacing) - psi[hi - lo] + psi_n1;
    }
    return acc / static_cast<double>(n);
}

// Window m = round(n^(1/3)). With m = sqrt(n) the window spans a visible slice of
// the tails and the estimate is biased upward by about 2e-3 on 1e6 normal draws.
double spacing_entropy(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto m = static_cast<std::size_t>(std::max(1L, std::lround(std::cbrt(static_cast<double>(v.size())))));
    return spacing_entropy_sorted(v, m);
}

// --- Fisher information ------------------------------------------------------

// Gaussian kernel estimates of f and f' on a fine lattice covering all samples.
class BinnedKde {
public:
    BinnedKde(double lo, double hi, double bandwidth) : b_(bandwidth) {
        delta_ = bandwidth / 20.0;
        const double pad = 8.0 * bandwidth;
        origin_ = lo - pad;
        const double span = hi - lo + 2.0 * pad;
        const auto n = static_cast<std::size_t>(std::ceil(span / delta_)) + 1;
        if (n > (std::size_t{1} << 23))
            throw Error(ErrorCode::BandwidthNonPositive, "bandwidth too small for the sample range");
        points_ = n;
    }

    struct Fit {
        std::vector<double> f, df;
    };

    Fit fit(const std::vector<double>& values, std::size_t begin_mod, std::size_t stride) const {
        std::vector<double> counts(points_, 0.0);
        std::size_t used = 0;
        for (std::size_t i = begin_mod; i < values.size(); i += stride) {
            const double pos = (values[i] - origin_) / delta_;
            const auto j = static_cast<std::size_t>(pos);
            const double w = pos - static_cast<double>(j);
            counts[j] += 1.0 - w;
            counts[j + 1] += w;
            ++used;
        }
        const long half = std::lround(8.0 * b_ / delta_);
        std::vector<double> k(static_cast<std::size_t>(2 * half + 1)), dk(k.size());
        const double norm = 1.0 / (static_cast<double>(used) * b_ * std::sqrt(2.0 * std::numbers::pi));
        for (long i = -half; i <= half; ++i) {
            const double z = static_cast<double>(i) * delta_ / b_;
            const double phi = norm * std::exp(-0.5 * z * z);
            k[static_cast<std::size_t>(i + half)] = phi;
            dk[static_cast<std::size_t>(i + half)] = -z / b_ * phi;
        }
        const auto full_f = linear_convolution(counts, k);
        const auto full_df = linear_convolution(counts, dk);
        Fit out{std::vector<double>(points_), std::vector<double>(points_)};
        for (std::size_t i = 0; i < points_; ++i) {
            out.f[i] = full_f[i + static_cast<std::size_t>(half)];
            out.df[i] = full_df[i + static_cast<std::size_t>(half)];
        }
        return out;
    }

    // Four-point Lagrange interpolation.
    double at(const std::vector<double>& g, double x) const {
        const double pos = (x - origin_) / delta_;
        const auto j = std::clamp<long>(static_cast<long>(pos), 1, static_cast<long>(points_) - 3);
        const double t = pos - static_cast<double>(j);
        const double* p = g.data() + j - 1;
        return p[0] * (-t * (t - 1) * (t - 2) / 6) + p[1] * ((t + 1) * (t - 1) * (t - 2) / 2) +
               p[2] * (-(t + 1) * t * (t - 2) / 2) + p[3] * ((t + 1) * t * (t - 1) / 6);
    }

private:
    double b_;
    double delta_;
    double origin_;
    std::size_t points_;
};

// The estimand is J(X + bZ) = E[rho_b(X + bZ)^2], so the score of the smoothed law
// is evaluated at jittered points X_i + b Z_i. Scores at a point of one fold come
// from the other two folds, whose noise is independent of it and of each other.
double cross_fit_fisher(const std::vector<double>& v, const std::vector<double>& jitter, double bandwidth) {
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const BinnedKde kde(*lo_it, *hi_it, bandwidth);
    std::array<BinnedKde::Fit, 3> fits;
    for (std::size_t k = 0; k < 3; ++k) fits[k] = kde.fit(v, k, 3);
    const double floor = 3.0 / (static_cast<double>(v.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));

    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = v[i] + bandwidth * jitter[i];
        const auto& a = fits[(i + 1) % 3];
        const auto& b = fits[(i + 2) % 3];
        const double fa = kde.at(a.f, x);
        const double fb = kde.at(b.f, x);
        // Skip points with less than about one effective neighbour in either fold.
        if (!(fa > floor && fb > floor)) continue;
        acc += (kde.at(a.df, x) / fa) * (kde.at(b.df, x) / fb);
    }
    return acc / static_cast<double>(v.size());
}

// --- ACE -------------------------------------------------------------------

std::vector<int> equal_mass_bins(const std::vector<double>& v, int bins) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<int> bin(v.size());
    const std::size_t n = v.size();
    for (std::size_t r = 0; r < n; ++r) bin[order[r]] = static_cast<int>(r * static_cast<std::size_t>(bins) / n);
    return bin;
}

double ace_r2(const std::vector<double>& x, const std::vector<double>& y, int bins, int max_iter) {
    const auto bx = equal_mass_bins(x, bins);
    const auto by = equal_mass_bins(y, bins);
    const auto B = static_cast<std::size_t>(bins);
    std::vector<double> table(B * B, 0.0), px(B, 0.0), py(B, 0.0);
    const double w = 1.0 / static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto a = static_cast<std::size_t>(bx[i]), c = static_cast<std::size_t>(by[i]);
        table[a * B + c] += w;
        px[a] += w;
        py[c] += w;
    }

    std::vector<double> theta(B), phi(B);
    for (std::size_t a = 0; a < B; ++a) theta[a] = static_cast<double>(a);
    auto normalize_theta = [&] {
        double mean = 0.0, ss = 0.0;
        for (std::size_t a = 0; a < B; ++a) mean += px[a] * theta[a];
        for (std::size_t a = 0; a < B; ++a) {
            theta[a] -= mean;
            ss += px[a] * theta[a] * theta[a];
        }
        const double norm = std::sqrt(ss);
        if (!(norm > 0.0)) return false;
        for (double& t : theta) t /= norm;
        return true;
    };
    if (!normalize_theta()) throw Error(ErrorCode::ConstantFunction, "ACE start is constant");

    double previous = -1.0;
    for (int it = 0; it < max_iter; ++it) {
        // phi = E[theta(X) | Y], then theta = E[phi(Y) | X].
        std::fill(phi.begin(), phi.end(), 0.0);
        for (std::size_t a = 0; a < B; ++a)
            for (std::size_t c = 0; c < B; ++c) phi[c] += table[a * B + c] * theta[a];
        double r2 = 0.0;
        for (std::size_t c = 0; c < B; ++c) {
            if (py[c] > 0.0) phi[c] /= py[c];
            r2 += py[c] * phi[c] * phi[c];
        }
        if (std::abs(r2 - previous) < 1e-13) return r2;
        previous = r2;
        std::fill(theta.begin(), theta.end(), 0.0);
        for (std::size_t a = 0; a < B; ++a) {
            for (std::size_t c = 0; c < B; ++c) theta[a] += table[a * B + c] * phi[c];
            if (px[a] > 0.0) theta[a] /= px[a];
        }
        if (!normalize_theta()) return 0.0;
    }
    throw Error(ErrorCode::NoConvergence, "ACE did not converge in " + std::to_string(max_iter) + " iterations");
}

}  // namespace

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

SampleSet sample(const DistributionSpec& spec, std::size_t count, std::uint64_t seed, double ou_time) {
    validate(spec);
    const RawSampler raw(spec);
    const auto st = make_standardizer(spec, ou_time);
    Rng rng(seed);
    SampleSet s{std::vector<double>(count), seed, spec, ou_time};
    for (auto& v : s.values) v = draw(raw, st, rng);
    return s;
}

PairedSamples sample_sum_pairs(const DistributionSpec& spec, int m, int n, std::size_t count, std::uint64_t seed,
                               double ou_time) {
    if (m < 1 || m > n) throw Error(ErrorCode::IndexOutOfRange, "pairs need 1 <= m <= n");
    validate(spec);
    const RawSampler raw(spec);
    const auto st = make_standardizer(spec, ou_time);
    Rng rng(seed);
    PairedSamples p{std::vector<double>(count), std::vector<double>(count), seed};
    for (std::size_t i = 0; i < count; ++i) {
        double sum = 0.0;
        for (int k = 0; k < m; ++k) sum += draw(raw, st, rng);
        p.x[i] = sum;
        for (int k = m; k < n; ++k) sum += draw(raw, st, rng);
        p.y[i] = sum;
    }
    return p;
}

EstimateWithCI mc_entropy(const SampleSet& s) {
    require_samples(s.values.size(), kMinSamples, "mc_entropy");
    return batched(s.values, spacing_entropy(s.values), spacing_entropy);
}

double default_bandwidth(const SampleSet& s) {
    const double n = static_cast<double>(s.values.size());
    const double mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : s.values) ss += (v - mean) * (v - mean);
    return 1.06 * std::sqrt(ss / (n - 1.0)) * std::pow(n, -0.2);
}

FisherEstimate mc_fisher(const SampleSet& s, double bandwidth) {
    require_samples(s.values.size(), kMinSamples, "mc_fisher");
    if (!(bandwidth > 0.0)) throw Error(ErrorCode::BandwidthNonPositive, "bandwidth must be positive");
    // Jitter stream derived from the sample seed so the estimate stays reproducible.
    Rng rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> jitter(s.values.size());
    for (double& z : jitter) z = rng.normal();

    const double jb = cross_fit_fisher(s.values, jitter, bandwidth);
    std::vector<double> per_batch;
    const std::size_t n = s.values.size();
    for (int b = 0; b < kBatches; ++b) {
        const auto lo = static_cast<long>(n * static_cast<std::size_t>(b) / kBatches);
        const auto hi = static_cast<long>(n * static_cast<std::size_t>(b + 1) / kBatches);
        per_batch.push_back(cross_fit_fisher(std::vector<double>(s.values.begin() + lo, s.values.begin() + hi),
                                             std::vector<double>(jitter.begin() + lo, jitter.begin() + hi), bandwidth));
    }
    const auto smoothed = spread_ci(per_batch, jb, n);

    const double b2 = bandwidth * bandwidth;
    if (!(b2 * jb < 1.0))
        throw Error(ErrorCode::BandwidthNonPositive, "bandwidth too large for the back-correction");
    const double denom = 1.0 - b2 * jb;

    FisherEstimate e;
    e.point = jb / denom;
    e.half_width_99 = smoothed.half_width_99 / (denom * denom);
    e.n_samples = s.values.size();
    e.bandwidth = bandwidth;
    e.smoothed_point = jb;
    e.smoothed_half_width_99 = smoothed.half_width_99;
    return e;
}

FisherEstimate mc_fisher(const SampleSet& s) {
    require_samples(s.values.size(), kMinSamples, "mc_fisher");
    return mc_fisher(s, default_bandwidth(s));
}

EstimateWithCI mc_maxcorr(const std::vector<double>& x, const std::vector<double>& y, int bins, int max_iter) {
    if (x.size() != y.size()) throw Error(ErrorCode::GridMismatch, "paired samples differ in length");
    if (bins < 32) throw Error(ErrorCode::NonPositiveParameter, "ACE needs at least 32 bins");
    require_samples(x.size(), std::max<std::size_t>(kMinSamples, static_cast<std::size_t>(kBatches * bins * 4)),
                    "mc_maxcorr");

    const double point = ace_r2(x, y, bins, max_iter);
    const std::size_t n = x.size();
    std::vector<double> per_split;
    for (int b = 0; b < kBatches; ++b) {
        const auto lo = static_cast<long>(n * static_cast<std::size_t>(b) / kBatches);
        const auto hi = static_cast<long>(n * static_cast<std::size_t>(b + 1) / kBatches);
        per_split.push_back(ace_r2(std::vector<double>(x.begin() + lo, x.begin() + hi),
                                   std::vector<double>(y.begin() + lo, y.begin() + hi), bins, max_iter));
    }
    return spread_ci(per_split, point, n);
}

std::string mc_csv_header() { return "quantity,point,ci99,n_samples,seed\n"; }

std::string mc_csv_row(const std::string& quantity, const EstimateWithCI& e, std::uint64_t seed) {
    return quantity + ',' + format_number(e.point) + ',' + format_number(e.half_width_99) + ',' +
           std::to_string(e.n_samples) + ',' + std::to_string(seed) + '\n';
}

}  // namespace clt
