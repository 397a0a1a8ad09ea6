#include "clt/density.hpp"

#include "clt/error.hpp"
#include "clt/fft.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace clt {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

[[noreturn]] void bad_param(const std::string& what) {
    throw Error(ErrorCode::NonPositiveParameter, what);
}

void require_count(const DistributionSpec& spec, std::size_t n) {
    if (spec.parameters.size() != n) {
        bad_param(std::string(family_name(spec.family)) + " expects " + std::to_string(n) +
                  " parameters, got " + std::to_string(spec.parameters.size()));
    }
}

// --- tabulated helpers: the table is a piecewise-linear density ------------

double table_mass(const std::vector<std::pair<double, double>>& t) {
    double m = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i)
        m += 0.5 * (t[i].second + t[i - 1].second) * (t[i].first - t[i - 1].first);
    return m;
}

double table_pdf_raw(const std::vector<std::pair<double, double>>& t, double x) {
    if (x < t.front().first || x > t.back().first) return 0.0;
    auto it = std::upper_bound(t.begin(), t.end(), x,
                               [](double v, const auto& p) { return v < p.first; });
    if (it == t.end()) return t.back().second;
    if (it == t.begin()) return t.front().second;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (x - lo.first) / (hi.first - lo.first);
    return lo.second + w * (hi.second - lo.second);
}

double table_cdf_raw(const std::vector<std::pair<double, double>>& t, double x) {
    if (x <= t.front().first) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double x0 = t[i - 1].first;
        const double x1 = t[i].first;
        const double f0 = t[i - 1].second;
        const double slope = (t[i].second - f0) / (x1 - x0);
        if (x >= x1) {
            acc += 0.5 * (f0 + t[i].second) * (x1 - x0);
        } else {
            const double d = x - x0;
            acc += f0 * d + 0.5 * slope * d * d;
            break;
        }
    }
    return acc;
}

// Simpson's rule is exact for x^k * (linear density) with k <= 2.
std::pair<double, double> table_moments(const std::vector<std::pair<double, double>>& t) {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double a = t[i - 1].first, b = t[i].first;
        const double fa = t[i - 1].second, fb = t[i].second;
        const double c = 0.5 * (a + b), fc = 0.5 * (fa + fb);
        const double w = (b - a) / 6.0;
        m0 += w * (fa + 4 * fc + fb);
        m1 += w * (a * fa + 4 * c * fc + b * fb);
        m2 += w * (a * a * fa + 4 * c * c * fc + b * b * fb);
    }
    const double mean = m1 / m0;
    return {mean, m2 / m0 - mean * mean};
}

// --- raw (unstandardized) parametric laws ---------------------------------

double raw_pdf(const DistributionSpec& s, double x) {
    const auto& p = s.parameters;
    switch (s.family) {
        case Family::gaussian: return normal_pdf((x - p[0]) / p[1]) / p[1];
        case Family::uniform: return (x >= p[0] && x <= p[1]) ? 1.0 / (p[1] - p[0]) : 0.0;
        case Family::triangular: {
            const double a = p[0], c = p[1], b = p[2];
            if (x < a || x > b) return 0.0;
            if (x < c) return 2.0 * (x - a) / ((b - a) * (c - a));
            if (x > c) return 2.0 * (b - x) / ((b - a) * (b - c));
            return 2.0 / (b - a);
        }
        case Family::gaussian_mixture: {
            double v = 0.0;
            for (std::size_t i = 0; i < p.size(); i += 3)
                v += p[i] * normal_pdf((x - p[i + 1]) / p[i + 2]) / p[i + 2];
            return v;
        }
        case Family::exponential: return x < 0.0 ? 0.0 : p[0] * std::exp(-p[0] * x);
        case Family::tabulated: return table_pdf_raw(s.table, x) / table_mass(s.table);
    }
    throw Error(ErrorCode::UnknownFamily, "unhandled family");
}

double raw_cdf(const DistributionSpec& s, double x) {
    const auto& p = s.parameters;
    switch (s.family) {
        case Family::gaussian: return normal_cdf((x - p[0]) / p[1]);
        case Family::uniform:
            if (x <= p[0]) return 0.0;
            if (x >= p[1]) return 1.0;
            return (x - p[0]) / (p[1] - p[0]);
        case Family::triangular: {
            const double a = p[0], c = p[1], b = p[2];
            if (x <= a) return 0.0;
            if (x >= b) return 1.0;
            if (x <= c) return (x - a) * (x - a) / ((b - a) * (c - a));
            return 1.0 - (b - x) * (b - x) / ((b - a) * (b - c));
        }
        case Family::gaussian_mixture: {
            double v = 0.0;
            for (std::size_t i = 0; i < p.size(); i += 3)
                v += p[i] * normal_cdf((x - p[i + 1]) / p[i + 2]);
            return v;
        }
        case Family::exponential: return x <= 0.0 ? 0.0 : -std::expm1(-p[0] * x);
        case Family::tabulated: return table_cdf_raw(s.table, x) / table_mass(s.table);
    }
    throw Error(ErrorCode::UnknownFamily, "unhandled family");
}

std::pair<double, double> raw_moments(const DistributionSpec& s) {
    const auto& p = s.parameters;
    switch (s.family) {
        case Family::gaussian: return {p[0], p[1] * p[1]};
        case Family::uniform: return {0.5 * (p[0] + p[1]), (p[1] - p[0]) * (p[1] - p[0]) / 12.0};
        case Family::triangular: {
            const double a = p[0], c = p[1], b = p[2];
            return {(a + b + c) / 3.0, (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0};
        }
        case Family::gaussian_mixture: {
            double mean = 0.0, second = 0.0;
            for (std::size_t i = 0; i < p.size(); i += 3) {
                mean += p[i] * p[i + 1];
                second += p[i] * (p[i + 2] * p[i + 2] + p[i + 1] * p[i + 1]);
            }
            return {mean, second - mean * mean};
        }
        case Family::exponential: return {1.0 / p[0], 1.0 / (p[0] * p[0])};
        case Family::tabulated: return table_moments(s.table);
    }
    throw Error(ErrorCode::UnknownFamily, "unhandled family");
}

std::pair<double, double> raw_support(const DistributionSpec& s, double tail) {
    const auto& p = s.parameters;
    const double z = std::sqrt(-2.0 * std::log(tail));
    switch (s.family) {
        case Family::gaussian: return {p[0] - z * p[1], p[0] + z * p[1]};
        case Family::uniform: return {p[0], p[1]};
        case Family::triangular: return {p[0], p[2]};
        case Family::gaussian_mixture: {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t i = 0; i < p.size(); i += 3) {
                lo = std::min(lo, p[i + 1] - z * p[i + 2]);
                hi = std::max(hi, p[i + 1] + z * p[i + 2]);
            }
            return {lo, hi};
        }
        case Family::exponential: return {0.0, -std::log(tail) / p[0]};
        case Family::tabulated: return {s.table.front().first, s.table.back().first};
    }
    throw Error(ErrorCode::UnknownFamily, "unhandled family");
}

// Affine map used for standardization: x_raw = shift + scale * y.
std::pair<double, double> standard_map(const DistributionSpec& s) {
    if (!s.standardize) return {0.0, 1.0};
    const auto [mean, var] = raw_moments(s);
    return {mean, std::sqrt(var)};
}

}  // namespace

// ---------------------------------------------------------------------------

GridSpec::GridSpec(double lower, double upper, std::size_t points)
    : lower_(lower), upper_(upper), points_(points), step_(0.0) {
    if (!(std::isfinite(lower) && std::isfinite(upper)) || !(upper > lower))
        throw Error(ErrorCode::InvalidGrid, "grid requires finite upper > lower");
    if (points < kMinPoints || !is_pow2(points))
        throw Error(ErrorCode::InvalidGrid,
                    "grid size must be a power of two >= 64, got " + std::to_string(points));
    step_ = (upper - lower) / static_cast<double>(points - 1);
}

GridSpec GridSpec::lattice(double lo, double hi, std::size_t points) {
    if (points < kMinPoints || !is_pow2(points))
        throw Error(ErrorCode::InvalidGrid, "grid size must be a power of two >= 64");
    if (!(hi > lo)) throw Error(ErrorCode::InvalidGrid, "lattice grid requires hi > lo");
    const double h = (hi - lo) / static_cast<double>(points - 2);
    const double lower = std::floor(lo / h) * h;
    return GridSpec(lower, lower + static_cast<double>(points - 1) * h, points);
}

bool GridSpec::same_step(const GridSpec& other, double rel_tol) const noexcept {
    return std::abs(step_ - other.step_) <= rel_tol * std::max(step_, other.step_);
}

bool GridSpec::operator==(const GridSpec& other) const noexcept {
    return points_ == other.points_ && same_step(other, 1e-12) &&
           std::abs(lower_ - other.lower_) <= 1e-9 * step_;
}

std::vector<double> trapezoid_weights(const GridSpec& grid) {
    std::vector<double> w(grid.points(), grid.step());
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
}

double trapezoid(const GridSpec& grid, std::span<const double> values) {
    if (values.size() != grid.points())
        throw Error(ErrorCode::GridMismatch, "value count does not match grid");
    double s = 0.0;
    for (double v : values) s += v;
    s -= 0.5 * (values.front() + values.back());
    return s * grid.step();
}

// ---------------------------------------------------------------------------

Family parse_family(std::string_view name) {
    if (name == "gaussian" || name == "normal") return Family::gaussian;
    if (name == "uniform") return Family::uniform;
    if (name == "triangular") return Family::triangular;
    if (name == "gaussian_mixture" || name == "mixture") return Family::gaussian_mixture;
    if (name == "exponential") return Family::exponential;
    if (name == "tabulated") return Family::tabulated;
    throw Error(ErrorCode::UnknownFamily, "unknown family '" + std::string(name) + "'");
}

std::string_view family_name(Family family) {
    switch (family) {
        case Family::gaussian: return "gaussian";
        case Family::uniform: return "uniform";
        case Family::triangular: return "triangular";
        case Family::gaussian_mixture: return "gaussian_mixture";
        case Family::exponential: return "exponential";
        case Family::tabulated: return "tabulated";
    }
    return "unknown";
}

bool family_is_smooth(Family family) {
    switch (family) {
        case Family::gaussian:
        case Family::gaussian_mixture:
        case Family::tabulated: return true;
        default: return false;
    }
}

std::vector<std::pair<double, double>> parse_table(std::string_view text) {
    std::vector<std::pair<double, double>> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        double x = 0.0, v = 0.0;
        if (!(fields >> x)) continue;  // blank or comment-only line
        if (!(fields >> v))
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 'x value'");
        std::string extra;
        if (fields >> extra)
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": trailing field");
        rows.emplace_back(x, v);
    }
    return rows;
}

std::vector<std::pair<double, double>> load_table(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw Error(ErrorCode::IoError, "cannot open table " + path.string());
    std::stringstream buf;
    buf << file.rdbuf();
    return parse_table(buf.str());
}

void validate(const DistributionSpec& spec) {
    const auto& p = spec.parameters;
    for (double v : p)
        if (!std::isfinite(v)) bad_param("parameters must be finite");
    switch (spec.family) {
        case Family::gaussian:
            require_count(spec, 2);
            if (!(p[1] > 0)) bad_param("gaussian stddev must be positive");
            break;
        case Family::uniform:
            require_count(spec, 2);
            if (!(p[1] > p[0])) bad_param("uniform requires b > a");
            break;
        case Family::triangular:
            require_count(spec, 3);
            if (!(p[2] > p[0]) || p[1] < p[0] || p[1] > p[2])
                bad_param("triangular requires a <= mode <= b and b > a");
            break;
        case Family::gaussian_mixture: {
            if (p.empty() || p.size() % 3 != 0)
                bad_param("gaussian_mixture expects (weight, mean, stddev) triples");
            double wsum = 0.0;
            for (std::size_t i = 0; i < p.size(); i += 3) {
                if (!(p[i] > 0)) bad_param("mixture weights must be positive");
                if (!(p[i + 2] > 0)) bad_param("mixture stddevs must be positive");
                wsum += p[i];
            }
            if (std::abs(wsum - 1.0) > 1e-12) bad_param("mixture weights must sum to 1");
            break;
        }
        case Family::exponential:
            require_count(spec, 1);
            if (!(p[0] > 0)) bad_param("exponential rate must be positive");
            break;
        case Family::tabulated: {
            const auto& t = spec.table;
            if (t.size() < 2) bad_param("tabulated density needs at least two rows");
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (!std::isfinite(t[i].first) || !std::isfinite(t[i].second) || t[i].second < 0)
                    bad_param("tabulated values must be finite and nonnegative");
                if (i > 0 && !(t[i].first > t[i - 1].first))
                    bad_param("tabulated abscissae must be strictly increasing");
            }
            if (!(table_mass(t) > 0)) bad_param("tabulated density has zero mass");
            if (!(table_moments(t).second > 0)) bad_param("tabulated density has zero variance");
            break;
        }
    }
}

std::pair<double, double> spec_moments(const DistributionSpec& spec) {
    validate(spec);
    if (spec.standardize) return {0.0, 1.0};
    return raw_moments(spec);
}

std::pair<double, double> spec_raw_moments(const DistributionSpec& spec) {
    validate(spec);
    return raw_moments(spec);
}

std::pair<double, double> spec_support(const DistributionSpec& spec, double tail) {
    validate(spec);
    const auto [lo, hi] = raw_support(spec, tail);
    const auto [shift, scale] = standard_map(spec);
    return {(lo - shift) / scale, (hi - shift) / scale};
}

double spec_pdf(const DistributionSpec& spec, double x) {
    const auto [shift, scale] = standard_map(spec);
    return scale * raw_pdf(spec, shift + scale * x);
}

double spec_pdf_derivative(const DistributionSpec& spec, double x) {
    const auto [shift, scale] = standard_map(spec);
    const auto& p = spec.parameters;
    const double u = shift + scale * x;
    switch (spec.family) {
        case Family::gaussian: {
            const double z = (u - p[0]) / p[1];
            return scale * scale * (-z / p[1]) * normal_pdf(z) / p[1];
        }
        case Family::gaussian_mixture: {
            double v = 0.0;
            for (std::size_t i = 0; i < p.size(); i += 3) {
                const double z = (u - p[i + 1]) / p[i + 2];
                v += p[i] * (-z / p[i + 2]) * normal_pdf(z) / p[i + 2];
            }
            return scale * scale * v;
        }
        default:
            throw Error(ErrorCode::NonSmoothInput,
                        "no analytic derivative for " + std::string(family_name(spec.family)));
    }
}

double spec_cdf(const DistributionSpec& spec, double x) {
    const auto [shift, scale] = standard_map(spec);
    return raw_cdf(spec, shift + scale * x);
}

// ---------------------------------------------------------------------------

GridDensity make_density(const DistributionSpec& spec, const GridSpec& grid, const NumericConfig& config) {
    validate(spec);
    const auto [shift, scale] = standard_map(spec);
    auto cdf = [&](double y) { return raw_cdf(spec, shift + scale * y); };

    const double outside = cdf(grid.lower()) + (1.0 - cdf(grid.upper()));
    if (outside > config.tail_epsilon) {
        throw Error(ErrorCode::GridTooNarrow,
                    "mass outside grid is " + std::to_string(outside) + " > tail epsilon");
    }

    GridDensity d{grid, std::vector<double>(grid.points()), std::max(outside, 0.0),
                  family_is_smooth(spec.family)};
    const double h = grid.step();
    if (d.smooth) {
        for (std::size_t i = 0; i < grid.points(); ++i)
            d.values[i] = scale * raw_pdf(spec, shift + scale * grid.x(i));
    } else {
        // Cell averages: jumps are represented by the fraction of the cell they cover.
        for (std::size_t i = 0; i < grid.points(); ++i) {
            const double x = grid.x(i);
            d.values[i] = std::max(cdf(x + 0.5 * h) - cdf(x - 0.5 * h), 0.0) / h;
        }
    }
    return normalize(d);
}

GridDensity normalize(const GridDensity& d) {
    const double mass = d.integral();
    if (!(mass > 0.0) || !std::isfinite(mass)) throw Error(ErrorCode::ZeroMass, "density has no mass");
    GridDensity out = d;
    for (double& v : out.values) v /= mass;
    return out;
}

GridDensity convolve(const GridDensity& a, const GridDensity& b, const NumericConfig& config) {
    if (!a.grid.same_step(b.grid)) throw Error(ErrorCode::StepMismatch, "convolution inputs differ in step");
    const double h = a.grid.step();
    const std::size_t need = a.grid.points() + b.grid.points() - 1;
    const std::size_t points = next_pow2(need);
    if (points > (std::size_t{1} << 26)) throw Error(ErrorCode::GridOverflow, "convolution grid too large");

    auto raw = linear_convolution(a.values, b.values);
    std::vector<double> values(points, 0.0);
    double clamped = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = raw[i] * h;
        if (v < 0.0) {
            clamped -= v * h;
        } else {
            values[i] = v;
        }
    }
    if (clamped > config.clamp_mass_limit)
        throw Error(ErrorCode::ClampedMassTooLarge, "negative FFT mass " + std::to_string(clamped));

    const double lower = a.grid.lower() + b.grid.lower();
    GridSpec grid(lower, lower + static_cast<double>(points - 1) * h, points);
    GridDensity out{grid, std::move(values), a.tail_mass_bound + b.tail_mass_bound, a.smooth || b.smooth};
    return normalize(out);
}

GridDensity rescale(const GridDensity& d, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw Error(ErrorCode::NonPositiveAlpha, "rescale factor must be positive");
    GridSpec grid(alpha * d.grid.lower(), alpha * d.grid.upper(), d.grid.points());
    GridDensity out{grid, d.values, d.tail_mass_bound, d.smooth};
    for (double& v : out.values) v /= alpha;
    return out;
}

namespace {

// Sums the OU-transported grid atoms: out[k] = sum_i m_i phi_sigma(y_k - a x_i),
// and optionally its derivative in y.
void ou_kernel_sum(const GridDensity& d, double t, std::vector<double>& out, std::vector<double>* deriv) {
    const double a = std::exp(-t);
    const double sigma = std::sqrt(-std::expm1(-2.0 * t));
    const GridSpec& grid = d.grid;
    const std::size_t n = grid.points();
    const double h = grid.step();
    const auto w = trapezoid_weights(grid);

    std::vector<double> mass(n);
    for (std::size_t i = 0; i < n; ++i) mass[i] = w[i] * d.values[i];

    // Gaussian factors along i follow E_{i+1} = E_i R_i, R_{i+1} = R_i Q.
    const double ah = a * h;
    const double inv_s2 = 1.0 / (sigma * sigma);
    const double inv2s2 = 0.5 * inv_s2;
    const double q = std::exp(-ah * ah * inv_s2);
    const double cutoff = 52.0;  // exp(-52) ~ 2.6e-23 relative to the peak
    const double norm = kInvSqrt2Pi / sigma;

    out.assign(n, 0.0);
    if (deriv) deriv->assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double y = grid.x(k);
        const double centre = (y / a - grid.lower()) / h;
        const long i0 = std::clamp(std::lround(centre), 0L, static_cast<long>(n) - 1);
        const double d0 = y - a * grid.x(static_cast<std::size_t>(i0));
        if (d0 * d0 * inv2s2 > cutoff) continue;
        const double e0 = std::exp(-d0 * d0 * inv2s2);

        double acc = mass[i0] * e0;
        double dacc = -mass[i0] * e0 * d0;
        double e = e0;
        double r = std::exp((2.0 * d0 * ah - ah * ah) * inv2s2);
        double dist = d0;
        for (std::size_t i = static_cast<std::size_t>(i0) + 1; i < n; ++i) {
            e *= r;
            r *= q;
            dist -= ah;
            if (dist < 0 && dist * dist * inv2s2 > cutoff) break;
            acc += mass[i] * e;
            dacc -= mass[i] * e * dist;
        }
        e = e0;
        r = std::exp((-2.0 * d0 * ah - ah * ah) * inv2s2);
        dist = d0;
        for (long i = i0 - 1; i >= 0; --i) {
            e *= r;
            r *= q;
            dist += ah;
            if (dist > 0 && dist * dist * inv2s2 > cutoff) break;
            acc += mass[static_cast<std::size_t>(i)] * e;
            dacc -= mass[static_cast<std::size_t>(i)] * e * dist;
        }
        out[k] = acc * norm;
        if (deriv) (*deriv)[k] = dacc * norm * inv_s2;
    }
}

}  // namespace

GridDensity ou_evolve(const GridDensity& d, double t, const NumericConfig& config) {
    if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, "OU time must be nonnegative");
    if (t == 0.0) return d;

    std::vector<double> out;
    ou_kernel_sum(d, t, out, nullptr);
    GridDensity result{d.grid, std::move(out), d.tail_mass_bound, true};
    const double lost = 1.0 - result.integral();
    if (lost > 0.0) result.tail_mass_bound += lost;
    if (result.tail_mass_bound > config.tail_epsilon)
        throw Error(ErrorCode::GridOverflow, "OU evolute leaves the grid");
    return normalize(result);
}

std::vector<double> ou_evolve_derivative(const GridDensity& d, double t) {
    if (!(t > 0.0)) throw Error(ErrorCode::NegativeTime, "OU derivative needs t > 0");
    std::vector<double> out, deriv;
    ou_kernel_sum(d, t, out, &deriv);
    const double mass = trapezoid(d.grid, out);
    for (double& v : deriv) v /= mass;
    return deriv;
}

GridDensity restrict_to(const GridDensity& d, const GridSpec& target, const NumericConfig& config) {
    if (!d.grid.same_step(target)) throw Error(ErrorCode::StepMismatch, "restriction changes the step");
    const double h = target.step();
    const double offset_f = (d.grid.lower() - target.lower()) / h;
    const long offset = std::lround(offset_f);
    if (std::abs(offset_f - static_cast<double>(offset)) > 1e-6)
        throw Error(ErrorCode::GridMismatch, "grids are not on a common lattice");

    GridDensity out{target, std::vector<double>(target.points(), 0.0), d.tail_mass_bound, d.smooth};
    double dropped = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        const long j = static_cast<long>(i) + offset;
        if (j >= 0 && j < static_cast<long>(target.points())) {
            out.values[static_cast<std::size_t>(j)] = d.values[i];
        } else {
            dropped += d.values[i] * h;
        }
    }
    out.tail_mass_bound += dropped;
    if (out.tail_mass_bound > config.tail_epsilon)
        throw Error(ErrorCode::GridOverflow,
                    "mass outside target grid " + std::to_string(out.tail_mass_bound) + " exceeds tail epsilon");
    return out;
}

GridDensity shift_by_steps(const GridDensity& d, long steps) {
    const double delta = static_cast<double>(steps) * d.grid.step();
    GridSpec grid(d.grid.lower() + delta, d.grid.upper() + delta, d.grid.points());
    return GridDensity{grid, d.values, d.tail_mass_bound, d.smooth};
}

// ---------------------------------------------------------------------------

const GridDensity& IidSumFamily::sum(int k) const {
    if (k < 1 || k > n_max)
        throw Error(ErrorCode::IndexOutOfRange, "sum index " + std::to_string(k) + " outside 1.." +
                                                    std::to_string(n_max));
    return sum_densities[static_cast<std::size_t>(k - 1)];
}

namespace {
IidSumFamily build_family_on(const DistributionSpec& spec, const GridSpec& grid, int n_max, double t_smooth,
                             const NumericConfig& config);
}  // namespace

IidSumFamily build_family(const DistributionSpec& spec, int n_max, const GridPolicy& policy,
                          const NumericConfig& config) {
    if (n_max < 1) throw Error(ErrorCode::NonPositiveParameter, "n_max must be >= 1");
    auto [mean, var] = spec_moments(spec);
    auto [slo, shi] = spec_support(spec, config.tail_epsilon * 1e-3);

    const bool smoothing = !family_is_smooth(spec.family) && policy.t_smooth > 0.0;
    if (smoothing) {
        const double a = std::exp(-policy.t_smooth);
        const double s = std::sqrt(-std::expm1(-2.0 * policy.t_smooth));
        mean *= a;
        var = a * a * var + s * s;
        slo = a * slo - 10.0 * s;
        shi = a * shi + 10.0 * s;
    }
    // k_spread sigma sqrt(n_max) is enough for light tails. Skewed bases (the
    // exponential) can leak past it, so widen and retry before giving up.
    for (double widen = 1.0;; widen *= 1.25) {
        const double spread = widen * policy.k_spread * std::sqrt(var * n_max);
        double lo = slo, hi = shi;
        for (int k = 1; k <= n_max; ++k) {
            lo = std::min(lo, k * mean - spread);
            hi = std::max(hi, k * mean + spread);
        }
        const GridSpec grid = GridSpec::lattice(lo, hi, policy.points);
        try {
            return build_family_on(spec, grid, n_max, smoothing ? policy.t_smooth : 0.0, config);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::GridOverflow || widen > 2.0) throw;
        }
    }
}

namespace {

IidSumFamily build_family_on(const DistributionSpec& spec, const GridSpec& grid, int n_max, double t_smooth,
                             const NumericConfig& config) {
    const bool smoothing = t_smooth > 0.0;
    const GridDensity raw = make_density(spec, grid, config);
    GridDensity base = smoothing ? ou_evolve(raw, t_smooth, config) : raw;
    auto family = build_family(base, n_max, config);

    if (smoothing) {
        family.base_derivative = ou_evolve_derivative(raw, t_smooth);
    } else if (spec.family == Family::gaussian || spec.family == Family::gaussian_mixture) {
        // make_density point-samples these families, then normalizes.
        std::vector<double> sampled(grid.points());
        for (std::size_t i = 0; i < grid.points(); ++i) sampled[i] = spec_pdf(spec, grid.x(i));
        const double mass = trapezoid(grid, sampled);
        family.base_derivative.resize(grid.points());
        for (std::size_t i = 0; i < grid.points(); ++i)
            family.base_derivative[i] = spec_pdf_derivative(spec, grid.x(i)) / mass;
    }
    return family;
}

}  // namespace

IidSumFamily build_family(const GridDensity& base, int n_max, const NumericConfig& config) {
    if (n_max < 1) throw Error(ErrorCode::NonPositiveParameter, "n_max must be >= 1");
    const double ratio = base.grid.lower() / base.grid.step();
    if (std::abs(ratio - std::round(ratio)) > 1e-6)
        throw Error(ErrorCode::GridMismatch, "family grids must be lattice aligned");

    IidSumFamily family{base, n_max, {}, {}};
    family.sum_densities.reserve(static_cast<std::size_t>(n_max));
    family.sum_densities.push_back(base);
    for (int k = 2; k <= n_max; ++k) {
        auto wide = convolve(family.sum_densities.back(), base, config);
        family.sum_densities.push_back(normalize(restrict_to(wide, base.grid, config)));
    }
    return family;
}

}  // namespace clt
