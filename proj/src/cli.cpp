#include "clt/cli.hpp"

#include "clt/correlation.hpp"
#include "clt/csv.hpp"
#include "clt/error.hpp"
#include "clt/functionals.hpp"
#include "clt/oracle_mc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace clt {

namespace {

const double kGaussianEntropy = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

[[noreturn]] void parse_error(std::string_view key, std::string_view value, const char* why) {
    throw Error(ErrorCode::ParseError, "setting '" + std::string(key) + "' = '" + std::string(value) + "': " + why);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) parse_error(key, text, "not a number");
    return v;
}

long long to_integer(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) parse_error(key, text, "not an integer");
    return v;
}

bool to_bool(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off") return false;
    parse_error(key, text, "not a boolean");
}

std::vector<double> to_list(std::string_view key, std::string_view text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        out.push_back(to_double(key, piece));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<double> default_parameters(Family f) {
    switch (f) {
        case Family::gaussian: return {0.0, 1.0};
        case Family::uniform: return {0.0, 1.0};
        case Family::triangular: return {0.0, 0.5, 1.0};
        case Family::gaussian_mixture: return {0.5, -2.0, 1.0, 0.5, 2.0, 1.0};
        case Family::exponential: return {1.0};
        case Family::tabulated: return {};
    }
    return {};
}

GridDensity standardized_sum(const IidSumFamily& family, int k) {
    return rescale(family.sum(k), 1.0 / std::sqrt(static_cast<double>(k)));
}

bool needs_smoothing(const DistributionSpec& spec, const GridPolicy& policy) {
    return !family_is_smooth(spec.family) && policy.t_smooth > 0.0;
}

std::string tag(const std::string& name, const std::string& detail) { return name + "[" + detail + "]"; }

std::string pair_label(const std::string& density, int m, int n) {
    return density + ";" + std::to_string(m) + "," + std::to_string(n);
}

// --- suites ------------------------------------------------------------------

// Grid maximal correlation, contraction bounds, kernel and power-iteration properties.
void correlation_suite(const RunConfig& cfg, const BatteryEntry& entry, RunResult& out, std::string& dks_csv,
                       std::string& contraction_csv) {
    const auto family = build_family(entry.spec, cfg.corr_n_max, cfg.corr_policy());
    double dks_worst = 0.0, random_worst = 0.0, row_worst = 0.0, rayleigh_drop = 0.0;
    double bound_excess = -1.0, identity_worst = 0.0;

    std::vector<std::pair<std::string, std::function<double(double)>>> thetas = {
        {"x", [](double x) { return x; }},
        {"x^2", [](double x) { return x * x; }},
        {"x^3", [](double x) { return x * x * x; }},
        {"x^4", [](double x) { return x * x * x * x; }},
        {"clipped_sine", [](double x) { return std::clamp(std::sin(2.0 * x), -0.5, 0.5); }},
    };

    for (int n = 1; n <= cfg.corr_n_max; ++n) {
        for (int m = 1; m <= n; ++m) {
            const auto kernel = build_kernel(family, m, n);
            const auto r = maximal_correlation(kernel);
            const double target = static_cast<double>(m) / n;
            dks_worst = std::max(dks_worst, std::abs(r.r2 - target));
            random_worst = std::max(random_worst, std::abs(r.r2_random_start - r.r2));
            for (const auto* hist : {&r.rayleigh, &r.rayleigh_random_start})
                for (std::size_t i = 1; i < hist->size(); ++i)
                    rayleigh_drop = std::max(rayleigh_drop, (*hist)[i - 1] - (*hist)[i]);
            for (Eigen::Index i = 0; i < kernel.kernel.rows(); ++i)
                row_worst = std::max(row_worst, std::abs(kernel.kernel.row(i).sum() - 1.0));
            dks_csv += entry.name + ',' + std::to_string(m) + ',' + std::to_string(n) + ',' + format_number(r.r2) +
                       ',' + format_number(target) + ',' + std::to_string(r.iterations) + ',' +
                       format_number(r.r2_random_start) + '\n';
            if (m == n) continue;

            auto record = [&](const std::string& name, const GridFunction& theta) {
                const double ratio = contraction_ratio(kernel, theta);
                bound_excess = std::max(bound_excess, ratio - target);
                if (name == "x") identity_worst = std::max(identity_worst, std::abs(ratio - target));
                contraction_csv += entry.name + ',' + std::to_string(m) + ',' + std::to_string(n) + ',' + name + ',' +
                                   format_number(ratio) + ',' + format_number(target) + '\n';
            };
            for (const auto& [name, fn] : thetas) record(name, sample_function(family.grid(), fn));
            record("score", to_grid_function(score(family.sum(m))));
        }
    }
    out.verdict.at_most(tag("dks_grid", entry.name), dks_worst, cfg.tol("dks"));
    out.verdict.at_most(tag("dks_random_start", entry.name), random_worst, cfg.tol("random_start"));
    out.verdict.at_most(tag("contraction_bound", entry.name), bound_excess, cfg.tol("contraction"));
    out.verdict.at_most(tag("contraction_identity", entry.name), identity_worst, cfg.tol("contraction"));
    out.verdict.at_most(tag("kernel_rows", entry.name), row_worst, cfg.tol("kernel_rows"));
    out.verdict.at_most(tag("rayleigh_monotone", entry.name), rayleigh_drop, cfg.tol("rayleigh"));
}

void score_suite(const RunConfig& cfg, const BatteryEntry& entry, RunResult& out, std::string& csv) {
    const auto coarse = build_family(entry.spec, 3, cfg.corr_policy());
    GridPolicy fine_policy = cfg.corr_policy();
    fine_policy.points *= 2;
    const auto fine = build_family(entry.spec, 3, fine_policy);

    double sup_worst = 0.0, ref_worst = 0.0, ratio_worst = std::numeric_limits<double>::infinity();
    for (auto [m, n] : {std::pair{1, 2}, std::pair{2, 3}}) {
        const auto a = verify_score_projection(coarse, m, n);
        const auto b = verify_score_projection(fine, m, n);
        for (const auto& [pts, e] : {std::pair{cfg.corr_points, a}, std::pair{fine_policy.points, b}}) {
            csv += entry.name + ',' + std::to_string(m) + ',' + std::to_string(n) + ',' + std::to_string(pts) + ',' +
                   format_number(e.weighted_sup_error) + ',' + format_number(e.l2_error) + ',' +
                   format_number(e.reference_sup_error) + ',' + format_number(e.reference_l2_error) + '\n';
            sup_worst = std::max(sup_worst, e.weighted_sup_error);
            ref_worst = std::max(ref_worst, e.reference_sup_error);
        }
        ratio_worst = std::min(ratio_worst, a.reference_sup_error / b.reference_sup_error);
    }
    out.verdict.at_most(tag("score_projection", entry.name), sup_worst, cfg.tol("score_projection"));
    out.verdict.at_most(tag("score_projection_reference", entry.name), ref_worst, cfg.tol("score_projection"));
    out.verdict.at_least(tag("score_projection_refinement", entry.name), ratio_worst, cfg.tol("score_refinement"));
}

// Functionals of U_1..U_n_max, scaling laws, and the inequalities that hold for every n.
void functionals_suite(const RunConfig& cfg, const BatteryEntry& entry, RunResult& out) {
    const auto family = build_family(entry.spec, cfg.n_max, cfg.grid);
    const auto rep = report(family, cfg.tol("fisher_monotone"));
    out.files["functionals_" + entry.name + ".csv"] = to_csv(rep);

    double j_rise = -1.0, h_drop = -1.0, cr_min = 1e300, maxent_excess = -1e300;
    for (std::size_t i = 0; i < rep.n_values.size(); ++i) {
        if (i > 0) {
            j_rise = std::max(j_rise, rep.fisher_std[i] - rep.fisher_std[i - 1]);
            h_drop = std::max(h_drop, rep.entropy_std[i - 1] - rep.entropy_std[i]);
        }
        cr_min = std::min(cr_min, rep.fisher_std[i] * rep.variance_std[i]);
        maxent_excess = std::max(maxent_excess, rep.entropy_std[i] - 0.5 * std::log(2.0 * std::numbers::pi *
                                                                                     std::numbers::e * rep.variance_std[i]));
    }
    out.verdict.at_most(tag("fisher_monotone", entry.name), j_rise, cfg.tol("fisher_monotone"));
    out.verdict.at_most(tag("entropy_monotone", entry.name), h_drop, cfg.tol("entropy_monotone"));
    out.verdict.at_least(tag("cramer_rao", entry.name), cr_min, 1.0 - cfg.tol("cramer_rao"));
    out.verdict.at_most(tag("max_entropy", entry.name), maxent_excess, cfg.tol("max_entropy"));

    // J(S_n) <= (m/n) J(S_m) on the unstandardized sums.
    double chain = -1.0;
    std::vector<double> js;
    for (int k = 1; k <= cfg.n_max; ++k) js.push_back(fisher_information(family.sum(k)));
    for (int n = 2; n <= cfg.n_max; ++n)
        for (int m = 1; m < n; ++m) {
            const double bound = static_cast<double>(m) / n * js[static_cast<std::size_t>(m - 1)];
            chain = std::max(chain, (js[static_cast<std::size_t>(n - 1)] - bound) / bound);
        }
    out.verdict.at_most(tag("fisher_chain", entry.name), chain, cfg.tol("fisher_chain"));

    if (entry.spec.family == Family::gaussian) {
        double h_err = 0.0, j_err = 0.0;
        for (std::size_t i = 0; i < rep.n_values.size(); ++i) {
            h_err = std::max(h_err, std::abs(rep.entropy_std[i] - kGaussianEntropy));
            j_err = std::max(j_err, std::abs(rep.fisher_std[i] - 1.0));
        }
        out.verdict.at_most(tag("gaussian_entropy", entry.name), h_err, cfg.tol("gaussian"));
        out.verdict.at_most(tag("gaussian_fisher", entry.name), j_err, cfg.tol("gaussian"));
    } else {
        out.verdict.at_least(tag("entropy_strict", entry.name), rep.entropy_std[1] - rep.entropy_std[0],
                             cfg.tol("entropy_strict"));
    }

    double j_scale = 0.0, h_scale = 0.0;
    const auto& base = family.base;
    const double j0 = fisher_information(base), h0 = entropy(base);
    for (double alpha : {0.5, 2.0}) {
        const auto scaled = rescale(base, alpha);
        j_scale = std::max(j_scale, std::abs(alpha * alpha * fisher_information(scaled) - j0) / j0);
        const double expect = h0 + std::log(alpha);
        h_scale = std::max(h_scale, std::abs(entropy(scaled) - expect) / std::max(1.0, std::abs(expect)));
    }
    out.verdict.at_most(tag("scaling_fisher", entry.name), j_scale, cfg.tol("scaling"));
    out.verdict.at_most(tag("scaling_entropy", entry.name), h_scale, cfg.tol("scaling"));
}

struct FlowNumbers {
    FlowTrace trace;
    double refined_gap = 0.0;
    double direct_gap = 0.0;
};

FlowNumbers flow_numbers(const RunConfig& cfg, const GridDensity& base) {
    FlowNumbers f;
    const auto schedule = cfg.schedule();
    f.trace = fisher_along_flow(base, schedule);
    auto fine = geometric_schedule(cfg.flow_t0, std::sqrt(cfg.flow_ratio), cfg.flow_t_max, cfg.tail_tol);
    f.refined_gap = debruijn_gap(base, fine);
    f.direct_gap = kGaussianEntropy - entropy(base);
    return f;
}

void flow_checks(const RunConfig& cfg, const std::string& name, const FlowNumbers& f, SuiteVerdict& v) {
    v.at_most(tag("debruijn", name), std::abs(f.trace.entropy_gap - f.direct_gap), cfg.tol("debruijn"));
    v.at_most(tag("debruijn_refinement", name), std::abs(f.refined_gap - f.trace.entropy_gap), cfg.tol("flow_refinement"));
    const double j_min = *std::min_element(f.trace.fisher_values.begin(), f.trace.fisher_values.end());
    v.at_least(tag("flow_cramer_rao", name), j_min, 1.0 - cfg.tol("cramer_rao"));
}

void flow_suite(const RunConfig& cfg, const BatteryEntry& entry, RunResult& out, std::string& mono_csv) {
    const auto family = build_family(entry.spec, cfg.n_max, cfg.grid);
    const auto f = flow_numbers(cfg, family.base);
    out.files["debruijn_" + entry.name + ".csv"] = to_csv(f.trace);
    flow_checks(cfg, entry.name, f, out.verdict);

    const auto flow = standardized_sums_along_flow(entry.spec, cfg.corr_n_max, cfg.schedule(), cfg.corr_policy());
    const auto direct = build_family(entry.spec, cfg.corr_n_max, cfg.corr_policy());
    bool dominance = true;
    double worst_gap = 0.0;
    for (int n = 2; n <= cfg.corr_n_max; ++n) {
        for (int m = 1; m < n; ++m) {
            const auto r = compare_sums(flow, m, n);
            dominance = dominance && r.fisher_dominance;
            const double direct_diff = entropy(standardized_sum(direct, n)) - entropy(standardized_sum(direct, m));
            worst_gap = std::max(worst_gap, std::abs(r.entropy_difference - direct_diff));
            mono_csv += entry.name + ',' + std::to_string(m) + ',' + std::to_string(n) + ',' +
                        (r.fisher_dominance ? "1" : "0") + ',' + format_number(r.entropy_difference) + ',' +
                        format_number(direct_diff) + '\n';
        }
    }
    out.verdict.add(tag("flow_dominance", entry.name), dominance, dominance ? 1.0 : 0.0, 1.0);
    out.verdict.at_most(tag("flow_entropy", entry.name), worst_gap, cfg.tol("flow_entropy"));
}

void mc_suite(const RunConfig& cfg, const BatteryEntry& entry, std::uint64_t seed, RunResult& out, std::string& csv) {
    const auto family = build_family(entry.spec, 1, cfg.grid);
    const double t = needs_smoothing(entry.spec, cfg.grid) ? cfg.grid.t_smooth : 0.0;
    const auto s = sample(entry.spec, cfg.mc_samples, seed, t);

    const auto h = mc_entropy(s);
    const double h_grid = entropy(family.base);
    csv += mc_csv_row(tag("entropy", entry.name), h, seed);
    out.verdict.at_most(tag("mc_entropy", entry.name), std::abs(h.point - h_grid), h.half_width_99);

    // The kernel estimate targets J(X + bZ); the grid side convolves with N(0, b^2).
    const auto j = mc_fisher(s);
    const DistributionSpec kernel{Family::gaussian, {0.0, j.bandwidth}, false, {}};
    const double j_grid = fisher_information(convolve(family.base, make_density(kernel, family.grid())));
    EstimateWithCI smoothed{j.smoothed_point, j.smoothed_half_width_99, j.n_samples};
    csv += mc_csv_row(tag("fisher_smoothed", entry.name), smoothed, seed);
    csv += mc_csv_row(tag("fisher", entry.name), j, seed);
    out.verdict.at_most(tag("mc_fisher", entry.name), std::abs(j.smoothed_point - j_grid), j.smoothed_half_width_99);

    int k = 1;
    for (auto [m, n] : {std::pair{1, 2}, std::pair{2, 3}, std::pair{2, 5}}) {
        const auto pair_seed = seed + static_cast<std::uint64_t>(k++);
        const auto p = sample_sum_pairs(entry.spec, m, n, cfg.mc_samples, pair_seed);
        const auto r = mc_maxcorr(p.x, p.y, cfg.ace_bins);
        csv += mc_csv_row(tag("maxcorr", pair_label(entry.name, m, n)), r, pair_seed);
        out.verdict.at_most(tag("dks_mc", pair_label(entry.name, m, n)),
                            std::abs(r.point - static_cast<double>(m) / n), r.half_width_99);
    }
}

std::string run_info(const RunConfig& cfg) {
    std::string s = "key,value\n";
    s += "generator," + std::string(kGeneratorName) + '\n';
    s += "seed," + std::to_string(cfg.seed) + '\n';
    s += "grid_points," + std::to_string(cfg.grid.points) + '\n';
    s += "grid_span," + format_number(cfg.grid.k_spread) + '\n';
    s += "t_smooth," + format_number(cfg.grid.t_smooth) + '\n';
    s += "corr_points," + std::to_string(cfg.corr_points) + '\n';
    s += "n_max," + std::to_string(cfg.n_max) + '\n';
    s += "mc_samples," + std::to_string(cfg.mc_samples) + '\n';
    s += "flow_t0," + format_number(cfg.flow_t0) + '\n';
    s += "flow_ratio," + format_number(cfg.flow_ratio) + '\n';
    return s;
}

}  // namespace

// --- verdicts ------------------------------------------------------------------

void SuiteVerdict::add(std::string name, bool pass, double value, double threshold) {
    // NaN never passes.
    checks.push_back({std::move(name), pass && !std::isnan(value), value, threshold});
}

void SuiteVerdict::merge(const SuiteVerdict& other) {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

bool SuiteVerdict::overall() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string summary_csv(const SuiteVerdict& v) {
    std::string s = "check,pass,value,threshold\n";
    for (const auto& c : v.checks)
        s += c.name + ',' + (c.pass ? "1" : "0") + ',' + format_number(c.value) + ',' + format_number(c.threshold) + '\n';
    return s;
}

std::vector<BatteryEntry> default_battery() {
    return {
        {"gaussian", {Family::gaussian, {0.0, 1.0}, true, {}}},
        {"uniform", {Family::uniform, {0.0, 1.0}, true, {}}},
        {"mixture", {Family::gaussian_mixture, {0.5, -2.0, 1.0, 0.5, 2.0, 1.0}, true, {}}},
        {"exponential", {Family::exponential, {1.0}, true, {}}},
    };
}

std::map<std::string, double> default_tolerances() {
    return {
        {"dks", 1e-3},
        {"random_start", 1e-6},
        {"contraction", 1e-6},
        {"kernel_rows", 1e-12},
        {"rayleigh", 1e-12},
        {"score_projection", 1e-3},
        {"score_refinement", 3.0},
        {"fisher_monotone", 1e-6},
        {"entropy_monotone", 1e-6},
        {"fisher_chain", 1e-6},
        {"entropy_strict", 1e-4},
        {"gaussian", 1e-6},
        {"scaling", 1e-5},
        {"cramer_rao", 1e-6},
        {"max_entropy", 1e-6},
        {"debruijn", 1e-3},
        {"flow_refinement", 2e-4},
        {"flow_entropy", 1e-3},
    };
}

double RunConfig::tol(const std::string& name) const {
    const auto it = tolerances.find(name);
    if (it == tolerances.end()) throw Error(ErrorCode::ParseError, "unknown tolerance '" + name + "'");
    return it->second;
}

FlowSchedule RunConfig::schedule() const { return geometric_schedule(flow_t0, flow_ratio, flow_t_max, tail_tol); }

void apply_setting(RunConfig& c, std::string_view raw_key, std::string_view value) {
    const std::string key = trim(raw_key);
    if (key == "dist") {
        const Family f = parse_family(trim(value));
        if (f != c.distribution.family) c.distribution.parameters = default_parameters(f);
        c.distribution.family = f;
    } else if (key == "params") {
        c.distribution.parameters = to_list(key, value);
    } else if (key == "table") {
        c.distribution.family = Family::tabulated;
        c.distribution.parameters.clear();
        c.distribution.table = load_table(trim(value));
    } else if (key == "raw") {
        c.distribution.standardize = !to_bool(key, value);
    } else if (key == "n-max") {
        c.n_max = static_cast<int>(to_integer(key, value));
    } else if (key == "grid-points") {
        c.grid.points = static_cast<std::size_t>(std::max(0LL, to_integer(key, value)));
    } else if (key == "grid-span") {
        c.grid.k_spread = to_double(key, value);
    } else if (key == "t-smooth") {
        c.grid.t_smooth = to_double(key, value);
    } else if (key == "seed") {
        c.seed = static_cast<std::uint64_t>(to_integer(key, value));
    } else if (key == "out") {
        c.output_dir = trim(value);
    } else if (key == "corr-points") {
        c.corr_points = static_cast<std::size_t>(std::max(0LL, to_integer(key, value)));
    } else if (key == "corr-n-max") {
        c.corr_n_max = static_cast<int>(to_integer(key, value));
    } else if (key == "mc-samples") {
        c.mc_samples = static_cast<std::size_t>(std::max(0LL, to_integer(key, value)));
    } else if (key == "ace-bins") {
        c.ace_bins = static_cast<int>(to_integer(key, value));
    } else if (key == "flow-t0") {
        c.flow_t0 = to_double(key, value);
    } else if (key == "flow-ratio") {
        c.flow_ratio = to_double(key, value);
    } else if (key == "flow-tmax") {
        c.flow_t_max = to_double(key, value);
    } else if (key == "tail-tol") {
        c.tail_tol = to_double(key, value);
    } else if (key.rfind("tol.", 0) == 0) {
        const std::string name = key.substr(4);
        if (!c.tolerances.count(name)) parse_error(key, value, "unknown tolerance");
        c.tolerances[name] = to_double(key, value);
    } else {
        parse_error(key, value, "unknown key");
    }
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot read config file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        apply_setting(config, std::string_view(body).substr(0, eq), std::string_view(body).substr(eq + 1));
    }
}

void validate(const RunConfig& c) {
    validate(c.distribution);
    if (c.n_max < 1 || c.n_max > 16) throw Error(ErrorCode::ParseError, "n-max must lie in [1, 16]");
    if (c.corr_n_max < 1 || c.corr_n_max > 16) throw Error(ErrorCode::ParseError, "corr-n-max must lie in [1, 16]");
    GridSpec(-1.0, 1.0, c.grid.points);  // throws InvalidGrid unless a power of two >= 64
    GridSpec(-1.0, 1.0, c.corr_points);
    if (!(c.grid.k_spread > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "grid-span must be positive");
    if (!(c.grid.t_smooth >= 0.0)) throw Error(ErrorCode::NonPositiveParameter, "t-smooth must be nonnegative");
    if (!(c.flow_t0 > 0.0) || !(c.flow_ratio > 1.0) || !(c.flow_t_max > c.flow_t0) || !(c.tail_tol > 0.0))
        throw Error(ErrorCode::NonPositiveParameter, "flow schedule needs flow-t0 > 0, flow-ratio > 1, flow-tmax > flow-t0, tail-tol > 0");
    if (c.ace_bins < 32) throw Error(ErrorCode::NonPositiveParameter, "ace-bins must be at least 32");
    for (const auto& [name, v] : c.tolerances)
        if (!(v >= 0.0)) throw Error(ErrorCode::NonPositiveParameter, "tolerance " + name + " must be nonnegative");
}

void prepare_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw Error(ErrorCode::IoError, "cannot create output directory " + dir.string());
    const auto probe = dir / ".write-probe";
    {
        std::ofstream out(probe);
        if (!out || !(out << "ok") || !out.flush()) {
            std::filesystem::remove(probe, ec);
            throw Error(ErrorCode::IoError, "output directory " + dir.string() + " is not writable");
        }
    }
    std::filesystem::remove(probe, ec);
}

void write_outputs(const std::filesystem::path& dir, const RunResult& result) {
    for (const auto& [name, content] : result.files) write_file_atomic(dir / name, content);
    write_file_atomic(dir / "summary.csv", summary_csv(result.verdict));
}

// --- commands --------------------------------------------------------------------

RunResult run_functionals(const RunConfig& cfg) {
    const auto family = build_family(cfg.distribution, cfg.n_max, cfg.grid);
    const auto rep = report(family, cfg.tol("fisher_monotone"));
    RunResult out;
    out.files["functionals.csv"] = to_csv(rep);

    double j_rise = -1.0, h_drop = -1.0;
    for (std::size_t i = 1; i < rep.n_values.size(); ++i) {
        j_rise = std::max(j_rise, rep.fisher_std[i] - rep.fisher_std[i - 1]);
        h_drop = std::max(h_drop, rep.entropy_std[i - 1] - rep.entropy_std[i]);
    }
    out.verdict.at_most("fisher_monotone", j_rise, cfg.tol("fisher_monotone"));
    out.verdict.at_most("entropy_monotone", h_drop, cfg.tol("entropy_monotone"));
    return out;
}

RunResult run_maxcorr(const RunConfig& cfg, int m, int n) {
    if (m < 1 || m > n) throw Error(ErrorCode::ParseError, "maxcorr needs 1 <= m <= n");
    const auto family = build_family(cfg.distribution, n, cfg.corr_policy());
    const auto r = maximal_correlation(family, m, n);
    const double target = static_cast<double>(m) / n;

    RunResult out;
    out.verdict.at_most("maxcorr_grid", std::abs(r.r2 - target), cfg.tol("dks"));
    std::string csv = "m,n,grid_r2,mc_r2,mc_ci99,target\n";
    std::string mc_r2 = "", mc_ci = "";
    if (cfg.mc_samples > 0) {
        const auto p = sample_sum_pairs(cfg.distribution, m, n, cfg.mc_samples, cfg.seed);
        const auto e = mc_maxcorr(p.x, p.y, cfg.ace_bins);
        mc_r2 = format_number(e.point);
        mc_ci = format_number(e.half_width_99);
        out.verdict.at_most("maxcorr_mc", std::abs(e.point - target), e.half_width_99);
    }
    csv += std::to_string(m) + ',' + std::to_string(n) + ',' + format_number(r.r2) + ',' + mc_r2 + ',' + mc_ci + ',' +
           format_number(target) + '\n';
    out.files["maxcorr.csv"] = csv;
    return out;
}

RunResult run_debruijn(const RunConfig& cfg) {
    const auto family = build_family(cfg.distribution, 1, cfg.grid);
    const auto f = flow_numbers(cfg, family.base);
    RunResult out;
    out.files["debruijn.csv"] = to_csv(f.trace);
    flow_checks(cfg, family_name(cfg.distribution.family).data(), f, out.verdict);
    return out;
}

RunResult run_scorecheck(const RunConfig& cfg) {
    RunResult out;
    std::string csv = "density,m,n,points,weighted_sup_error,l2_error,reference_sup_error,reference_l2_error\n";
    score_suite(cfg, {std::string(family_name(cfg.distribution.family)), cfg.distribution}, out, csv);
    out.files["scorecheck.csv"] = csv;
    return out;
}

RunResult run_verify(const RunConfig& cfg) {
    RunResult out;
    std::string dks = "density,m,n,grid_r2,target,iterations,random_start_r2\n";
    std::string contraction = "density,m,n,theta,ratio,bound\n";
    std::string score = "density,m,n,points,weighted_sup_error,l2_error,reference_sup_error,reference_l2_error\n";
    std::string mono = "density,m,n,fisher_dominance,entropy_difference,direct_difference\n";
    std::string mc = mc_csv_header();

    const auto battery = default_battery();
    std::uint64_t seed = cfg.seed;
    for (const auto& entry : battery) {
        correlation_suite(cfg, entry, out, dks, contraction);
        score_suite(cfg, entry, out, score);
        functionals_suite(cfg, entry, out);
        flow_suite(cfg, entry, out, mono);
        if (cfg.mc_samples > 0) mc_suite(cfg, entry, seed, out, mc);
        seed += 100;
    }

    // The unsmoothed standardized uniform has a closed-form gap: h(G) - ln(sqrt 12).
    {
        const DistributionSpec uniform{Family::uniform, {0.0, 1.0}, true, {}};
        const GridDensity raw = make_density(uniform, GridSpec::lattice(-12.0, 12.0, cfg.grid.points));
        const auto trace = fisher_along_flow(raw, cfg.schedule());
        const double target = kGaussianEntropy - 0.5 * std::log(12.0);
        out.files["debruijn_uniform_raw.csv"] = to_csv(trace);
        out.verdict.at_most("debruijn_uniform_closed_form", std::abs(trace.entropy_gap - target), cfg.tol("debruijn"));
    }

    // Same seed, same draws, same estimate.
    {
        const auto& spec = battery[2].spec;
        const auto a = sample(spec, 20000, cfg.seed);
        const auto b = sample(spec, 20000, cfg.seed);
        const double mismatches = static_cast<double>(a.values != b.values);
        const double estimate_gap = std::abs(mc_entropy(a).point - mc_entropy(b).point);
        out.verdict.at_most("seed_determinism", mismatches + estimate_gap, 0.0);
    }

    out.files["dks.csv"] = dks;
    out.files["contraction.csv"] = contraction;
    out.files["score_projection.csv"] = score;
    out.files["flow_monotonicity.csv"] = mono;
    if (cfg.mc_samples > 0) out.files["mc_estimates.csv"] = mc;
    out.files["run_info.csv"] = run_info(cfg);
    return out;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError:
        case ErrorCode::UnknownFamily:
        case ErrorCode::NonPositiveParameter:
        case ErrorCode::InvalidGrid:
        case ErrorCode::IoError: return 2;
        default: return 3;
    }
}

}  // namespace clt
