// cltcheck: command-line front end for the grid engine and its Monte Carlo cross-checks.

#include "clt/cli.hpp"
#include "clt/error.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

struct Flags {
    std::string config;
    std::vector<std::pair<std::string, CLI::Option*>> settings;
    int m = 1;
    int n = 2;
};

void add_common(CLI::App& app, Flags& f, std::map<std::string, std::string>& values) {
    app.add_option("--config", f.config, "flat key = value file; flags override it");
    const std::vector<std::pair<std::string, std::string>> keys = {
        {"dist", "gaussian | uniform | triangular | mixture | exponential | tabulated"},
        {"params", "comma-separated family parameters"},
        {"table", "two-column abscissa,density file (implies --dist tabulated)"},
        {"raw", "skip standardization (true/false)"},
        {"n-max", "largest n"},
        {"grid-points", "grid size, a power of two"},
        {"grid-span", "half-width of the base grid in standard deviations"},
        {"t-smooth", "OU time used to mollify non-smooth bases"},
        {"seed", "Monte Carlo seed"},
        {"out", "output directory"},
        {"corr-points", "grid size for kernels"},
        {"corr-n-max", "largest n for kernel checks"},
        {"mc-samples", "Monte Carlo sample size (0 disables)"},
        {"ace-bins", "ACE bins per axis"},
        {"flow-t0", "first flow time"},
        {"flow-ratio", "geometric ratio of the flow schedule"},
        {"flow-tmax", "last flow time"},
        {"tail-tol", "stop the flow once |J - 1| falls below this"},
    };
    for (const auto& [key, help] : keys) f.settings.emplace_back(key, app.add_option("--" + key, values[key], help));
    app.add_option("--tol", values["tol"], "tolerance overrides, name=value[;name=value]");
}

clt::RunConfig build_config(const Flags& f, const std::map<std::string, std::string>& values) {
    clt::RunConfig cfg;
    if (!f.config.empty()) clt::load_config_file(cfg, f.config);
    for (const auto& [key, opt] : f.settings)
        if (opt->count() > 0) clt::apply_setting(cfg, key, values.at(key));
    const auto& tol = values.at("tol");
    std::size_t start = 0;
    while (start < tol.size()) {
        auto end = tol.find(';', start);
        if (end == std::string::npos) end = tol.size();
        const std::string item = tol.substr(start, end - start);
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw clt::Error(clt::ErrorCode::ParseError, "--tol expects name=value");
        clt::apply_setting(cfg, "tol." + item.substr(0, eq), item.substr(eq + 1));
        start = end + 1;
    }
    clt::validate(cfg);
    return cfg;
}

void print(const clt::SuiteVerdict& v) {
    for (const auto& c : v.checks)
        std::printf("%s %s value=%.6g threshold=%.6g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value, c.threshold);
    std::printf("overall: %s\n", v.overall() ? "PASS" : "FAIL");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropy, Fisher information and maximal correlation checks for normalized sums"};
    app.require_subcommand(1);

    Flags flags;
    std::map<std::string, std::string> values;
    auto* functionals = app.add_subcommand("functionals", "h and J of U_1..U_n_max");
    auto* maxcorr = app.add_subcommand("maxcorr", "grid and ACE maximal correlation of (S_m, S_n)");
    auto* debruijn = app.add_subcommand("debruijn", "entropy gap from the integrated Fisher information along the OU flow");
    auto* scorecheck = app.add_subcommand("scorecheck", "score projection error at two grid sizes");
    auto* verify = app.add_subcommand("verify", "every check over the default density battery");
    for (auto* sub : {functionals, maxcorr, debruijn, scorecheck, verify}) {
        sub->fallthrough(false);
        add_common(*sub, flags, values);
    }
    maxcorr->add_option("-m", flags.m, "index of the smaller sum");
    maxcorr->add_option("-n", flags.n, "index of the larger sum");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    clt::RunConfig cfg;
    try {
        cfg = build_config(flags, values);
        clt::prepare_output_dir(cfg.output_dir);
    } catch (const clt::Error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    }

    try {
        clt::RunResult result;
        if (functionals->parsed()) result = clt::run_functionals(cfg);
        else if (maxcorr->parsed()) result = clt::run_maxcorr(cfg, flags.m, flags.n);
        else if (debruijn->parsed()) result = clt::run_debruijn(cfg);
        else if (scorecheck->parsed()) result = clt::run_scorecheck(cfg);
        else result = clt::run_verify(cfg);
        clt::write_outputs(cfg.output_dir, result);
        print(result.verdict);
        return result.verdict.overall() ? 0 : 1;
    } catch (const clt::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return clt::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
