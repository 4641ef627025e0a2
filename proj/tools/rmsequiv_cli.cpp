// Command-line front end: equivalence tests on the RMS parameter, likelihood
// estimation, and simulation grids.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmsequiv/rmsequiv.hpp"

namespace {

using namespace rmsequiv;

enum ExitCode : int { ok = 0, usage = 2, degenerate = 3, numerical = 4 };

struct InputOptions {
    std::string path;
    std::string format = "long-csv";
    std::optional<double> sse;
};

void add_input_options(CLI::App* cmd, InputOptions& in) {
    cmd->add_option("-i,--input", in.path, "Data file ('-' reads stdin)")->required();
    cmd->add_option("-f,--format", in.format, "Input format")
        ->check(CLI::IsMember({"long-csv", "summary-csv"}))
        ->capture_default_str();
    cmd->add_option("--sse", in.sse, "Within-subject sum of squares (required for summary-csv)")
        ->check(CLI::NonNegativeNumber);
}

struct LoadedData {
    SummaryStats summary;
    std::string digest;
};

std::string digest_of(const SummaryStats& s) {
    // FNV-1a over a canonical text rendering of (m, ybar, sse).
    std::ostringstream text;
    text.precision(17);
    for (std::size_t i = 0; i < s.n(); ++i) {
        text << s.m()[i] << ':' << s.ybar()[i] << ';';
    }
    text << s.sse();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text.str()) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

LoadedData load(const InputOptions& in) {
    std::ifstream file;
    std::istream* stream = &std::cin;
    if (in.path != "-") {
        file.open(in.path);
        if (!file) {
            throw DomainError("cannot open input file '" + in.path + "'");
        }
        stream = &file;
    }
    if (in.format == "summary-csv") {
        if (!in.sse) {
            throw DomainError("--sse is required with --format summary-csv");
        }
        auto s = read_summary_csv(*stream, *in.sse);
        return {s, digest_of(s)};
    }
    if (in.sse) {
        throw DomainError("--sse applies only to summary-csv input");
    }
    auto s = summarize(read_long_csv(*stream));
    return {s, digest_of(s)};
}

// Shortest text that round-trips to the same double.
std::string number(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void echo_input(const InputOptions& in, const LoadedData& data) {
    std::cout << "# input=" << in.path << " format=" << in.format << " n=" << data.summary.n()
              << " N=" << data.summary.total() << " sse=" << number(data.summary.sse())
              << " digest=" << data.digest << '\n';
}

void write_record(const std::string& path, const nlohmann::json& record) {
    if (path.empty()) {
        return;
    }
    if (path == "-") {
        std::cout << record.dump() << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw DomainError("cannot write record file '" + path + "'");
    }
    out << record.dump() << '\n';
}

nlohmann::json params_json(const LmmParams& p) {
    return {{"mu", p.mu}, {"sigma_w", std::sqrt(p.sigma_w2)}, {"sigma_b", std::sqrt(p.sigma_b2)},
            {"rho", rms(p)}};
}

struct TestOptions {
    InputOptions input;
    double rho0 = 3.0;
    double alpha = 0.05;
    std::string method = "gt";
    std::size_t B = 10000;
    std::uint64_t seed = 1;
    std::string null_variance = "restricted";
    unsigned parallelism = 0;
    std::string record;
};

int run_test(const TestOptions& o) {
    const LoadedData data = load(o.input);
    const Method method = *parse_method(o.method);
    const Hypothesis hyp{o.rho0, o.alpha};
    hyp.validate();
    const NullVariance nv = o.null_variance == "restricted"    ? NullVariance::restricted
                            : o.null_variance == "constrained" ? NullVariance::constrained
                                                               : NullVariance::scaled;
    const unsigned par = o.parallelism == 0 ? default_parallelism() : o.parallelism;
    const bool monte_carlo = method == Method::gt || method == Method::gt_plain;

    std::cout << "# rmsequiv " << version << " test\n";
    echo_input(o.input, data);
    std::cout << "# method=" << method_name(method) << " rho0=" << number(o.rho0)
              << " alpha=" << number(o.alpha);
    if (monte_carlo) {
        std::cout << " B=" << o.B << " seed=" << o.seed << " parallelism=" << par;
    }
    if (method == Method::z_score) {
        std::cout << " null-variance=" << o.null_variance;
    }
    std::cout << '\n';

    TestResult res;
    const GtConfig cfg{o.B, o.seed, 1e-8, par};
    switch (method) {
        case Method::gt: res = gt_pvalue(data.summary, hyp, cfg); break;
        case Method::gt_plain: res = gt_pvalue_plain(data.summary, hyp, cfg); break;
        case Method::z_score: res = z_score_test(data.summary, hyp, nv); break;
        case Method::z_wald: res = z_wald_test(data.summary, hyp); break;
    }

    const std::string level = fixed(100.0 * (1.0 - o.alpha), 0) + "%";
    std::cout << "method:     " << method_label(method) << '\n'
              << "p-value:    " << fixed(res.p_value, 4) << '\n'
              << "CI(rho) " << level << ": [" << fixed(res.ci_rho.lower, 3) << ", "
              << fixed(res.ci_rho.upper, 3) << "]\n";
    if (res.ci_rho2) {
        std::cout << "CI(rho^2) " << level << ": [" << fixed(res.ci_rho2->lower, 3) << ", "
                  << fixed(res.ci_rho2->upper, 3) << "]\n";
    }
    const auto& e = res.estimates;
    std::cout << "estimates:  mu=" << fixed(e.mu, 3) << " sigma_w=" << fixed(std::sqrt(e.sigma_w2), 3)
              << " sigma_b=" << fixed(std::sqrt(e.sigma_b2), 3) << " rho=" << fixed(rms(e), 3) << '\n'
              << "decision:   " << (res.p_value < o.alpha ? "reject H0 (rho < rho0)" : "do not reject H0")
              << " at alpha=" << number(o.alpha) << '\n';

    nlohmann::json record = {{"command", "test"},
                             {"version", version},
                             {"method", std::string(method_name(method))},
                             {"input_digest", data.digest},
                             {"rho0", o.rho0},
                             {"alpha", o.alpha},
                             {"p_value", static_cast<double>(res.p_value)},
                             {"ci_rho", {res.ci_rho.lower, res.ci_rho.upper}},
                             {"estimates", params_json(res.estimates)}};
    if (res.ci_rho2) {
        record["ci_rho2"] = {res.ci_rho2->lower, res.ci_rho2->upper};
    }
    if (monte_carlo) {
        record["B"] = o.B;
        record["seed"] = o.seed;
    }
    if (method == Method::z_score) {
        record["null_variance"] = o.null_variance;
    }
    write_record(o.record, record);
    return ok;
}

int run_estimate(const InputOptions& in, const std::string& record_path) {
    const LoadedData data = load(in);
    std::cout << "# rmsequiv " << version << " estimate\n";
    echo_input(in, data);
    const FitReport fit = fit_mle(data.summary);
    const auto& p = fit.params;
    std::cout << "mu:         " << fixed(p.mu, 4) << '\n'
              << "sigma_w:    " << fixed(std::sqrt(p.sigma_w2), 4) << '\n'
              << "sigma_b:    " << fixed(std::sqrt(p.sigma_b2), 4) << '\n'
              << "rho:        " << fixed(rms(p), 4) << '\n'
              << "-2logL:     " << fixed(fit.neg2loglik, 4) << '\n'
              << "boundary:   " << (fit.boundary_sigma_b2 ? "yes (sigma_b^2 = 0)" : "no") << '\n';
    nlohmann::json record = {{"command", "estimate"},
                             {"version", version},
                             {"input_digest", data.digest},
                             {"estimates", params_json(p)},
                             {"neg2loglik", fit.neg2loglik},
                             {"converged", fit.converged},
                             {"boundary_sigma_b2", fit.boundary_sigma_b2}};
    write_record(record_path, record);
    return ok;
}

struct SimulateOptions {
    std::string config;
    unsigned parallelism = 0;
    std::string out_dir;
    std::string log_path;
    bool full_scale = false;
    std::optional<std::size_t> nsim;
    std::optional<std::size_t> B;
};

int run_simulate(const SimulateOptions& o) {
    std::ifstream file(o.config);
    if (!file) {
        throw DomainError("cannot open config file '" + o.config + "'");
    }
    auto scenarios = parse_scenarios(file);
    std::vector<std::string> problems;
    for (auto& sc : scenarios) {
        if (o.full_scale) {
            sc.nsim = 10000;
            sc.B = 10000;
        }
        if (o.nsim) {
            sc.nsim = *o.nsim;
        }
        if (o.B) {
            sc.B = *o.B;
        }
        for (auto& p : sc.problems()) {
            problems.push_back(std::move(p));
        }
    }
    if (!problems.empty()) {
        throw ConfigError(std::move(problems));
    }
    const unsigned par = o.parallelism == 0 ? default_parallelism() : o.parallelism;
    std::cout << "# rmsequiv " << version << " simulate config=" << o.config
              << " scenarios=" << scenarios.size() << " parallelism=" << par << '\n';
    for (const auto& sc : scenarios) {
        std::cout << "# " << sc.name << ": n=" << sc.n() << " mu=" << number(sc.params.mu)
                  << " sigma_w2=" << number(sc.params.sigma_w2)
                  << " sigma_b2=" << number(sc.params.sigma_b2) << " rho0=" << number(sc.hyp.rho0)
                  << " alpha=" << number(sc.hyp.alpha) << " nsim=" << sc.nsim << " B=" << sc.B
                  << " seed=" << sc.seed << '\n';
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto results = run_grid(scenarios, par);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string tables = format_tables(results);
    std::cout << '\n' << tables;

    nlohmann::json all = nlohmann::json::array();
    for (const auto& r : results) {
        all.push_back(to_json(r));
    }
    if (!o.out_dir.empty()) {
        std::filesystem::create_directories(o.out_dir);
        std::ofstream(std::filesystem::path(o.out_dir) / "tables.txt") << tables;
        std::ofstream(std::filesystem::path(o.out_dir) / "results.json") << all.dump(2) << '\n';
    }
    if (!o.log_path.empty()) {
        std::ofstream log(o.log_path);
        if (!log) {
            throw DomainError("cannot write log file '" + o.log_path + "'");
        }
        write_replicate_log(log, results);
    }
    std::cout << "total runtime: " << fixed(elapsed, 2) << " s\n";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equivalence testing of the root-mean-square difference in paired repeated measures"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(rmsequiv::version));

    TestOptions test;
    auto* test_cmd = app.add_subcommand("test", "Test H0: rho >= rho0 and report a CI for rho");
    add_input_options(test_cmd, test.input);
    test_cmd->add_option("--rho0", test.rho0, "Equivalence threshold")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    test_cmd->add_option("--alpha", test.alpha, "Significance level; CI level is 1 - alpha")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    test_cmd->add_option("-m,--method", test.method, "Test procedure")
        ->check(CLI::IsMember({"gt", "gt-plain", "zscore", "zwald"}))
        ->capture_default_str();
    test_cmd->add_option("-B,--B", test.B, "Monte Carlo size")
        ->check(CLI::Range(std::size_t{100}, std::size_t{100000000}))
        ->capture_default_str();
    test_cmd->add_option("--seed", test.seed, "Random seed")->capture_default_str();
    test_cmd->add_option("--null-variance", test.null_variance, "Null parameters for the Z-score variance")
        ->check(CLI::IsMember({"restricted", "constrained", "scaled"}))
        ->capture_default_str();
    test_cmd->add_option("-j,--parallelism", test.parallelism,
                         "Worker threads (0: $RMSEQUIV_PARALLELISM or all cores)");
    test_cmd->add_option("--record", test.record, "Write a JSON record to this file ('-' for stdout)");

    InputOptions est_in;
    std::string est_record;
    auto* est_cmd = app.add_subcommand("estimate", "Maximum-likelihood estimates of (mu, sigma_w, sigma_b)");
    add_input_options(est_cmd, est_in);
    est_cmd->add_option("--record", est_record, "Write a JSON record to this file ('-' for stdout)");

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation grid from a scenario file");
    sim_cmd->add_option("config", sim.config, "Scenario file")->required();
    sim_cmd->add_option("-j,--parallelism", sim.parallelism,
                        "Worker threads (0: $RMSEQUIV_PARALLELISM or all cores)");
    sim_cmd->add_option("-o,--out", sim.out_dir, "Directory for tables.txt and results.json");
    sim_cmd->add_option("--log", sim.log_path, "Per-replicate JSON-lines log");
    sim_cmd->add_flag("--full-scale", sim.full_scale, "Use nsim = B = 10000");
    sim_cmd->add_option("--nsim", sim.nsim, "Override nsim for every scenario");
    sim_cmd->add_option("--B", sim.B, "Override B for every scenario");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (*test_cmd) {
            return run_test(test);
        }
        if (*est_cmd) {
            return run_estimate(est_in, est_record);
        }
        return run_simulate(sim);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const ConfigError& e) {
        std::cerr << "error: invalid scenario file\n";
        for (const auto& p : e.problems()) {
            std::cerr << "  " << p << '\n';
        }
        return usage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const ValidationError& e) {
        std::cerr << "error: invalid data: " << e.what() << '\n';
        return degenerate;
    } catch (const DegenerateDataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return degenerate;
    } catch (const NumericalError& e) {
        std::cerr << "error: numerical failure: " << e.what() << '\n';
        return numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numerical;
    }
}
