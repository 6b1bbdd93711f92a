// Command-line front end.
//
//   iqnet run <config> [--seed S]... [--out-csv P] [--out-json P]
//   iqnet verify [--only N]...
//   iqnet dump-driving --seed S --lambda L [--site C] --t0 A --t1 B
//   iqnet fluid <config>
//
// Exit codes: 0 = all verdicts passed, 1 = a verdict failed or a run aborted,
// 2 = configuration or usage error.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iqnet/driving.hpp"
#include "iqnet/errors.hpp"
#include "iqnet/experiments.hpp"
#include "iqnet/io_util.hpp"
#include "iqnet/verify.hpp"

namespace {

bool is_config_error(const iqnet::IqnetError& e) {
    return e.code() == iqnet::ErrorCode::parse_error ||
           e.code() == iqnet::ErrorCode::semantic_error;
}

int cmd_run(const std::string& path, const std::vector<std::uint64_t>& seeds,
            const std::string& out_csv, const std::string& out_json, bool quiet) {
    iqnet::ExperimentConfig config;
    try {
        config = iqnet::parse_config(path);
        if (!seeds.empty()) {
            config.seeds = seeds;
            std::sort(config.seeds.begin(), config.seeds.end());
        }
        if (!out_csv.empty()) config.out_csv = out_csv;
        if (!out_json.empty()) config.out_json = out_json;
    } catch (const iqnet::IqnetError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    try {
        const iqnet::ExperimentReport report = iqnet::run_experiment(config);
        if (!quiet) std::fputs(report.json.c_str(), stdout);
        for (const iqnet::SeedFailure& f : report.failures) {
            std::fprintf(stderr, "FAIL seed %llu: %s\n  replay: %s\n",
                         static_cast<unsigned long long>(f.seed), f.reason.c_str(),
                         f.replay.c_str());
        }
        return report.pass ? 0 : 1;
    } catch (const iqnet::IqnetError& e) {
        if (is_config_error(e)) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        }
        std::fprintf(stderr, "run aborted: %s\n", e.what());
        return 1;
    }
}

int cmd_verify(const std::vector<int>& only) {
    std::vector<iqnet::CriterionResult> results;
    try {
        results = iqnet::run_criteria(only);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    bool all_pass = true;
    for (const iqnet::CriterionResult& r : results) {
        std::printf("%s C%d: %s — %s [%.1fs]\n", r.pass ? "PASS" : "FAIL", r.index,
                    r.name.c_str(), r.detail.c_str(), r.seconds);
        std::fflush(stdout);
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}

int cmd_dump_driving(std::uint64_t seed, double lambda, const std::vector<int>& site, double t0,
                     double t1) {
    try {
        const iqnet::DrivingStream stream(seed, lambda);
        iqnet::Offset s(site.begin(), site.end());
        if (s.empty()) s = iqnet::Offset{0};
        std::string site_label;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (k) site_label += ';';
            site_label += std::to_string(s[k]);
        }
        std::printf("time,site,kind,mark\n");
        for (const iqnet::Event& e : iqnet::events_in(stream, {s}, t0, t1)) {
            std::printf("%s,%s,%s,%s\n", iqnet::format_double(e.time).c_str(),
                        site_label.c_str(),
                        e.kind == iqnet::EventKind::arrival ? "arrival" : "potential_departure",
                        iqnet::format_double(e.mark).c_str());
        }
        return 0;
    } catch (const iqnet::IqnetError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
}

int cmd_fluid(const std::string& path) {
    iqnet::ExperimentConfig config;
    try {
        config = iqnet::parse_config(path);
        if (config.kind != iqnet::ExperimentKind::fluid_transience) {
            std::fprintf(stderr,
                         "config error: 'iqnet fluid' needs kind = fluid-transience, got %s\n",
                         iqnet::experiment_kind_name(config.kind));
            return 2;
        }
    } catch (const iqnet::IqnetError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    try {
        const iqnet::ExperimentReport report = iqnet::run_experiment(config);
        std::fputs(report.csv.c_str(), stdout);
        if (!report.pass) {
            for (const iqnet::SeedFailure& f : report.failures) {
                std::fprintf(stderr, "FAIL: %s\n", f.reason.c_str());
            }
        }
        return report.pass ? 0 : 1;
    } catch (const iqnet::IqnetError& e) {
        if (is_config_error(e)) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        }
        std::fprintf(stderr, "run aborted: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"interference queueing network simulator and verification toolkit"};
    app.require_subcommand(1);

    // run
    std::string run_config, run_csv, run_json;
    std::vector<std::uint64_t> run_seeds;
    bool run_quiet = false;
    CLI::App* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("config", run_config, "config file path")->required();
    run->add_option("--seed", run_seeds, "override the config's seed list (repeatable)");
    run->add_option("--out-csv", run_csv, "override the CSV artifact path");
    run->add_option("--out-json", run_json, "override the JSON artifact path");
    run->add_flag("--quiet", run_quiet, "suppress the JSON report on stdout");

    // verify
    std::vector<int> verify_only;
    CLI::App* verify = app.add_subcommand("verify", "run the acceptance criteria");
    verify->add_option("--only", verify_only, "run only these criterion numbers (repeatable)");

    // dump-driving
    std::uint64_t dd_seed = 1;
    double dd_lambda = 0.25, dd_t0 = 0.0, dd_t1 = 1.0;
    std::vector<int> dd_site;
    CLI::App* dump = app.add_subcommand("dump-driving",
                                        "print the deterministic event stream for one queue");
    dump->add_option("--seed", dd_seed, "driving seed")->required();
    dump->add_option("--lambda", dd_lambda, "arrival rate")->required();
    dump->add_option("--site", dd_site, "queue coordinates (repeat per dimension; default origin)");
    dump->add_option("--t0", dd_t0, "window start (inclusive)");
    dump->add_option("--t1", dd_t1, "window end (exclusive)")->required();

    // fluid
    std::string fluid_config;
    CLI::App* fluid = app.add_subcommand("fluid", "integrate the deterministic flow for a config");
    fluid->add_option("config", fluid_config, "config file path (kind = fluid-transience)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // usage problems are config errors
    }

    if (run->parsed()) return cmd_run(run_config, run_seeds, run_csv, run_json, run_quiet);
    if (verify->parsed()) return cmd_verify(verify_only);
    if (dump->parsed()) return cmd_dump_driving(dd_seed, dd_lambda, dd_site, dd_t0, dd_t1);
    if (fluid->parsed()) return cmd_fluid(fluid_config);
    return 2;
}
