#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iqnet/dynamics.hpp"

namespace iqnet {

// Named experiment runners binding the library modules into end-to-end,
// config-driven demonstrations with machine-readable verdicts.
enum class ExperimentKind {
    mean_vs_formula,
    covariance_figure,
    moment_bounds,
    coupling_suite,
    loynes,
    local_vs_box,
    frozen_wall,
    bounded_start_convergence,
    supercritical_growth,
    fluid_transience,
    infinite_support,
};

const char* experiment_kind_name(ExperimentKind kind);
ExperimentKind experiment_kind_from(const std::string& name);  // parse_error on unknown

// Flat key=value configuration.  Every field has a documented default; the
// parser rejects keys that the selected kind does not use.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::mean_vs_formula;
    std::string source_path;  // where the config came from (used in replay hints)

    InterferenceSequence seq{};
    std::string interference_text = "ones(3)";
    int dimension = 1;
    double lambda = 0.25;
    std::vector<std::uint64_t> seeds;

    int n = 50;              // torus/box radius
    double burn_in = 2e4;
    double horizon = 2e5;
    int batches = 30;
    double tolerance = 0.03; // relative tolerance on pooled means

    int max_lag = 25;        // covariance-figure

    long long K = 0;         // moment-bounds departure floor
    double floor_horizon = 1e4;
    int floor_n = 10;

    double min_events = 1e4;      // coupling-suite per-check event quota
    long long initial_high = 5;   // upper initial level for ordered couplings

    std::vector<int> radii = {10, 20, 40};  // loynes box radii
    double base_depth = 16.0;
    int max_doublings = 7;
    double convergence_fraction = 0.95;

    double safety = 0.9;     // local-vs-box block sizing
    double start_time = 0.0;
    InitialCondition initial = InitialCondition::zero();
    std::string initial_text = "zero";
    std::string schedule_csv; // optional dependency-schedule dump (first seed)

    int wall_radius = 5;     // frozen-wall
    bool wall_infinite = true;
    long long wall_magnitude = 0;
    std::vector<double> checkpoints = {2e3, 1e4, 5e4};
    double wall_check_time = 1e4;

    long long start_level = 5;  // bounded-start-convergence upper start

    int sample_count = 100;  // supercritical-growth regression points

    int N = 20;              // fluid window radius
    double lambda_sub = 0.2;
    double step = 1e-3;
    double fluid_horizon = 10.0;
    double drain_horizon = 200.0;
    double sample_interval = 0.5;
    bool scaling_check = false;
    std::vector<int> scales = {100, 400};
    double scaling_horizon = 2.0;
    double scaling_tolerance = 0.3;

    Rational ratio = Rational(1, 2);        // infinite-support weight ratio
    std::vector<int> trunc_radii = {8, 16};
    double path_horizon = 10.0;
    double mean_tolerance = 0.05;
    double identity_fraction = 0.95;
    int mean_seeds = 3;

    std::string out_csv;
    std::string out_json;
};

struct SeedFailure {
    std::uint64_t seed = 0;
    std::string reason;
    std::string replay;  // command line reproducing the failing run
};

struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::mean_vs_formula;
    bool pass = false;
    std::string json;  // deterministic full report
    std::string csv;   // deterministic per-kind table
    std::vector<SeedFailure> failures;
    double wall_clock_seconds = 0.0;  // never serialized: outputs must be reproducible
};

// Strict flat key=value parser: '#' comments, one `key = value` per line,
// duplicate or unknown keys rejected with the offending key and line number;
// violated preconditions surface as semantic_error naming the constraint.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& source_name = "<memory>");

// Runs the configured kind, writes the CSV/JSON artifacts when paths are
// set, and returns the report.  Identical config + seeds give byte-identical
// artifacts; every failed verdict carries an offending seed and a replay
// command line where one is attributable.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace iqnet
