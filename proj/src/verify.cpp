#include "iqnet/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "iqnet/dynamics.hpp"
#include "iqnet/experiments.hpp"
#include "iqnet/interference.hpp"
#include "iqnet/io_util.hpp"
#include <cstdio>
#include "iqnet/stationary.hpp"
#include "json.hpp"

namespace iqnet {

namespace {

using nlohmann::json;

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
    std::iota(seeds.begin(), seeds.end(), first);
    return seeds;
}

struct Pooled {
    double estimate = 0.0;
    double half_width = 0.0;
};

Pooled pool(const std::vector<std::pair<double, double>>& parts) {
    Pooled p;
    if (parts.empty()) return p;
    double sq = 0.0;
    for (const auto& [est, hw] : parts) {
        p.estimate += est;
        sq += hw * hw;
    }
    p.estimate /= static_cast<double>(parts.size());
    p.half_width = std::sqrt(sq) / static_cast<double>(parts.size());
    return p;
}

// Baseline setup shared by several criteria: width-3 all-ones weights,
// lambda = 0.25, torus with 101 sites, burn-in 2e4, horizon 2e5, ten seeds.
struct Setup1 {
    static constexpr double kLambda = 0.25;
    static constexpr double kBurnIn = 2e4;
    static constexpr double kHorizon = 2e5;
    static constexpr int kBatches = 30;
    static constexpr int kTorus = 50;

    DynamicsConfig config;
    std::vector<std::uint64_t> seeds = seed_range(101, 10);

    Setup1() {
        config.seq = ones_sequence(1, 3);
        config.lambda = kLambda;
        config.index = IndexSpec::torus(kTorus);
    }
};

// Lazily computed shared state, so running several criteria in one process
// does not repeat the expensive baseline simulations.
struct VerifyContext {
    Setup1 setup1;
    std::vector<StatReport> setup1_reports;  // empty until computed
    double setup1_seconds = 0.0;

    const std::vector<StatReport>& baseline() {
        if (setup1_reports.empty()) {
            const double t0 = now_seconds();
            for (std::uint64_t seed : setup1.seeds) {
                setup1_reports.push_back(ergodic_estimates(setup1.config, seed, Setup1::kBurnIn,
                                                           Setup1::kHorizon, Setup1::kBatches,
                                                           {}));
            }
            setup1_seconds = now_seconds() - t0;
        }
        return setup1_reports;
    }
};

// Human-facing rounding for detail lines; artifacts keep full precision.
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// --- criterion 1: pooled stationary mean vs the closed form ----------------

CriterionResult criterion_mean(VerifyContext& ctx) {
    CriterionResult r;
    r.name = "stationary mean matches the closed form";
    const double reference = closed_form_mean(ctx.setup1.config.seq, Setup1::kLambda);  // = 1.0
    std::vector<std::pair<double, double>> parts;
    for (const StatReport& s : ctx.baseline()) parts.emplace_back(s.mean, s.mean_half_width);
    const Pooled p = pool(parts);
    const double rel = std::abs(p.estimate - reference) / reference;
    const bool mean_ok = rel <= 0.03;
    const bool time_ok = ctx.setup1_seconds < 120.0;
    r.pass = mean_ok && time_ok;
    r.detail = "pooled mean " + fmt(p.estimate) + " +/- " + fmt(p.half_width) + " vs " +
               fmt(reference) + ", rel err " + fmt(rel) + " (<= 0.03), baseline took " +
               fmt(ctx.setup1_seconds) + "s (< 120s)";
    return r;
}

// --- criterion 2: near-critical mean and covariance curve ------------------

CriterionResult criterion_covariance(VerifyContext&) {
    CriterionResult r;
    r.name = "near-critical mean and covariance curve";
    ExperimentConfig c;
    c.kind = ExperimentKind::covariance_figure;
    c.interference_text = "ones(7)";
    c.seq = ones_sequence(1, 7);
    c.lambda = 0.1419;
    c.n = 25;
    c.burn_in = 2e5;
    c.horizon = 2e6;
    c.batches = 30;
    c.tolerance = 0.10;
    c.max_lag = 25;
    c.seeds = seed_range(911, 10);
    const double t0 = now_seconds();
    const ExperimentReport rep = run_experiment(c);
    const double dt = now_seconds() - t0;
    const json j = json::parse(rep.json);
    const double mean = j["results"]["pooled_mean"].get<double>();
    const double reference = j["results"]["reference"].get<double>();
    const double lag0 = j["results"]["curve"][0]["estimate"].get<double>();
    const double lag10 = j["results"]["curve"][10]["estimate"].get<double>();
    const bool time_ok = dt < 600.0;
    r.pass = rep.pass && time_ok;
    r.detail = "pooled mean " + fmt(mean) + " vs " + fmt(reference) + " (+/-10%), lag0 " +
               fmt(lag0) + ", lag10 " + fmt(lag10) + ", " + fmt(dt) + "s (< 600s)";
    return r;
}

// --- criterion 3: departure acceptance rate at the origin ------------------

CriterionResult criterion_origin_rate(VerifyContext& ctx) {
    CriterionResult r;
    r.name = "origin departure rate equals the arrival rate";
    double acc = 0.0;
    for (const StatReport& s : ctx.baseline()) acc += s.origin_accepted_rate;
    acc /= static_cast<double>(ctx.baseline().size());
    const double rel = std::abs(acc - Setup1::kLambda) / Setup1::kLambda;
    r.pass = rel <= 0.02;
    r.detail = "pooled accepted-departure rate " + fmt(acc) + " vs " + fmt(Setup1::kLambda) +
               ", rel err " + fmt(rel) + " (<= 0.02)";
    return r;
}

// --- criterion 4: mass-transport symmetry residual --------------------------

CriterionResult criterion_mass_transport(VerifyContext& ctx) {
    CriterionResult r;
    r.name = "mass-transport residual consistent with zero";
    std::vector<std::pair<double, double>> parts;
    for (const StatReport& s : ctx.baseline()) {
        parts.emplace_back(s.mass_transport_residual, s.mass_transport_half_width);
    }
    const Pooled p = pool(parts);
    r.pass = std::abs(p.estimate) <= 3.0 * p.half_width;
    r.detail = "pooled residual " + fmt(p.estimate) + ", 3 half-widths " +
               fmt(3.0 * p.half_width);
    return r;
}

// --- criterion 5: exact ordering couplings ----------------------------------

CriterionResult criterion_couplings(VerifyContext&) {
    CriterionResult r;
    r.name = "exact ordering couplings hold";
    ExperimentConfig c;
    c.kind = ExperimentKind::coupling_suite;
    c.interference_text = "ones(3)";
    c.seq = ones_sequence(1, 3);
    c.lambda = 0.25;
    c.n = 10;
    c.horizon = 1e3;
    c.min_events = 1e4;
    c.initial_high = 5;
    c.seeds = seed_range(201, 50);
    const ExperimentReport rep = run_experiment(c);
    long long min_events = std::numeric_limits<long long>::max();
    const json j = json::parse(rep.json);
    for (const auto& run : j["results"]["runs"]) {
        min_events = std::min(min_events, run["events"].get<long long>());
    }
    r.pass = rep.pass;
    r.detail = "3 orderings x 50 seeds, min events per run " + std::to_string(min_events) +
               " (>= 10000), violations 0 required, failures " +
               std::to_string(rep.failures.size());
    return r;
}

// --- criterion 6: backward-sampling monotonicity and convergence ------------

CriterionResult criterion_backward_sampling(VerifyContext&) {
    CriterionResult r;
    r.name = "backward sampling monotone in depth and radius, convergent";
    ExperimentConfig c;
    c.kind = ExperimentKind::loynes;
    c.interference_text = "ones(3)";
    c.seq = ones_sequence(1, 3);
    c.lambda = 0.25;
    c.radii = {10, 20, 40};
    c.base_depth = 16.0;
    c.max_doublings = 7;  // deepest restart 16 * 2^7 = 2048
    c.convergence_fraction = 0.95;
    c.seeds = seed_range(301, 100);
    const ExperimentReport rep = run_experiment(c);
    const json j = json::parse(rep.json);
    const double fraction = j["results"]["converged_fraction_largest_radius"].get<double>();
    r.pass = rep.pass;
    r.detail = "converged fraction at radius 40 " + fmt(fraction) +
               " (>= 0.95), radius/depth monotone exact, failures " +
               std::to_string(rep.failures.size());
    return r;
}

// --- criterion 7: restricted window equals the box reference ----------------

CriterionResult criterion_local_window(VerifyContext&) {
    CriterionResult r;
    r.name = "restricted evaluation equals the box simulation";
    ExperimentConfig c;
    c.kind = ExperimentKind::local_vs_box;
    c.interference_text = "ones(3)";
    c.seq = ones_sequence(1, 3);
    c.lambda = 0.3;
    c.horizon = 5.0;
    c.seeds = seed_range(1, 100);
    const ExperimentReport rep = run_experiment(c);
    const json j = json::parse(rep.json);
    r.pass = rep.pass;
    r.detail = "matches " + std::to_string(j["results"]["matches"].get<long long>()) + "/100 (exact)";
    return r;
}

// --- criterion 8: second-moment bound ---------------------------------------

CriterionResult criterion_second_moment(VerifyContext& ctx) {
    CriterionResult r;
    r.name = "second moment below the contraction bound";
    const SecondMomentBound bound = second_moment_bound(ctx.setup1.config.seq, Setup1::kLambda);
    std::vector<std::pair<double, double>> parts;
    for (const StatReport& s : ctx.baseline()) {
        parts.emplace_back(s.second_moment, s.second_moment_half_width);
    }
    const Pooled p = pool(parts);
    r.pass = p.estimate <= bound.bound + 3.0 * p.half_width;
    r.detail = "pooled E[x0^2] " + fmt(p.estimate) + " <= " + fmt(bound.bound) + " + " +
               fmt(3.0 * p.half_width);
    return r;
}

// --- criterion 9: floor dynamics exact, shifted mean bounded ----------------

CriterionResult criterion_floor(VerifyContext&) {
    CriterionResult r;
    r.name = "floor respected exactly and shifted mean bounded";
    ExperimentConfig c;
    c.kind = ExperimentKind::moment_bounds;
    c.interference_text = "ones(3)";
    c.seq = ones_sequence(1, 3);
    c.lambda = 0.25;
    c.n = 50;
    c.burn_in = 2e4;
    c.horizon = 2e5;
    c.batches = 30;
    c.K = 2;
    c.floor_n = 10;
    c.floor_horizon = 1e4;
    c.seeds = seed_range(401, 5);
    const ExperimentReport rep = run_experiment(c);
    const json j = json::parse(rep.json);
    const double k_mean = j["results"]["k_mean"].get<double>();
    const double k_hw = j["results"]["k_half_width"].get<double>();
    const double k_bound = j["results"]["k_bound"].get<double>();
    const long long violations = j["results"]["floor_violations"].get<long long>();
    const long long audited = j["results"]["floor_events"].get<long long>();
    r.pass = rep.pass;
    r.detail = "floor violations " + std::to_string(violations) + "/" + std::to_string(audited) +
               " events (exact), shifted mean " + fmt(k_mean) + " <= " + fmt(k_bound) + " + " +
               fmt(3.0 * k_hw);
    return r;
}

// --- criterion 10: infinite walls -------------------------------------------

CriterionResult criterion_walls(VerifyContext&) {
    CriterionResult r;
    r.name = "infinite walls force growth with a Poisson boundary count";
    ExperimentConfig c;
    c.kind = ExperimentKind::frozen_wall;
    c.interference_text = "ones(3)";
    c.seq = ones_sequence(1, 3);
    c.lambda = 0.3;
    c.wall_radius = 5;
    c.wall_infinite = true;
    c.checkpoints = {2e3, 1e4, 5e4};
    c.wall_check_time = 1e4;
    c.seeds = seed_range(521, 20);
    const ExperimentReport rep = run_experiment(c);
    const json j = json::parse(rep.json);
    std::string med;
    for (const auto& m : j["results"]["medians"]) {
        med += (med.empty() ? "" : " -> ") + fmt(m["median_origin"].get<double>());
    }
    r.pass = rep.pass;
    r.detail = "wall-adjacent counts within 3 sd of 3000 for 20 seeds, no departures next to "
               "walls, medians " + med + " strictly increasing";
    return r;
}

// --- criterion 11: bounded starts meet --------------------------------------

CriterionResult criterion_bounded_start(VerifyContext& ctx) {
    CriterionResult r;
    r.name = "level-5 and empty starts agree after burn-in";
    std::vector<std::pair<double, double>> lo_parts, hi_parts;
    for (const StatReport& s : ctx.baseline()) lo_parts.emplace_back(s.mean, s.mean_half_width);
    for (std::uint64_t seed : ctx.setup1.seeds) {
        const StatReport s =
            ergodic_estimates(ctx.setup1.config, seed, Setup1::kBurnIn, Setup1::kHorizon,
                              Setup1::kBatches, {}, InitialCondition::constant_level(5));
        hi_parts.emplace_back(s.mean, s.mean_half_width);
    }
    const Pooled lo = pool(lo_parts);
    const Pooled hi = pool(hi_parts);
    const double gap = std::abs(hi.estimate - lo.estimate);
    const double allowance = 3.0 * (hi.half_width + lo.half_width);
    r.pass = gap <= allowance;
    r.detail = "means " + fmt(hi.estimate) + " (level 5) vs " + fmt(lo.estimate) +
               " (empty), gap " + fmt(gap) + " <= " + fmt(allowance);
    return r;
}

// --- criterion 12: supercritical growth -------------------------------------

CriterionResult criterion_growth(VerifyContext&) {
    CriterionResult r;
    r.name = "supercritical total count grows linearly";
    ExperimentConfig c;
    c.kind = ExperimentKind::supercritical_growth;
    c.interference_text = "ones(3)";
    c.seq = ones_sequence(1, 3);
    c.lambda = 0.5;
    c.n = 50;
    c.horizon = 1e4;
    c.sample_count = 50;
    c.seeds = seed_range(701, 3);
    const ExperimentReport rep = run_experiment(c);
    const json j = json::parse(rep.json);
    r.pass = rep.pass;
    r.detail = "min t-stat " + fmt(j["results"]["min_t_stat"].get<double>()) +
               " (> 10), slopes positive over horizon 1e4";
    return r;
}

// --- criterion 13: fluid suite ----------------------------------------------

CriterionResult criterion_fluid(VerifyContext&) {
    CriterionResult r;
    r.name = "fluid profile shape, energy growth, drain, and step control";
    ExperimentConfig c;
    c.kind = ExperimentKind::fluid_transience;
    c.interference_text = "ones(3)";
    c.seq = ones_sequence(1, 3);
    c.lambda = 0.4;
    c.N = 20;
    c.lambda_sub = 0.2;
    c.step = 1e-3;
    c.fluid_horizon = 10.0;
    c.drain_horizon = 200.0;
    c.sample_interval = 0.5;
    c.seeds = {1};
    const double t0 = now_seconds();
    const ExperimentReport rep = run_experiment(c);
    const double dt = now_seconds() - t0;
    const json j = json::parse(rep.json);
    const bool time_ok = dt < 60.0;
    r.pass = rep.pass && time_ok;
    r.detail = "unimodal at every sample (1e-6), J nondecreasing, slope >= bound - 1e-4, "
               "halving diff " + fmt(j["results"]["halving_max_diff"].get<double>()) +
               " (<= 1e-5), drain ratio " + fmt(j["results"]["drain_ratio"].get<double>()) +
               " (< 1e-2), " + fmt(dt) + "s (< 60s)";
    return r;
}

// --- criterion 14: truncation stability --------------------------------------

CriterionResult criterion_truncation(VerifyContext&) {
    CriterionResult r;
    r.name = "geometric-tail truncations agree site-wise and stay near the mean";
    ExperimentConfig c;
    c.kind = ExperimentKind::infinite_support;
    c.lambda = 0.25;
    c.ratio = Rational(1, 2);
    c.trunc_radii = {8, 16};
    c.n = 16;
    c.path_horizon = 10.0;
    c.burn_in = 2e4;
    c.horizon = 2e5;
    c.batches = 30;
    c.mean_seeds = 3;
    c.mean_tolerance = 0.05;
    c.identity_fraction = 0.95;
    c.seeds = seed_range(1, 100);
    c.seq = geometric_sequence(c.dimension, c.ratio, c.trunc_radii.back());
    c.interference_text = "geometric(1/2, 16)";
    const ExperimentReport rep = run_experiment(c);
    const json j = json::parse(rep.json);
    r.pass = rep.pass;
    r.detail = "origin-path identity " +
               fmt(j["results"]["identical_fraction_origin"].get<double>()) +
               " (>= 0.95; full-configuration " +
               fmt(j["results"]["identical_fraction_full"].get<double>()) + "), mean " +
               fmt(j["results"]["pooled_mean"].get<double>()) + " vs 1 (+/-5%)";
    return r;
}

using CriterionFn = CriterionResult (*)(VerifyContext&);

constexpr CriterionFn kCriteria[kCriterionCount] = {
    criterion_mean,           criterion_covariance, criterion_origin_rate,
    criterion_mass_transport, criterion_couplings,  criterion_backward_sampling,
    criterion_local_window,   criterion_second_moment, criterion_floor,
    criterion_walls,          criterion_bounded_start, criterion_growth,
    criterion_fluid,          criterion_truncation,
};

}  // namespace

std::vector<CriterionResult> run_criteria(std::vector<int> indices) {
    if (indices.empty()) {
        indices.resize(kCriterionCount);
        std::iota(indices.begin(), indices.end(), 1);
    }
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    for (int i : indices) {
        if (i < 1 || i > kCriterionCount) {
            throw std::out_of_range("criterion index " + std::to_string(i) +
                                    " outside 1.." + std::to_string(kCriterionCount));
        }
    }
    VerifyContext ctx;
    std::vector<CriterionResult> results;
    for (int i : indices) {
        const double t0 = now_seconds();
        CriterionResult r;
        try {
            r = kCriteria[i - 1](ctx);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        if (r.name.empty()) r.name = "criterion " + std::to_string(i);
        r.index = i;
        r.seconds = now_seconds() - t0;
        results.push_back(std::move(r));
    }
    return results;
}

CriterionResult run_criterion(int index) { return run_criteria({index}).front(); }

}  // namespace iqnet
