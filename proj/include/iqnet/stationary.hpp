#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iqnet/dynamics.hpp"

namespace iqnet {

// Backward-sampling record: the system is restarted empty at times -T0*2^k and
// observed at time 0 on one shared driving realization. Values are exactly
// nondecreasing in the past depth; a site is declared converged when its value
// is unchanged across two consecutive doublings.
struct LoynesSample {
    std::vector<Offset> sites;                   // monitored sites
    std::vector<double> depths;                  // past depths actually run (T0 * 2^k)
    std::vector<std::vector<long long>> values;  // values[site][depth index]
    std::vector<char> converged;                 // per monitored site
    std::vector<long long> final_values;         // value at the deepest depth run
    bool all_converged = false;
};

// Runs the backward-sampling ladder k = 0..max_doublings (stopping early once
// every monitored site has converged). Requires a box or torus index set.
// When require_converged is true, throws not_converged if any monitored site
// is still growing at the maximum depth.
LoynesSample loynes_sample(const DynamicsConfig& config, const std::vector<Offset>& sites,
                           double base_depth, int max_doublings, std::uint64_t seed,
                           bool require_converged = true);

// One lag of the spatial covariance curve. `estimate` centers with the
// closed-form mean of the model; the empirical variant centers with the
// measured mean instead.
struct CovariancePoint {
    int lag = 0;
    double estimate = 0.0;
    double half_width = 0.0;
    double empirical_estimate = 0.0;
    double empirical_half_width = 0.0;
};

// Long-run estimates from a single stationary run, with batch-means
// half-widths (95% confidence).
struct StatReport {
    double mean = 0.0;
    double mean_half_width = 0.0;
    double second_moment = 0.0;
    double second_moment_half_width = 0.0;
    std::vector<CovariancePoint> covariance;

    // Time average of the instantaneous departure probability at the origin;
    // in steady state this matches the arrival rate.
    double origin_departure_rate = 0.0;
    double origin_departure_rate_half_width = 0.0;
    // Accepted departure events at the origin per unit time (counting variant).
    double origin_accepted_rate = 0.0;

    // Net jump rate of I(t) = x_0 * sum_j a_j x_j; vanishes in steady state.
    double drift_residual = 0.0;
    double drift_residual_half_width = 0.0;

    // Mass-transport symmetry: time averages of
    //   lhs = sum_{i != 0} R(i) a_i x_0   and   rhs = sum_{i != 0} R(0) a_i x_i,
    // where R(i) is the instantaneous departure probability at site i.
    double mass_transport_lhs = 0.0;
    double mass_transport_rhs = 0.0;
    double mass_transport_residual = 0.0;
    double mass_transport_half_width = 0.0;

    int batch_count = 0;
    double burn_in = 0.0;
    double horizon = 0.0;
    double closed_form_mu = 0.0;    // NaN when the rate is not subcritical
    bool divergent_warning = false;  // set when lambda >= critical rate
};

// Torus-mode long-run estimator. Counts are averaged over time and over all
// torus sites; covariance lags are taken along the first axis. The initial
// condition defaults to empty and is forgotten during burn_in.
StatReport ergodic_estimates(const DynamicsConfig& config, std::uint64_t seed, double burn_in,
                             double horizon, int batch_count, const std::vector<int>& lags,
                             const InitialCondition& initial = InitialCondition::zero());

// Rate-conservation diagnostics only (no covariance curve).
StatReport rate_balance_check(const DynamicsConfig& config, std::uint64_t seed, double burn_in,
                              double horizon);

// Serialization: full report to JSON; covariance curve to CSV with header
// "lag,estimate,half_width".
std::string stat_report_json(const StatReport& report);
std::string covariance_csv(const StatReport& report);

}  // namespace iqnet
