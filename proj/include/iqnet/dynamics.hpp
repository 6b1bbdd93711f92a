#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "iqnet/driving.hpp"
#include "iqnet/interference.hpp"

namespace iqnet {

// Sentinel for a pinned-to-infinity count; only ever stored at frozen sites.
constexpr long long kInfiniteCount = std::numeric_limits<long long>::max();

enum class IndexMode { torus, box, restricted };

// Finite index set the dynamics runs on.  torus(n)/box(n) cover [-n,n]^d
// (torus with wrap-around neighbor arithmetic, box treating outside sites as
// empty); restricted mode runs on an arbitrary finite site list with outside
// sites treated as empty.
struct IndexSpec {
    IndexMode mode = IndexMode::torus;
    int n = 0;
    std::vector<Offset> sites; // restricted mode only

    static IndexSpec torus(int n) { return {IndexMode::torus, n, {}}; }
    static IndexSpec box(int n) { return {IndexMode::box, n, {}}; }
    static IndexSpec restricted(std::vector<Offset> sites) {
        return {IndexMode::restricted, 0, std::move(sites)};
    }
};

struct DynamicsConfig {
    InterferenceSequence seq{};
    double lambda = 0.0;
    long long K = 0;                      // departures blocked while count <= K
    IndexSpec index;
    std::map<Offset, long long> frozen;   // pinned counts (value or kInfiniteCount)
    std::set<Offset> suppressed;          // sites receiving no arrivals
};

// Total rule assigning an initial count to every site of Z^d, so restricted
// evaluations can materialize any dependency set.
struct InitialCondition {
    enum class Kind { zero, constant, map, iid_geometric, iid_power };
    Kind kind = Kind::zero;
    long long level = 0;
    std::map<Offset, long long> values;
    double param_a = 0.0; // geometric mean / power exponent
    long long cap = 0;    // power-law cap

    long long value_at(const Offset& site, std::uint64_t seed) const;

    static InitialCondition zero() { return {}; }
    static InitialCondition constant_level(long long v);
    static InitialCondition from_map(std::map<Offset, long long> m); // sparse site schedule
    static InitialCondition iid_geometric(double mean);
    static InitialCondition iid_power(double exponent, long long cap);
};

struct QueueState {
    int d = 1;
    IndexSpec index;
    std::vector<Offset> sites;    // dense lexicographic order
    std::vector<long long> counts;
    double clock = 0.0;

    long long count_at(const Offset& site) const; // 0 outside the index set
};

// Instantaneous probability that a potential-departure epoch at `site` is
// accepted: count / weighted neighborhood sum, with 0/0 := 0, 0 whenever the
// count is <= K, and 0 whenever a contributing neighbor is pinned to
// infinity.  Throws `frozen_site` for frozen sites.
double departure_probability(const QueueState& state, const DynamicsConfig& config,
                             const Offset& site);

// Applies one event to a copy of the state (arrival increments unless the
// site is frozen/suppressed; potential departure decrements iff the mark is
// at most the departure probability).  The mark comparison uses exact
// integer cross-multiplication when the weights are exact rationals.
// Throws `clock_regression` if the event is in the state's past.
QueueState apply_event(const QueueState& state, const DynamicsConfig& config, const Event& event);

struct ProbeSpec {
    std::vector<double> times;   // sorted sample times
    std::vector<Offset> sites;   // monitored sites
    bool record_probabilities = false;
};

struct ProbeSample {
    double time = 0.0;
    std::vector<long long> counts;       // one per probe site
    std::vector<double> probabilities;   // filled when requested
};

struct RunResult {
    QueueState final_state;
    std::vector<ProbeSample> samples;
    long long events_processed = 0;
    long long arrivals_accepted = 0;
    long long departures_accepted = 0;
    // Per-site accepted counts in dense site order (conservation audit).
    std::vector<long long> arrivals_by_site;
    std::vector<long long> departures_by_site;
};

// Evolves one system over [t0, t1) against the driving data.
RunResult run(const DynamicsConfig& config, const InitialCondition& initial,
              const DrivingStream& driving, double t0, double t1, const ProbeSpec& probes = {});

struct CoupledSpec {
    DynamicsConfig config;
    InitialCondition initial;
};

// Declares "counts of systems[lower] <= counts of systems[upper], site-wise
// on common sites" — checked after every event.
struct OrderingCheck {
    int lower = 0;
    int upper = 0;
};

struct OrderingViolation {
    double time = 0.0;
    Offset site;
    int lower = 0, upper = 0;
    long long lower_count = 0, upper_count = 0;
};

struct SiteTrace {
    Offset site;
    std::vector<std::pair<double, long long>> points; // (time, new count) on change
};

struct CoupledResult {
    std::vector<QueueState> finals;
    long long events_checked = 0;
    std::vector<OrderingViolation> violations;
    std::vector<std::vector<SiteTrace>> traces; // [system][traced site]
};

// Evolves several systems against one shared event list (each applies only
// the events relevant to its own index set).  With `strict` the run throws
// `ordering_violation` carrying the first counterexample; otherwise
// violations are collected for the report.
CoupledResult coupled_run(const std::vector<CoupledSpec>& specs, const DrivingStream& driving,
                          double t0, double t1, const std::vector<OrderingCheck>& checks,
                          bool strict = true, const std::vector<Offset>& trace_sites = {});

} // namespace iqnet
