#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iqnet/dynamics.hpp"

namespace iqnet {

// Parameters of the block-wise exact construction.  Chosen so that a site is
// "open" in a block (has at least one event there) with probability at most
// p, and p times the per-site offspring bound stays below 1, which keeps the
// exploration clusters finite.
struct ConstructionParams {
    double t_hat = 0.0;           // block length
    double p = 0.0;               // per-site openness bound, in (0,1)
    long long offspring_bound = 0;  // sites a thickened ball can reach
    long long kappa = 0;          // number of blocks (set when a horizon is scheduled)
    int thickening = 0;           // interaction radius L used for thickening
    int dimension = 1;
    double safety = 0.9;
    double lambda = 0.0;          // arrival rate the parameters were built for
};

// Picks block parameters for rate lambda, interaction radius L and dimension
// d: offspring bound (2L+1)^d, p = safety / bound, t_hat = -ln(1-p)/(lambda+1).
ConstructionParams block_length(double lambda, int L, int d, double safety = 0.9);

// Nested dependency sets, one per block, built backward from the target: the
// run set of block i is levels[i-1], and levels[i] is always contained in
// levels[i-1].  A nonempty level always contains the target site.
struct DependencySchedule {
    Offset target;
    double horizon = 0.0;
    double start_time = 0.0;
    ConstructionParams params;                // kappa filled in
    std::vector<std::vector<Offset>> levels;  // levels[i-1] = sites run during block i (sorted)

    // Level accessor with the convention level(0) == level(1).
    const std::vector<Offset>& level(long long i) const;
};

// Explores the thickened open component of `j` for the 1-based block
// [(block_index-1)*t_hat, block_index*t_hat).  A site is open iff the driving
// stream has at least one arrival or potential-departure event for it inside
// the window; the returned set is the union of the L-balls of the connected
// open sites reachable from those covering `j` (empty when no open site lies
// within L of `j`).  Aborts with cluster_cap_exceeded beyond `cap` sites.
std::vector<Offset> explore_cluster(const DrivingStream& stream, long long block_index,
                                    const Offset& j, double t_hat, int L,
                                    std::size_t cap = 1000000);

// Builds the dependency sets for the value of `k` at time start_time + T by
// backward recursion over the blocks, unioning the exploration clusters of
// every site carried forward (plus the target's own cluster at every block,
// so intermittent activity at the target is never missed).
DependencySchedule dependency_schedule(const DrivingStream& stream, const Offset& k, double T,
                                       const ConstructionParams& params, double start_time = 0.0,
                                       std::size_t cap = 1000000);

// Computes the count at site `k` at time start_time + T for the
// infinite-lattice dynamics, exactly, by running the dynamics restricted to
// the dependency set of each block and threading the states forward.  The
// initial condition must be a total rule so the finite dependency sets can be
// materialized on demand.
long long evaluate(const DrivingStream& stream, const Offset& k, double T,
                   const InitialCondition& initial, const ConstructionParams& params,
                   const InterferenceSequence& seq, double start_time = 0.0,
                   std::size_t cap = 1000000);

// Reference value from one plain box run on [start_time, start_time + T):
// the box covers every scheduled site plus an (L+1) margin, so it contains
// the full dependency region of the target and must agree with evaluate()
// exactly.
long long box_reference_value(const DrivingStream& stream, const DependencySchedule& schedule,
                              const InitialCondition& initial, const InterferenceSequence& seq);

// Box radius used by box_reference_value.
int covering_box_radius(const DependencySchedule& schedule);

// One CSV row per block: "block,sites".
std::string schedule_sizes_csv(const DependencySchedule& schedule);

}  // namespace iqnet
