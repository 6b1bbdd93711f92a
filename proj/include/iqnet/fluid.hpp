#pragma once

#include <string>
#include <vector>

#include "iqnet/interference.hpp"

namespace iqnet {

// Deterministic rate profile on the window [-N, N]; entries outside are
// implicitly zero.
struct FluidState {
    int N = 0;
    std::vector<double> y;  // size 2N+1; coordinate i lives at index i+N
    double t = 0.0;

    double at(int i) const { return y[static_cast<std::size_t>(i + N)]; }
    double& at(int i) { return y[static_cast<std::size_t>(i + N)]; }
};

// Strictly unimodal symmetric profile: peak * (1 - |i|/(N+1)), all positive.
FluidState triangle_profile(int N, double peak);

double total_mass(const FluidState& state);

// Right-hand side of the rate ODE: coordinate i evolves at
// lambda - y_i / sum_j a_{i-j} y_j while positive, and at lambda when zero.
std::vector<double> fluid_rhs(const FluidState& state, double lambda,
                              const InterferenceSequence& seq);

struct FluidTrajectory {
    std::vector<FluidState> samples;
};

// Classical 4-stage explicit integration with exact post-step clamping of
// negatives to zero; states are emitted exactly at the requested sample
// times (which must be sorted and lie in [initial.t, horizon]).  Throws
// step_too_large when one step moves a coordinate by more than 50% of
// max(|previous value|, 1), which only happens for absurdly large steps
// since the right-hand side is bounded.
FluidTrajectory integrate(const FluidState& initial, double lambda,
                          const InterferenceSequence& seq, double step, double horizon,
                          const std::vector<double>& sample_times);

enum class UnimodalityClass { strict, weak, none };

// strict: symmetric, strictly decreasing in |i| from the center, all
// positive.  weak: symmetric and nonincreasing in |i|.  Comparisons use the
// given relative tolerance (default 1e-9).
UnimodalityClass unimodality(const FluidState& state, double tol = 1e-9);

struct LyapunovRecord {
    double J = 0.0;                    // sum_i y_i * sum_j a_j y_{i+j}
    double slope_bound_width3 = 0.0;   // (4(3*lambda-1)N - 2*lambda) * y_N; width-3 ones only
    double slope_bound_general = 0.0;  // 2((lambda*S-1)floor(N/L) - 2S) * tail sum; NaN when L=0
};

LyapunovRecord lyapunov(const FluidState& state, const InterferenceSequence& seq, double lambda);

struct FluidVerdict {
    bool unimodality_ok = false;  // at least weak at every sample until total drain
    bool j_monotone = false;      // J nondecreasing along the samples
    bool slope_bound_ok = false;  // finite-difference dJ/dt >= width-3 bound at earlier sample
};

// Evaluates the three certification predicates on a sampled trajectory.  The
// slope check applies only under width-3 all-ones weights and is vacuously
// true otherwise; unimodality is waived once total mass falls below 1e-9 of
// the initial mass (drained states).
FluidVerdict check_trajectory(const FluidTrajectory& trajectory, const InterferenceSequence& seq,
                              double lambda, double unimodal_tol = 1e-6,
                              double slope_tol = 1e-4);

std::string fluid_verdict_json(const FluidVerdict& verdict);

// Header "t,y_-N,...,y_N,J", one row per sample.
std::string trajectory_csv(const FluidTrajectory& trajectory, const InterferenceSequence& seq);

}  // namespace iqnet
