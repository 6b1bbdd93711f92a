#include "iqnet/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>

#include "iqnet/errors.hpp"
#include "iqnet/io_util.hpp"
#include "json.hpp"

namespace iqnet {

namespace {

void validate_state(const FluidState& state, const char* what) {
    if (state.N < 0) {
        fail(ErrorCode::semantic_error, std::string(what) + ": window radius must be >= 0");
    }
    const std::size_t expected = 2 * static_cast<std::size_t>(state.N) + 1;
    if (state.y.size() != expected) {
        fail(ErrorCode::semantic_error,
             std::string(what) + ": profile has " + std::to_string(state.y.size()) +
                 " entries, window needs " + std::to_string(expected));
    }
    for (double v : state.y) {
        if (!std::isfinite(v) || v < 0.0) {
            fail(ErrorCode::semantic_error,
                 std::string(what) + ": profile entries must be finite and nonnegative");
        }
    }
}

void validate_inputs(double lambda, const InterferenceSequence& seq, const char* what) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
        fail(ErrorCode::semantic_error, std::string(what) + ": arrival rate must be finite and >= 0");
    }
    if (seq.dimension() != 1) {
        fail(ErrorCode::unsupported_dimension,
             std::string(what) + ": rate profiles are one-dimensional");
    }
}

// Derivative of the profile `y` (window radius N), reading negatives as zero
// so intermediate stage vectors stay inside the domain of the dynamics.
void rhs_into(const std::vector<double>& y, int N, double lambda,
              const InterferenceSequence& seq, std::vector<double>& out) {
    const int size = 2 * N + 1;
    out.resize(static_cast<std::size_t>(size));
    for (int idx = 0; idx < size; ++idx) {
        const double yi = std::max(0.0, y[static_cast<std::size_t>(idx)]);
        if (yi <= 0.0) {
            out[static_cast<std::size_t>(idx)] = lambda;
            continue;
        }
        double denom = 0.0;
        for (const auto& [offset, weight] : seq.entries()) {
            const int j = idx + offset[0];
            if (j < 0 || j >= size) continue;
            denom += weight * std::max(0.0, y[static_cast<std::size_t>(j)]);
        }
        out[static_cast<std::size_t>(idx)] = lambda - yi / denom;
    }
}

double j_value(const FluidState& state, const InterferenceSequence& seq) {
    const int size = 2 * state.N + 1;
    double total = 0.0;
    for (int idx = 0; idx < size; ++idx) {
        const double yi = state.y[static_cast<std::size_t>(idx)];
        if (yi == 0.0) continue;
        double inner = 0.0;
        for (const auto& [offset, weight] : seq.entries()) {
            const int j = idx + offset[0];
            if (j < 0 || j >= size) continue;
            inner += weight * state.y[static_cast<std::size_t>(j)];
        }
        total += yi * inner;
    }
    return total;
}

bool is_width3_ones(const InterferenceSequence& seq) {
    if (seq.dimension() != 1 || seq.support_radius() != 1) return false;
    if (seq.entries().size() != 3) return false;
    for (const auto& [offset, weight] : seq.entries()) {
        (void)offset;
        if (weight != 1.0) return false;
    }
    return true;
}

}  // namespace

FluidState triangle_profile(int N, double peak) {
    if (N < 0) fail(ErrorCode::semantic_error, "triangle_profile: window radius must be >= 0");
    if (!std::isfinite(peak) || peak <= 0.0) {
        fail(ErrorCode::semantic_error, "triangle_profile: peak must be finite and > 0");
    }
    FluidState state;
    state.N = N;
    state.y.resize(2 * static_cast<std::size_t>(N) + 1);
    for (int i = -N; i <= N; ++i) {
        state.at(i) = peak * (1.0 - static_cast<double>(std::abs(i)) / (N + 1.0));
    }
    return state;
}

double total_mass(const FluidState& state) {
    double total = 0.0;
    for (double v : state.y) total += v;
    return total;
}

std::vector<double> fluid_rhs(const FluidState& state, double lambda,
                              const InterferenceSequence& seq) {
    validate_state(state, "fluid_rhs");
    validate_inputs(lambda, seq, "fluid_rhs");
    std::vector<double> out;
    rhs_into(state.y, state.N, lambda, seq, out);
    return out;
}

FluidTrajectory integrate(const FluidState& initial, double lambda,
                          const InterferenceSequence& seq, double step, double horizon,
                          const std::vector<double>& sample_times) {
    validate_state(initial, "integrate");
    validate_inputs(lambda, seq, "integrate");
    if (!std::isfinite(step) || step <= 0.0) {
        fail(ErrorCode::semantic_error, "integrate: step must be finite and > 0");
    }
    if (!std::isfinite(horizon) || horizon < initial.t) {
        fail(ErrorCode::semantic_error, "integrate: horizon must be finite and >= the start time");
    }
    for (std::size_t k = 0; k < sample_times.size(); ++k) {
        const double s = sample_times[k];
        if (!std::isfinite(s) || s < initial.t || s > horizon) {
            fail(ErrorCode::semantic_error,
                 "integrate: sample time " + format_double(s) + " outside [" +
                     format_double(initial.t) + ", " + format_double(horizon) + "]");
        }
        if (k > 0 && s < sample_times[k - 1]) {
            fail(ErrorCode::semantic_error, "integrate: sample times must be nondecreasing");
        }
    }

    const int N = initial.N;
    const std::size_t size = initial.y.size();
    std::vector<double> cur = initial.y;
    double t = initial.t;

    FluidTrajectory trajectory;
    std::size_t next_sample = 0;
    auto emit_due_samples = [&]() {
        while (next_sample < sample_times.size() && sample_times[next_sample] <= t) {
            FluidState snap;
            snap.N = N;
            snap.y = cur;
            snap.t = sample_times[next_sample];
            trajectory.samples.push_back(std::move(snap));
            ++next_sample;
        }
    };
    emit_due_samples();

    std::vector<double> k1, k2, k3, k4;
    std::vector<double> stage(size), next(size);
    while (t < horizon) {
        double target = horizon;
        if (next_sample < sample_times.size()) {
            target = std::min(target, sample_times[next_sample]);
        }
        const bool lands = (target - t) <= step;
        const double h = lands ? (target - t) : step;
        if (h <= 0.0) {  // repeated sample time at the current clock
            emit_due_samples();
            continue;
        }

        rhs_into(cur, N, lambda, seq, k1);
        for (std::size_t i = 0; i < size; ++i) stage[i] = cur[i] + 0.5 * h * k1[i];
        rhs_into(stage, N, lambda, seq, k2);
        for (std::size_t i = 0; i < size; ++i) stage[i] = cur[i] + 0.5 * h * k2[i];
        rhs_into(stage, N, lambda, seq, k3);
        for (std::size_t i = 0; i < size; ++i) stage[i] = cur[i] + h * k3[i];
        rhs_into(stage, N, lambda, seq, k4);
        for (std::size_t i = 0; i < size; ++i) {
            const double moved =
                cur[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            next[i] = std::max(0.0, moved);
            const double change = std::abs(next[i] - cur[i]);
            if (change > 0.5 * std::max(cur[i], 1.0)) {
                fail(ErrorCode::step_too_large,
                     "integrate: coordinate " + std::to_string(static_cast<int>(i) - N) +
                         " moved by " + format_double(change) + " in one step of " +
                         format_double(h) + " at t=" + format_double(t));
            }
        }
        cur.swap(next);
        t = lands ? target : t + h;
        emit_due_samples();
    }
    emit_due_samples();
    return trajectory;
}

UnimodalityClass unimodality(const FluidState& state, double tol) {
    validate_state(state, "unimodality");
    if (!std::isfinite(tol) || tol < 0.0) {
        fail(ErrorCode::semantic_error, "unimodality: tolerance must be finite and >= 0");
    }
    const int N = state.N;
    for (int i = 1; i <= N; ++i) {
        const double a = state.at(i);
        const double b = state.at(-i);
        if (std::abs(a - b) > tol * std::max(std::abs(a), std::abs(b))) {
            return UnimodalityClass::none;
        }
    }
    bool strictly = true;
    bool weakly = true;
    for (int i = 0; i < N; ++i) {
        const double hi = state.at(i);
        const double lo = state.at(i + 1);
        const double scale = std::max(std::abs(hi), std::abs(lo));
        if (!(hi - lo > tol * scale)) strictly = false;
        if (hi - lo < -tol * scale) weakly = false;
    }
    if (!weakly) return UnimodalityClass::none;
    if (strictly) {
        bool positive = true;
        for (double v : state.y) {
            if (!(v > 0.0)) positive = false;
        }
        if (positive) return UnimodalityClass::strict;
    }
    return UnimodalityClass::weak;
}

LyapunovRecord lyapunov(const FluidState& state, const InterferenceSequence& seq, double lambda) {
    validate_state(state, "lyapunov");
    validate_inputs(lambda, seq, "lyapunov");
    LyapunovRecord record;
    record.J = j_value(state, seq);

    const int N = state.N;
    record.slope_bound_width3 =
        (4.0 * (3.0 * lambda - 1.0) * N - 2.0 * lambda) * state.at(N);

    const int L = seq.support_radius();
    if (L <= 0) {
        record.slope_bound_general = std::numeric_limits<double>::quiet_NaN();
    } else {
        const double S = seq.total_weight();
        double tail = 0.0;
        for (int j = std::max(-N, N - L); j <= N; ++j) tail += state.at(j);
        record.slope_bound_general =
            2.0 * ((lambda * S - 1.0) * static_cast<double>(N / L) - 2.0 * S) * tail;
    }
    return record;
}

FluidVerdict check_trajectory(const FluidTrajectory& trajectory, const InterferenceSequence& seq,
                              double lambda, double unimodal_tol, double slope_tol) {
    validate_inputs(lambda, seq, "check_trajectory");
    if (trajectory.samples.empty()) {
        fail(ErrorCode::semantic_error, "check_trajectory: trajectory has no samples");
    }
    for (const FluidState& s : trajectory.samples) validate_state(s, "check_trajectory");

    FluidVerdict verdict;
    verdict.unimodality_ok = true;
    verdict.j_monotone = true;
    verdict.slope_bound_ok = true;

    const double drain_threshold = 1e-9 * total_mass(trajectory.samples.front());
    bool drained = false;
    for (const FluidState& s : trajectory.samples) {
        if (total_mass(s) < drain_threshold) drained = true;
        if (drained) break;
        if (unimodality(s, unimodal_tol) == UnimodalityClass::none) {
            verdict.unimodality_ok = false;
        }
    }

    const bool slope_applies = is_width3_ones(seq);
    for (std::size_t k = 0; k + 1 < trajectory.samples.size(); ++k) {
        const FluidState& a = trajectory.samples[k];
        const FluidState& b = trajectory.samples[k + 1];
        const LyapunovRecord ra = lyapunov(a, seq, lambda);
        const LyapunovRecord rb = lyapunov(b, seq, lambda);
        if (rb.J < ra.J - 1e-9 * std::max(1.0, std::abs(ra.J))) {
            verdict.j_monotone = false;
        }
        if (slope_applies && b.t > a.t) {
            const double slope = (rb.J - ra.J) / (b.t - a.t);
            if (slope < ra.slope_bound_width3 - slope_tol) {
                verdict.slope_bound_ok = false;
            }
        }
    }
    return verdict;
}

std::string fluid_verdict_json(const FluidVerdict& verdict) {
    nlohmann::ordered_json j;
    j["unimodality_ok"] = verdict.unimodality_ok;
    j["J_monotone"] = verdict.j_monotone;
    j["slope_bound_ok"] = verdict.slope_bound_ok;
    return j.dump(2);
}

std::string trajectory_csv(const FluidTrajectory& trajectory, const InterferenceSequence& seq) {
    if (seq.dimension() != 1) {
        fail(ErrorCode::unsupported_dimension, "trajectory_csv: rate profiles are one-dimensional");
    }
    std::ostringstream out;
    if (trajectory.samples.empty()) {
        out << "t,J\n";
        return out.str();
    }
    const int N = trajectory.samples.front().N;
    out << "t";
    for (int i = -N; i <= N; ++i) out << ",y_" << i;
    out << ",J\n";
    for (const FluidState& s : trajectory.samples) {
        validate_state(s, "trajectory_csv");
        if (s.N != N) {
            fail(ErrorCode::semantic_error, "trajectory_csv: samples have mixed window radii");
        }
        out << format_double(s.t);
        for (double v : s.y) out << "," << format_double(v);
        out << "," << format_double(j_value(s, seq)) << "\n";
    }
    return out.str();
}

}  // namespace iqnet
