#include "iqnet/local_construction.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <unordered_map>

#include "iqnet/engine.hpp"
#include "iqnet/io_util.hpp"

namespace iqnet {

namespace {

// Relative slack for re-checking exp(-(lambda+1)*t_hat) >= 1-p: the block
// length is chosen to achieve equality, so the comparison must absorb the
// rounding of exp/log.
constexpr double kParamTol = 1e-12;

void validate_params(const ConstructionParams& params, double stream_lambda) {
    if (!(params.t_hat > 0.0) || !std::isfinite(params.t_hat)) {
        fail(ErrorCode::semantic_error, "block length must be positive and finite");
    }
    if (!(params.p > 0.0 && params.p < 1.0)) {
        fail(ErrorCode::semantic_error, "openness bound p must lie in (0,1)");
    }
    if (params.offspring_bound < 1) {
        fail(ErrorCode::semantic_error, "offspring bound must be a positive integer");
    }
    if (params.p * static_cast<double>(params.offspring_bound) >= 1.0) {
        fail(ErrorCode::semantic_error, "p times the offspring bound must stay below 1");
    }
    if (params.thickening < 0 || params.dimension < 1) {
        fail(ErrorCode::semantic_error, "invalid thickening radius or dimension");
    }
    const double open_prob = -std::expm1(-(stream_lambda + 1.0) * params.t_hat);
    if (open_prob > params.p * (1.0 + kParamTol)) {
        fail(ErrorCode::semantic_error,
             "block length too long: per-block openness probability " + format_double(open_prob) +
                 " exceeds p = " + format_double(params.p));
    }
}

// Lazily answers "does `site` have any event in [a, b)?", memoizing per site.
class OpennessOracle {
public:
    OpennessOracle(const DrivingStream& stream, double a, double b)
        : stream_(stream), a_(a), b_(b) {}

    bool open(const Offset& site) {
        auto it = memo_.find(site);
        if (it != memo_.end()) return it->second;
        const bool result = scan(site);
        memo_.emplace(site, result);
        return result;
    }

private:
    bool scan(const Offset& site) {
        if (!(a_ < b_)) return false;
        const long long m0 = stream_.block_of(a_);
        const long long m1 =
            stream_.block_of(std::nextafter(b_, -std::numeric_limits<double>::infinity()));
        const std::uint64_t code = site_code(site);
        for (long long m = m0; m <= m1; ++m) {
            stream_.generate_block_into(code, m, scratch_);
            for (double t : scratch_.arrivals) {
                if (t >= a_ && t < b_) return true;
            }
            for (double t : scratch_.departure_times) {
                if (t >= a_ && t < b_) return true;
            }
        }
        return false;
    }

    const DrivingStream& stream_;
    double a_, b_;
    SiteBlock scratch_;
    std::unordered_map<Offset, bool, OffsetHash> memo_;
};

// Enumerates offsets in the L-infinity ball of radius r around `center`,
// invoking fn(site) for each.
template <class Fn>
void for_ball(const Offset& center, int r, Fn&& fn) {
    const int d = static_cast<int>(center.size());
    Offset cur = center;
    for (auto& c : cur) c -= r;
    while (true) {
        fn(cur);
        int axis = d - 1;
        while (axis >= 0) {
            if (cur[static_cast<std::size_t>(axis)] <
                center[static_cast<std::size_t>(axis)] + r) {
                ++cur[static_cast<std::size_t>(axis)];
                break;
            }
            cur[static_cast<std::size_t>(axis)] =
                center[static_cast<std::size_t>(axis)] - r;
            --axis;
        }
        if (axis < 0) break;
    }
}

// Thickened open component of `j` in one window; sorted site list.
std::vector<Offset> cluster_in_window(OpennessOracle& oracle, const Offset& j, int L,
                                      std::size_t cap, const std::string& where) {
    if (cap < 1) fail(ErrorCode::semantic_error, "cluster cap must be at least 1");

    // Seeds: open sites whose L-ball covers j (i.e. open sites within L of j).
    std::deque<Offset> frontier;
    std::unordered_map<Offset, char, OffsetHash> open_seen;  // visited open sites
    for_ball(j, L, [&](const Offset& z) {
        if (open_seen.count(z) == 0 && oracle.open(z)) {
            open_seen.emplace(z, 1);
            frontier.push_back(z);
        }
    });

    std::unordered_map<Offset, char, OffsetHash> member;  // union of balls
    auto add_ball = [&](const Offset& z) {
        for_ball(z, L, [&](const Offset& x) {
            if (member.emplace(x, 1).second && member.size() > cap) {
                fail(ErrorCode::cluster_cap_exceeded,
                     "cluster around " + offset_to_string(j) + " exceeded " +
                         std::to_string(cap) + " sites " + where);
            }
        });
    };

    while (!frontier.empty()) {
        const Offset z = frontier.front();
        frontier.pop_front();
        add_ball(z);
        // Open sites whose balls intersect ball(z) sit within 2L of z.
        for_ball(z, 2 * L, [&](const Offset& w) {
            if (open_seen.count(w) == 0 && oracle.open(w)) {
                open_seen.emplace(w, 1);
                frontier.push_back(w);
            }
        });
    }

    std::vector<Offset> out;
    out.reserve(member.size());
    for (const auto& [site, tag] : member) {
        (void)tag;
        out.push_back(site);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

ConstructionParams block_length(double lambda, int L, int d, double safety) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        fail(ErrorCode::semantic_error, "arrival rate must be finite and nonnegative");
    }
    if (L < 0) fail(ErrorCode::semantic_error, "interaction radius must be nonnegative");
    if (d < 1) fail(ErrorCode::unsupported_dimension, "dimension must be at least 1");
    if (!(safety > 0.0 && safety < 1.0)) {
        fail(ErrorCode::semantic_error, "safety factor must lie in (0,1)");
    }
    ConstructionParams params;
    params.thickening = L;
    params.dimension = d;
    params.safety = safety;
    params.lambda = lambda;
    long long bound = 1;
    for (int i = 0; i < d; ++i) bound *= 2LL * L + 1;
    params.offspring_bound = bound;
    params.p = safety / static_cast<double>(bound);
    params.t_hat = -std::log1p(-params.p) / (lambda + 1.0);
    params.kappa = 0;
    return params;
}

const std::vector<Offset>& DependencySchedule::level(long long i) const {
    if (levels.empty()) fail(ErrorCode::semantic_error, "schedule has no blocks");
    const long long idx = std::max<long long>(i, 1) - 1;
    if (idx >= static_cast<long long>(levels.size())) {
        fail(ErrorCode::site_out_of_range, "block index beyond the scheduled horizon");
    }
    return levels[static_cast<std::size_t>(idx)];
}

std::vector<Offset> explore_cluster(const DrivingStream& stream, long long block_index,
                                    const Offset& j, double t_hat, int L, std::size_t cap) {
    if (block_index < 1) fail(ErrorCode::semantic_error, "block indices are 1-based");
    if (!(t_hat > 0.0) || !std::isfinite(t_hat)) {
        fail(ErrorCode::semantic_error, "block length must be positive and finite");
    }
    if (L < 0) fail(ErrorCode::semantic_error, "thickening radius must be nonnegative");
    if (j.empty() || j.size() > 3) {
        fail(ErrorCode::unsupported_dimension, "sites must have 1 to 3 coordinates");
    }
    const double a = static_cast<double>(block_index - 1) * t_hat;
    const double b = static_cast<double>(block_index) * t_hat;
    OpennessOracle oracle(stream, a, b);
    return cluster_in_window(oracle, j, L, cap,
                             "in block " + std::to_string(block_index));
}

DependencySchedule dependency_schedule(const DrivingStream& stream, const Offset& k, double T,
                                       const ConstructionParams& params, double start_time,
                                       std::size_t cap) {
    if (!(T > 0.0) || !std::isfinite(T)) {
        fail(ErrorCode::semantic_error, "horizon must be positive and finite");
    }
    if (!std::isfinite(start_time)) fail(ErrorCode::semantic_error, "start time must be finite");
    if (static_cast<int>(k.size()) != params.dimension) {
        fail(ErrorCode::unsupported_dimension, "target site dimension does not match parameters");
    }
    validate_params(params, stream.lambda());

    DependencySchedule sched;
    sched.target = k;
    sched.horizon = T;
    sched.start_time = start_time;
    sched.params = params;
    sched.params.kappa = static_cast<long long>(std::ceil(T / params.t_hat));
    if (sched.params.kappa < 1) sched.params.kappa = 1;
    const long long kappa = sched.params.kappa;

    sched.levels.assign(static_cast<std::size_t>(kappa), {});
    const double t_end = start_time + T;
    std::vector<Offset> carried;  // L_{i+1} while building L_i
    for (long long i = kappa; i >= 1; --i) {
        const double a = start_time + static_cast<double>(i - 1) * params.t_hat;
        const double b = std::min(start_time + static_cast<double>(i) * params.t_hat, t_end);
        OpennessOracle oracle(stream, a, b);

        std::vector<Offset> level = carried;  // forced nesting
        auto add_all = [&](const std::vector<Offset>& sites) {
            level.insert(level.end(), sites.begin(), sites.end());
        };
        add_all(cluster_in_window(oracle, k, params.thickening, cap,
                                  "in block " + std::to_string(i)));
        for (const Offset& j : carried) {
            add_all(cluster_in_window(oracle, j, params.thickening, cap,
                                      "in block " + std::to_string(i)));
        }
        std::sort(level.begin(), level.end());
        level.erase(std::unique(level.begin(), level.end()), level.end());
        if (level.size() > cap) {
            fail(ErrorCode::cluster_cap_exceeded,
                 "dependency set for block " + std::to_string(i) + " exceeded " +
                     std::to_string(cap) + " sites");
        }
        sched.levels[static_cast<std::size_t>(i - 1)] = level;
        carried = std::move(level);
    }
    return sched;
}

long long evaluate(const DrivingStream& stream, const Offset& k, double T,
                   const InitialCondition& initial, const ConstructionParams& params,
                   const InterferenceSequence& seq, double start_time, std::size_t cap) {
    if (seq.support_radius() != params.thickening || seq.dimension() != params.dimension) {
        fail(ErrorCode::semantic_error,
             "construction parameters do not match the interference sequence");
    }
    if (!(T >= 0.0) || !std::isfinite(T)) {
        fail(ErrorCode::semantic_error, "horizon must be nonnegative and finite");
    }
    if (T == 0.0) return initial.value_at(k, stream.seed());

    const DependencySchedule sched = dependency_schedule(stream, k, T, params, start_time, cap);
    const long long kappa = sched.params.kappa;

    std::map<Offset, long long> state;
    for (const Offset& s : sched.levels[0]) state[s] = initial.value_at(s, stream.seed());
    long long target_value =
        state.count(k) != 0 ? state[k] : initial.value_at(k, stream.seed());

    const double t_end = start_time + T;
    for (long long i = 1; i <= kappa; ++i) {
        const std::vector<Offset>& level = sched.levels[static_cast<std::size_t>(i - 1)];
        if (level.empty()) break;  // the target is event-free from here on
        const double a = start_time + static_cast<double>(i - 1) * params.t_hat;
        const double b = std::min(start_time + static_cast<double>(i) * params.t_hat, t_end);
        if (!(a < b)) continue;

        DynamicsConfig cfg;
        cfg.seq = seq;
        cfg.lambda = stream.lambda();
        cfg.index = IndexSpec::restricted(level);

        std::map<Offset, long long> init_map;
        for (const Offset& s : level) init_map[s] = state[s];
        const RunResult r =
            run(cfg, InitialCondition::from_map(std::move(init_map)), stream, a, b);
        for (const Offset& s : level) state[s] = r.final_state.count_at(s);
        if (state.count(k) != 0) target_value = state[k];
    }
    return target_value;
}

int covering_box_radius(const DependencySchedule& schedule) {
    long long radius = 0;
    for (long long c : schedule.target) radius = std::max(radius, std::llabs(c));
    if (!schedule.levels.empty()) {
        for (const Offset& s : schedule.levels[0]) {
            for (long long c : s) radius = std::max(radius, std::llabs(c));
        }
    }
    return static_cast<int>(radius) + schedule.params.thickening + 1;
}

long long box_reference_value(const DrivingStream& stream, const DependencySchedule& schedule,
                              const InitialCondition& initial, const InterferenceSequence& seq) {
    DynamicsConfig cfg;
    cfg.seq = seq;
    cfg.lambda = stream.lambda();
    cfg.index = IndexSpec::box(covering_box_radius(schedule));
    const RunResult r = run(cfg, initial, stream, schedule.start_time,
                            schedule.start_time + schedule.horizon);
    return r.final_state.count_at(schedule.target);
}

std::string schedule_sizes_csv(const DependencySchedule& schedule) {
    std::string out = "block,sites\n";
    for (std::size_t i = 0; i < schedule.levels.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += std::to_string(schedule.levels[i].size());
        out += '\n';
    }
    return out;
}

}  // namespace iqnet
