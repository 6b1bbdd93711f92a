#include "iqnet/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>

#include "iqnet/engine.hpp"

namespace iqnet {

namespace {

constexpr std::uint64_t kInitialTag = 0xa4093822299f31d0ULL;

long long wrap_coord(long long c, int n) {
    const long long period = 2LL * n + 1;
    long long r = (c + n) % period;
    if (r < 0) r += period;
    return r - n;
}

Offset shifted_site(const Offset& site, const Offset& off, const IndexSpec& index) {
    Offset t(site.size());
    for (std::size_t k = 0; k < site.size(); ++k) {
        long long c = site[k] + off[k];
        if (index.mode == IndexMode::torus) c = wrap_coord(c, index.n);
        t[k] = c;
    }
    return t;
}

std::uint64_t clamp_mark_bits(const Event& event) {
    if (event.mark_bits != 0) return event.mark_bits;
    double m = event.mark;
    if (m < 0.0) m = 0.0;
    if (m > 1.0) m = 1.0;
    const double scaled = m * 9007199254740992.0; // 2^53
    const double cap = 9007199254740991.0;        // 2^53 - 1
    return static_cast<std::uint64_t>(scaled > cap ? cap : scaled);
}

} // namespace

// ---------------------------------------------------------------------------
// Initial conditions

InitialCondition InitialCondition::constant_level(long long v) {
    if (v < 0) fail(ErrorCode::semantic_error, "initial level must be nonnegative");
    InitialCondition ic;
    ic.kind = Kind::constant;
    ic.level = v;
    return ic;
}

InitialCondition InitialCondition::from_map(std::map<Offset, long long> m) {
    for (const auto& [site, v] : m)
        if (v < 0 || v == kInfiniteCount)
            fail(ErrorCode::semantic_error,
                 "initial count at " + offset_to_string(site) + " must be a finite nonnegative value");
    InitialCondition ic;
    ic.kind = Kind::map;
    ic.values = std::move(m);
    return ic;
}

InitialCondition InitialCondition::iid_geometric(double mean) {
    if (!(mean > 0.0)) fail(ErrorCode::semantic_error, "geometric mean must be positive");
    InitialCondition ic;
    ic.kind = Kind::iid_geometric;
    ic.param_a = mean;
    return ic;
}

InitialCondition InitialCondition::iid_power(double exponent, long long cap) {
    if (!(exponent > 1.0)) fail(ErrorCode::semantic_error, "power-law exponent must exceed 1");
    if (cap < 1) fail(ErrorCode::semantic_error, "power-law cap must be at least 1");
    InitialCondition ic;
    ic.kind = Kind::iid_power;
    ic.param_a = exponent;
    ic.cap = cap;
    return ic;
}

long long InitialCondition::value_at(const Offset& site, std::uint64_t seed) const {
    switch (kind) {
    case Kind::zero:
        return 0;
    case Kind::constant:
        return level;
    case Kind::map: {
        auto it = values.find(site);
        return it == values.end() ? 0 : it->second;
    }
    case Kind::iid_geometric: {
        SplitMix64 g{mix64(mix64(seed ^ kInitialTag) ^ site_code(site))};
        const double u = g.next_double();
        const double p = 1.0 / (1.0 + param_a);
        return static_cast<long long>(std::floor(std::log1p(-u) / std::log1p(-p)));
    }
    case Kind::iid_power: {
        SplitMix64 g{mix64(mix64(seed ^ kInitialTag) ^ site_code(site))};
        const double u = g.next_double();
        const double v = std::pow(1.0 - u, -1.0 / (param_a - 1.0));
        long long k = v >= 2e18 ? cap : static_cast<long long>(std::floor(v)) - 1;
        if (k < 0) k = 0;
        return std::min(cap, k);
    }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Index sets and the event universe

std::vector<Offset> index_sites(const IndexSpec& index, int d) {
    if (index.mode == IndexMode::restricted) {
        std::vector<Offset> sites = index.sites;
        for (const auto& s : sites)
            if (static_cast<int>(s.size()) != d)
                fail(ErrorCode::semantic_error, "restricted site dimension mismatch");
        std::sort(sites.begin(), sites.end());
        sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
        if (sites.empty()) fail(ErrorCode::semantic_error, "restricted index set is empty");
        return sites;
    }
    if (index.n < 0) fail(ErrorCode::semantic_error, "index radius must be nonnegative");
    const long long side = 2LL * index.n + 1;
    long long total = 1;
    for (int k = 0; k < d; ++k) total *= side;
    std::vector<Offset> sites;
    sites.reserve(static_cast<std::size_t>(total));
    Offset cur(static_cast<std::size_t>(d), -index.n);
    while (true) {
        sites.push_back(cur);
        int k = d - 1;
        while (k >= 0 && cur[static_cast<std::size_t>(k)] == index.n) {
            cur[static_cast<std::size_t>(k)] = -index.n;
            --k;
        }
        if (k < 0) break;
        ++cur[static_cast<std::size_t>(k)];
    }
    return sites;
}

Universe make_universe(const std::vector<const std::vector<Offset>*>& site_lists, int d) {
    Universe uni;
    uni.d = d;
    for (const auto* list : site_lists)
        uni.sites.insert(uni.sites.end(), list->begin(), list->end());
    std::sort(uni.sites.begin(), uni.sites.end());
    uni.sites.erase(std::unique(uni.sites.begin(), uni.sites.end()), uni.sites.end());
    uni.codes.reserve(uni.sites.size());
    uni.rank.reserve(uni.sites.size());
    for (std::size_t u = 0; u < uni.sites.size(); ++u) {
        uni.codes.push_back(site_code(uni.sites[u]));
        uni.rank.emplace(uni.sites[u], static_cast<int>(u));
    }
    return uni;
}

// ---------------------------------------------------------------------------
// EngineSystem

EngineSystem::EngineSystem(const DynamicsConfig& config, const InitialCondition& initial,
                           std::uint64_t seed)
    : config_(config), d_(config.seq.dimension()) {
    if (config_.lambda < 0.0) fail(ErrorCode::semantic_error, "arrival rate must be nonnegative");
    if (config_.K < 0) fail(ErrorCode::semantic_error, "departure floor must be nonnegative");
    K_ = config_.K;
    if (config_.index.mode == IndexMode::torus)
        require_torus_fits(config_.index.n, config_.seq.support_radius());

    sites_ = index_sites(config_.index, d_);
    const std::size_t M = sites_.size();
    rank_.reserve(M);
    for (std::size_t i = 0; i < M; ++i) rank_.emplace(sites_[i], static_cast<int>(i));

    const auto& entries = config_.seq.entries();
    support_size_ = static_cast<int>(entries.size());
    weight_f_.reserve(entries.size());
    for (const auto& [off, w] : entries) weight_f_.push_back(w);
    exact_ = config_.seq.exact();
    if (exact_) {
        weight_num_ = config_.seq.exact_numerators();
        weight_den_ = config_.seq.common_denominator();
    }

    nbr_.assign(M * entries.size(), -1);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const Offset target = shifted_site(sites_[i], entries[k].first, config_.index);
            auto it = rank_.find(target);
            if (it != rank_.end()) nbr_[i * entries.size() + k] = it->second;
        }
    }

    frozen_.assign(M, 0);
    suppressed_.assign(M, 0);
    counts_.assign(M, 0);
    for (std::size_t i = 0; i < M; ++i) {
        const long long v = initial.value_at(sites_[i], seed);
        if (v < 0 || v == kInfiniteCount)
            fail(ErrorCode::semantic_error, "initial count out of range at " + offset_to_string(sites_[i]));
        counts_[i] = v;
    }
    for (const auto& [site, v] : config_.frozen) {
        auto it = rank_.find(site);
        if (it == rank_.end())
            fail(ErrorCode::semantic_error,
                 "frozen site " + offset_to_string(site) + " is outside the index set");
        if (v != kInfiniteCount && v < 0)
            fail(ErrorCode::semantic_error, "frozen count must be nonnegative or pinned-infinite");
        frozen_[static_cast<std::size_t>(it->second)] = 1;
        counts_[static_cast<std::size_t>(it->second)] = v;
    }
    for (const auto& site : config_.suppressed) {
        auto it = rank_.find(site);
        if (it == rank_.end())
            fail(ErrorCode::semantic_error,
                 "suppressed site " + offset_to_string(site) + " is outside the index set");
        suppressed_[static_cast<std::size_t>(it->second)] = 1;
    }

    arrivals_by_site_.assign(M, 0);
    departures_by_site_.assign(M, 0);
}

void EngineSystem::bind_universe(const Universe& uni) {
    remap_.assign(uni.sites.size(), -1);
    for (std::size_t u = 0; u < uni.sites.size(); ++u) {
        auto it = rank_.find(uni.sites[u]);
        if (it != rank_.end()) remap_[u] = it->second;
    }
}

bool EngineSystem::accept_departure(int i, std::uint64_t mark) {
    const std::size_t ii = static_cast<std::size_t>(i);
    const long long xi = counts_[ii];
    if (xi <= K_) return false;
    const std::size_t S = static_cast<std::size_t>(support_size_);
    const std::int32_t* nb = &nbr_[ii * S];

    if (exact_) {
        unsigned __int128 dnum = 0;
        for (std::size_t k = 0; k < S; ++k) {
            const std::int32_t j = nb[k];
            if (j < 0) continue;
            const long long xj = counts_[static_cast<std::size_t>(j)];
            if (xj == kInfiniteCount) return false;
            dnum += static_cast<unsigned __int128>(static_cast<unsigned long long>(weight_num_[k])) *
                    static_cast<unsigned long long>(xj);
        }
        if (dnum == 0) return false;
        constexpr unsigned __int128 lim = (~static_cast<unsigned __int128>(0)) >> 53;
        const unsigned __int128 xd = static_cast<unsigned __int128>(static_cast<unsigned long long>(xi)) *
                                     static_cast<unsigned long long>(weight_den_);
        if (dnum <= lim && xd <= lim) {
            const unsigned __int128 lhs = static_cast<unsigned __int128>(mark) * dnum;
            const unsigned __int128 rhs = xd << 53;
            return lhs < rhs;
        }
        // Astronomically large states: fall back to extended precision.
        const long double p = static_cast<long double>(xi) * static_cast<long double>(weight_den_) /
                              static_cast<long double>(dnum);
        return static_cast<long double>(mark) * 0x1.0p-53L < p;
    }

    double denom = 0.0;
    for (std::size_t k = 0; k < S; ++k) {
        const std::int32_t j = nb[k];
        if (j < 0) continue;
        const long long xj = counts_[static_cast<std::size_t>(j)];
        if (xj == kInfiniteCount) return false;
        denom += weight_f_[k] * static_cast<double>(xj);
    }
    if (!(denom > 0.0)) return false;
    const double p = static_cast<double>(xi) / denom;
    return static_cast<double>(mark) * 0x1.0p-53 < p;
}

double EngineSystem::departure_probability_local(int i) const {
    const std::size_t ii = static_cast<std::size_t>(i);
    if (frozen_[ii]) return 0.0;
    const long long xi = counts_[ii];
    if (xi <= K_) return 0.0;
    const std::size_t S = static_cast<std::size_t>(support_size_);
    const std::int32_t* nb = &nbr_[ii * S];
    double denom = 0.0;
    for (std::size_t k = 0; k < S; ++k) {
        const std::int32_t j = nb[k];
        if (j < 0) continue;
        const long long xj = counts_[static_cast<std::size_t>(j)];
        if (xj == kInfiniteCount) return 0.0;
        denom += weight_f_[k] * static_cast<double>(xj);
    }
    if (!(denom > 0.0)) return 0.0;
    return static_cast<double>(xi) / denom;
}

int EngineSystem::local_rank(const Offset& site) const {
    auto it = rank_.find(site);
    return it == rank_.end() ? -1 : it->second;
}

QueueState EngineSystem::snapshot(double clock) const {
    QueueState s;
    s.d = d_;
    s.index = config_.index;
    s.sites = sites_;
    s.counts = counts_;
    s.clock = clock;
    return s;
}

long long EngineSystem::finite_total() const {
    long long total = 0;
    for (long long c : counts_)
        if (c != kInfiniteCount) total += c;
    return total;
}

namespace detail {
[[noreturn]] void throw_ordering(const OrderingViolation& v) {
    std::ostringstream msg;
    msg << "ordering violated at t=" << v.time << " site=" << offset_to_string(v.site)
        << " (system " << v.lower << " count " << v.lower_count << " > system " << v.upper
        << " count " << v.upper_count << ")";
    fail(ErrorCode::ordering_violation, msg.str());
}
} // namespace detail

// ---------------------------------------------------------------------------
// Public single-event operations

long long QueueState::count_at(const Offset& site) const {
    auto it = std::lower_bound(sites.begin(), sites.end(), site);
    if (it == sites.end() || *it != site) return 0;
    return counts[static_cast<std::size_t>(it - sites.begin())];
}

double departure_probability(const QueueState& state, const DynamicsConfig& config,
                             const Offset& site) {
    if (site.size() != static_cast<std::size_t>(state.d))
        fail(ErrorCode::semantic_error, "site dimension mismatch");
    const long long xi = state.count_at(site);
    if (config.frozen.count(site) != 0 || xi == kInfiniteCount)
        fail(ErrorCode::frozen_site,
             "departure probability is undefined at pinned site " + offset_to_string(site));
    if (xi <= config.K) return 0.0;
    double denom = 0.0;
    for (const auto& [off, w] : config.seq.entries()) {
        const long long xj = state.count_at(shifted_site(site, off, state.index));
        if (xj == kInfiniteCount) return 0.0;
        denom += w * static_cast<double>(xj);
    }
    if (!(denom > 0.0)) return 0.0;
    return static_cast<double>(xi) / denom;
}

QueueState apply_event(const QueueState& state, const DynamicsConfig& config, const Event& event) {
    if (event.time < state.clock)
        fail(ErrorCode::clock_regression, "event precedes the state's clock");
    QueueState out = state;
    out.clock = event.time;
    auto it = std::lower_bound(out.sites.begin(), out.sites.end(), event.site);
    if (it == out.sites.end() || *it != event.site) return out; // outside the index set
    const std::size_t i = static_cast<std::size_t>(it - out.sites.begin());

    const bool frozen = config.frozen.count(event.site) != 0 || out.counts[i] == kInfiniteCount;
    if (event.kind == EventKind::arrival) {
        if (!frozen && config.suppressed.count(event.site) == 0) ++out.counts[i];
        return out;
    }
    if (frozen) return out;
    const long long xi = out.counts[i];
    if (xi <= config.K) return out;

    const std::uint64_t mark = clamp_mark_bits(event);
    bool accept = false;
    if (config.seq.exact()) {
        const auto& entries = config.seq.entries();
        const auto& nums = config.seq.exact_numerators();
        unsigned __int128 dnum = 0;
        bool infinite = false;
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const long long xj = out.count_at(shifted_site(event.site, entries[k].first, out.index));
            if (xj == kInfiniteCount) {
                infinite = true;
                break;
            }
            dnum += static_cast<unsigned __int128>(static_cast<unsigned long long>(nums[k])) *
                    static_cast<unsigned long long>(xj);
        }
        if (!infinite && dnum != 0) {
            constexpr unsigned __int128 lim = (~static_cast<unsigned __int128>(0)) >> 53;
            const unsigned __int128 xd =
                static_cast<unsigned __int128>(static_cast<unsigned long long>(xi)) *
                static_cast<unsigned long long>(config.seq.common_denominator());
            if (dnum <= lim && xd <= lim)
                accept = static_cast<unsigned __int128>(mark) * dnum < (xd << 53);
            else
                accept = static_cast<long double>(mark) * 0x1.0p-53L <
                         static_cast<long double>(xi) *
                             static_cast<long double>(config.seq.common_denominator()) /
                             static_cast<long double>(dnum);
        }
    } else {
        const double p = departure_probability(out, config, event.site);
        accept = static_cast<double>(mark) * 0x1.0p-53 < p;
    }
    if (accept) --out.counts[i];
    return out;
}

// ---------------------------------------------------------------------------
// Whole-window runs

namespace {

struct ProbeObserver {
    EngineSystem* sys = nullptr;
    const ProbeSpec* spec = nullptr;
    std::vector<int> locals;
    std::vector<ProbeSample> samples;
    std::size_t next = 0;

    void segment(double, double b) {
        while (next < spec->times.size() && spec->times[next] < b) {
            emit(spec->times[next]);
            ++next;
        }
    }
    void event(const EngineEvent&, const Universe&) {}
    void emit(double t) {
        ProbeSample s;
        s.time = t;
        s.counts.reserve(locals.size());
        for (int i : locals) s.counts.push_back(i < 0 ? 0 : sys->count_local(i));
        if (spec->record_probabilities) {
            s.probabilities.reserve(locals.size());
            for (int i : locals)
                s.probabilities.push_back(i < 0 ? 0.0 : sys->departure_probability_local(i));
        }
        samples.push_back(std::move(s));
    }
};

void validate_probes(const ProbeSpec& probes, double t0, double t1) {
    for (std::size_t k = 0; k < probes.times.size(); ++k) {
        if (k > 0 && probes.times[k] < probes.times[k - 1])
            fail(ErrorCode::semantic_error, "probe times must be sorted ascending");
        if (probes.times[k] < t0 || probes.times[k] >= t1)
            fail(ErrorCode::semantic_error, "probe times must lie inside the run window");
    }
}

struct TraceObserver {
    const std::vector<EngineSystem*>* systems = nullptr;
    std::vector<int> uranks;
    std::vector<std::vector<SiteTrace>>* traces = nullptr;

    void segment(double, double) {}
    void event(const EngineEvent& e, const Universe&) {
        for (std::size_t k = 0; k < uranks.size(); ++k) {
            if (uranks[k] != e.u) continue;
            for (std::size_t s = 0; s < systems->size(); ++s) {
                const long long c = (*systems)[s]->count_universe(e.u);
                auto& tr = (*traces)[s][k];
                if (tr.points.empty() || tr.points.back().second != c)
                    tr.points.emplace_back(e.time, c);
            }
        }
    }
};

} // namespace

RunResult run(const DynamicsConfig& config, const InitialCondition& initial,
              const DrivingStream& driving, double t0, double t1, const ProbeSpec& probes) {
    validate_probes(probes, t0, t1);
    if (config.lambda != driving.lambda())
        fail(ErrorCode::semantic_error, "config arrival rate differs from the driving stream");
    EngineSystem sys(config, initial, driving.seed());
    const Universe uni = make_universe({&sys.sites()}, config.seq.dimension());
    sys.bind_universe(uni);

    ProbeObserver obs;
    obs.sys = &sys;
    obs.spec = &probes;
    obs.locals.reserve(probes.sites.size());
    for (const auto& s : probes.sites) obs.locals.push_back(sys.local_rank(s));

    RunResult result;
    result.events_processed = drive(driving, uni, {&sys}, t0, t1, obs);
    result.final_state = sys.snapshot(t1);
    result.samples = std::move(obs.samples);
    result.arrivals_accepted = sys.arrivals_total();
    result.departures_accepted = sys.departures_total();
    result.arrivals_by_site = sys.arrivals_by_site();
    result.departures_by_site = sys.departures_by_site();
    return result;
}

CoupledResult coupled_run(const std::vector<CoupledSpec>& specs, const DrivingStream& driving,
                          double t0, double t1, const std::vector<OrderingCheck>& checks,
                          bool strict, const std::vector<Offset>& trace_sites) {
    if (specs.empty()) fail(ErrorCode::semantic_error, "coupled run needs at least one system");
    const int d = specs[0].config.seq.dimension();
    for (const auto& sp : specs) {
        if (sp.config.seq.dimension() != d)
            fail(ErrorCode::semantic_error, "coupled systems must share one dimension");
        if (sp.config.lambda != driving.lambda())
            fail(ErrorCode::semantic_error, "config arrival rate differs from the driving stream");
    }
    for (const auto& c : checks)
        if (c.lower < 0 || c.upper < 0 || c.lower >= static_cast<int>(specs.size()) ||
            c.upper >= static_cast<int>(specs.size()))
            fail(ErrorCode::semantic_error, "ordering check references a missing system");

    std::vector<std::unique_ptr<EngineSystem>> owned;
    owned.reserve(specs.size());
    std::vector<EngineSystem*> systems;
    std::vector<const std::vector<Offset>*> lists;
    for (const auto& sp : specs) {
        owned.push_back(std::make_unique<EngineSystem>(sp.config, sp.initial, driving.seed()));
        systems.push_back(owned.back().get());
        lists.push_back(&owned.back()->sites());
    }
    const Universe uni = make_universe(lists, d);
    for (EngineSystem* s : systems) s->bind_universe(uni);

    CoupledResult result;
    result.traces.assign(systems.size(), {});

    // The declared dominance must already hold at t0.
    for (const auto& c : checks) {
        for (std::size_t u = 0; u < uni.sites.size(); ++u) {
            const long long lo = systems[static_cast<std::size_t>(c.lower)]->count_universe(static_cast<int>(u));
            const long long hi = systems[static_cast<std::size_t>(c.upper)]->count_universe(static_cast<int>(u));
            if (lo > hi) {
                OrderingViolation v{t0, uni.sites[u], c.lower, c.upper, lo, hi};
                result.violations.push_back(v);
                if (strict) detail::throw_ordering(v);
            }
        }
    }

    TraceObserver obs;
    obs.systems = &systems;
    obs.traces = &result.traces;
    obs.uranks.reserve(trace_sites.size());
    for (std::size_t s = 0; s < systems.size(); ++s) {
        result.traces[s].resize(trace_sites.size());
        for (std::size_t k = 0; k < trace_sites.size(); ++k) {
            if (trace_sites[k].size() != static_cast<std::size_t>(d))
                fail(ErrorCode::semantic_error, "trace site dimension mismatch");
            result.traces[s][k].site = trace_sites[k];
        }
    }
    for (const auto& site : trace_sites) {
        auto it = uni.rank.find(site);
        obs.uranks.push_back(it == uni.rank.end() ? -1 : it->second);
    }
    for (std::size_t s = 0; s < systems.size(); ++s)
        for (std::size_t k = 0; k < trace_sites.size(); ++k) {
            const int u = obs.uranks[k];
            const long long c0 = u < 0 ? 0 : systems[s]->count_universe(u);
            result.traces[s][k].points.emplace_back(t0, c0);
        }

    DriveChecks dc;
    dc.checks = &checks;
    dc.strict = strict;
    dc.violations = &result.violations;
    result.events_checked = drive(driving, uni, systems, t0, t1, obs, dc);

    result.finals.reserve(systems.size());
    for (EngineSystem* s : systems) result.finals.push_back(s->snapshot(t1));
    return result;
}

} // namespace iqnet
