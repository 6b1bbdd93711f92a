#pragma once

// Internal simulation engine: dense per-system tables plus a block-streaming
// driver that replays the keyed event field over a window.  Several systems
// can consume one shared event list, which is what makes the couplings exact.

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "iqnet/dynamics.hpp"

namespace iqnet {

struct OffsetHash {
    std::size_t operator()(const Offset& o) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ (o.size() * 0x100000001b3ULL);
        for (long long c : o) h = mix64(h ^ static_cast<std::uint64_t>(c));
        return static_cast<std::size_t>(h);
    }
};

// Materializes the site list of an index set in dense lexicographic order.
std::vector<Offset> index_sites(const IndexSpec& index, int d);

// Union of the participating systems' site lists; ranks double as the
// deterministic tie-break for simultaneous events.
struct Universe {
    int d = 1;
    std::vector<Offset> sites;
    std::vector<std::uint64_t> codes;
    std::unordered_map<Offset, int, OffsetHash> rank;
};

Universe make_universe(const std::vector<const std::vector<Offset>*>& site_lists, int d);

struct EngineEvent {
    double time = 0.0;
    std::int32_t u = 0; // universe rank of the site
    EventKind kind = EventKind::arrival;
    std::uint64_t mark = 0; // integer in [0, 2^53) for potential departures
};

class EngineSystem {
public:
    EngineSystem(const DynamicsConfig& config, const InitialCondition& initial,
                 std::uint64_t seed);

    void bind_universe(const Universe& uni);

    // Applies one event; returns the count delta at the event's site
    // (-1, 0, +1).  Events at sites outside this system are ignored.
    int apply(const EngineEvent& e) {
        const int i = remap_[static_cast<std::size_t>(e.u)];
        if (i < 0) return 0;
        if (e.kind == EventKind::arrival) {
            if (frozen_[static_cast<std::size_t>(i)] || suppressed_[static_cast<std::size_t>(i)])
                return 0;
            ++counts_[static_cast<std::size_t>(i)];
            ++arrivals_total_;
            ++arrivals_by_site_[static_cast<std::size_t>(i)];
            return +1;
        }
        if (frozen_[static_cast<std::size_t>(i)]) return 0;
        if (!accept_departure(i, e.mark)) return 0;
        --counts_[static_cast<std::size_t>(i)];
        ++departures_total_;
        ++departures_by_site_[static_cast<std::size_t>(i)];
        return -1;
    }

    // Count seen from the universe (0 for sites outside this system).
    long long count_universe(int u) const {
        const int i = remap_[static_cast<std::size_t>(u)];
        return i < 0 ? 0 : counts_[static_cast<std::size_t>(i)];
    }

    // Display/statistics value of the acceptance probability; decisions in
    // exact mode never round through this.
    double departure_probability_local(int i) const;

    long long count_local(int i) const { return counts_[static_cast<std::size_t>(i)]; }
    int local_rank(const Offset& site) const; // -1 when absent
    const std::vector<Offset>& sites() const { return sites_; }
    const std::vector<long long>& counts() const { return counts_; }
    const DynamicsConfig& config() const { return config_; }

    QueueState snapshot(double clock) const;

    long long arrivals_total() const { return arrivals_total_; }
    long long departures_total() const { return departures_total_; }
    const std::vector<long long>& arrivals_by_site() const { return arrivals_by_site_; }
    const std::vector<long long>& departures_by_site() const { return departures_by_site_; }
    long long finite_total() const; // sum of counts, skipping pinned-infinite sites

private:
    bool accept_departure(int i, std::uint64_t mark);

    DynamicsConfig config_;
    int d_ = 1;
    std::vector<Offset> sites_;
    std::unordered_map<Offset, int, OffsetHash> rank_;
    std::vector<long long> counts_;
    std::vector<char> frozen_;
    std::vector<char> suppressed_;
    long long K_ = 0;

    // Neighborhood tables: for site i and support entry k the contributing
    // site is nbr_[i * S + k] (-1 when outside the index set).
    int support_size_ = 0;
    std::vector<std::int32_t> nbr_;
    std::vector<long long> weight_num_; // exact numerators, per support entry
    long long weight_den_ = 1;
    std::vector<double> weight_f_;
    bool exact_ = false;

    std::vector<int> remap_; // universe rank -> local rank (-1 absent)

    long long arrivals_total_ = 0;
    long long departures_total_ = 0;
    std::vector<long long> arrivals_by_site_;
    std::vector<long long> departures_by_site_;
};

// Observer hooks: `segment(a, b)` is invoked for every maximal event-free
// stretch (a <= b), `event(e, uni)` right after an event was offered to all
// systems.  State read inside `event` reflects the post-event configuration.
struct NullObserver {
    void segment(double, double) {}
    void event(const EngineEvent&, const Universe&) {}
};

struct DriveChecks {
    const std::vector<OrderingCheck>* checks = nullptr;
    bool strict = false;
    std::vector<OrderingViolation>* violations = nullptr;
};

namespace detail {
[[noreturn]] void throw_ordering(const OrderingViolation& v);
}

// Streams the keyed event field over [t0, t1) into every system, in the
// deterministic order (time, site rank, arrivals-before-departures).
// Returns the number of events offered.
template <class Obs>
long long drive(const DrivingStream& stream, const Universe& uni,
                const std::vector<EngineSystem*>& systems, double t0, double t1, Obs&& obs,
                const DriveChecks& chk = {}) {
    if (!(t0 < t1)) fail(ErrorCode::empty_window, "run window is empty");
    const long long m0 = stream.block_of(t0);
    const long long m1 = stream.block_of(std::nextafter(t1, -std::numeric_limits<double>::infinity()));

    std::vector<EngineEvent> buf;
    SiteBlock scratch;
    long long processed = 0;
    double cur = t0;

    for (long long m = m0; m <= m1; ++m) {
        buf.clear();
        for (std::size_t u = 0; u < uni.sites.size(); ++u) {
            stream.generate_block_into(uni.codes[u], m, scratch);
            for (double t : scratch.arrivals) {
                if (t < t0 || t >= t1) continue;
                buf.push_back({t, static_cast<std::int32_t>(u), EventKind::arrival, 0});
            }
            for (std::size_t k = 0; k < scratch.departure_times.size(); ++k) {
                const double t = scratch.departure_times[k];
                if (t < t0 || t >= t1) continue;
                buf.push_back({t, static_cast<std::int32_t>(u), EventKind::potential_departure,
                               scratch.departure_marks[k]});
            }
        }
        std::sort(buf.begin(), buf.end(), [](const EngineEvent& a, const EngineEvent& b) {
            if (a.time != b.time) return a.time < b.time;
            if (a.u != b.u) return a.u < b.u;
            return a.kind < b.kind;
        });
        for (const EngineEvent& e : buf) {
            const double et = std::max(e.time, cur); // tie-nudges never move time backward
            obs.segment(cur, et);
            for (EngineSystem* s : systems) s->apply(e);
            ++processed;
            obs.event(e, uni);
            if (chk.checks != nullptr) {
                for (const OrderingCheck& c : *chk.checks) {
                    const long long lo = systems[static_cast<std::size_t>(c.lower)]->count_universe(e.u);
                    const long long hi = systems[static_cast<std::size_t>(c.upper)]->count_universe(e.u);
                    if (lo > hi) {
                        OrderingViolation v{et, uni.sites[static_cast<std::size_t>(e.u)],
                                            c.lower, c.upper, lo, hi};
                        if (chk.violations != nullptr) chk.violations->push_back(v);
                        if (chk.strict) detail::throw_ordering(v);
                    }
                }
            }
            cur = et;
        }
    }
    obs.segment(cur, t1);
    return processed;
}

} // namespace iqnet
