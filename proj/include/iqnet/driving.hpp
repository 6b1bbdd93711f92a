#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "iqnet/interference.hpp"

namespace iqnet {

// Exogenous randomness for one site and one unit-time block:
// Poisson(lambda * block_len) arrival epochs, Poisson(block_len) potential-
// departure epochs with 53-bit uniform marks, all strictly increasing in time.
struct SiteBlock {
    std::vector<double> arrivals;
    std::vector<double> departure_times;
    std::vector<std::uint64_t> departure_marks; // mark = value * 2^-53 in [0,1)
};

// Deterministic, seed-keyed driving data.  The realization of a block is a
// pure function of (seed, site, block index, lambda, block_len): arrival
// blocks are keyed on all five, departure blocks omit lambda (the potential-
// departure process has rate 1 regardless of the arrival rate), so systems
// with different lambda can still share departure randomness.
//
// Key derivation (documented so independent implementations can reproduce
// runs bit-exactly): coordinates are zigzag-encoded into 21 bits each and
// packed (supports d <= 3); the key is a splitmix64-finalizer chain over
// seed, packed site, zigzagged block index, and a kind tag xored with the
// bit patterns of lambda (arrivals only) and block_len.  The chained value
// seeds a splitmix64 stream; counts come from Poisson inversion on one
// 53-bit uniform, positions are 53-bit uniforms scaled into the block, and
// each departure epoch draws (position, mark) as consecutive uniforms.
// Epochs are sorted, with equal positions (probability ~0 in binary64)
// nudged by one ulp to keep the strict-increase invariant.
class DrivingStream {
public:
    DrivingStream(std::uint64_t seed, double lambda, double block_len = 1.0);

    std::uint64_t seed() const { return seed_; }
    double lambda() const { return lambda_; }
    double block_len() const { return block_len_; }

    // Pure generation (never touches the cache).
    SiteBlock generate_block(const Offset& site, long long block) const;
    SiteBlock generate_block_coded(std::uint64_t site_code, long long block) const;

    // Memoized lookup; all writers compute identical values, so the cache is
    // last-writer-irrelevant.  Guarded by a mutex for concurrent readers.
    const SiteBlock& cached_block(const Offset& site, long long block) const;
    void enable_cache(bool on) const;

    // Allocation-free variant for hot loops: clears and refills `out`.
    void generate_block_into(std::uint64_t code, long long block, SiteBlock& out) const;

    long long block_of(double t) const;

private:
    std::uint64_t seed_;
    double lambda_;
    double block_len_;

    struct CacheKeyHash {
        std::size_t operator()(const std::pair<std::uint64_t, long long>& k) const;
    };

    mutable bool cache_enabled_ = false;
    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<std::pair<std::uint64_t, long long>, std::unique_ptr<SiteBlock>,
                               CacheKeyHash>
        cache_;
};

enum class EventKind : std::uint8_t { arrival = 0, potential_departure = 1 };

struct Event {
    double time = 0.0;
    Offset site;
    EventKind kind = EventKind::arrival;
    double mark = 0.0; // in [0,1); meaningful for potential departures only
    std::uint64_t mark_bits = 0;
};

// Chronologically ordered events touching `sites` with time in [t0, t1).
// Ordering is total and deterministic: time, then lexicographic site, then
// kind with arrivals first.  Throws `empty_window` when t0 >= t1.
std::vector<Event> events_in(const DrivingStream& stream, const std::vector<Offset>& sites,
                             double t0, double t1);

struct CountStats {
    long long arrivals = 0;
    long long departures = 0;
};

// Event counts for one site over [0, horizon); used by statistical self-tests.
CountStats count_statistics(const DrivingStream& stream, const Offset& site, double horizon);

// Injective packing of a site coordinate for stream keying: zigzag per
// coordinate, 21 bits each, d <= 3.  Throws for |coordinate| >= 2^20.
std::uint64_t site_code(const Offset& site);

// splitmix64 finalizer; the building block of all keying above.
std::uint64_t mix64(std::uint64_t z);

// Stream of 53-bit uniforms / doubles from a splitmix64 state.
struct SplitMix64 {
    std::uint64_t state;
    std::uint64_t next_u64();
    std::uint64_t next_u53() { return next_u64() >> 11; }
    double next_double() { return static_cast<double>(next_u53()) * 0x1.0p-53; }
};

} // namespace iqnet
