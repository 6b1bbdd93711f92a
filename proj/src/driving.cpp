#include "iqnet/driving.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace iqnet {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t site_code(const Offset& site) {
    if (site.empty() || site.size() > 3)
        fail(ErrorCode::unsupported_dimension,
             "stream keying supports dimensions 1..3, got " + std::to_string(site.size()));
    std::uint64_t code = 0;
    for (size_t k = 0; k < site.size(); ++k) {
        long long c = site[k];
        if (c <= -(1LL << 20) || c >= (1LL << 20))
            fail(ErrorCode::site_out_of_range,
                 "coordinate " + std::to_string(c) + " exceeds the documented keying range");
        std::uint64_t zz = (static_cast<std::uint64_t>(c) << 1) ^
                           static_cast<std::uint64_t>(c >> 63);
        code |= (zz & 0x1fffffULL) << (21 * k);
    }
    // 21 bits per zigzagged coordinate, three coordinates max: bits 0..62.
    // Injective for a fixed dimension, which is all one stream ever mixes.
    return code;
}

namespace {

constexpr std::uint64_t kArrivalTag = 0x243f6a8885a308d3ULL;
constexpr std::uint64_t kDepartureTag = 0x13198a2e03707344ULL;

std::uint64_t zigzag64(long long v) {
    return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

// Poisson count by inversion on a single uniform; exact and portable for the
// moderate means used here (block_len is 1 in every shipped configuration).
long long poisson_inverse(double mean, double u) {
    if (mean <= 0.0) return 0;
    double p = std::exp(-mean);
    double cum = p;
    long long k = 0;
    while (u > cum && k < 200000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cum += p;
        if (p < 1e-300 && u > cum) break; // far tail: cumulative has saturated
    }
    return k;
}

void sort_strictly_increasing(std::vector<double>& times) {
    std::sort(times.begin(), times.end());
    for (size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1])
            times[i] = std::nextafter(times[i - 1], std::numeric_limits<double>::infinity());
}

} // namespace

DrivingStream::DrivingStream(std::uint64_t seed, double lambda, double block_len)
    : seed_(seed), lambda_(lambda), block_len_(block_len) {
    if (lambda < 0.0) fail(ErrorCode::semantic_error, "arrival rate must be nonnegative");
    if (block_len <= 0.0) fail(ErrorCode::semantic_error, "block length must be positive");
}

long long DrivingStream::block_of(double t) const {
    return static_cast<long long>(std::floor(t / block_len_));
}

void DrivingStream::generate_block_into(std::uint64_t code, long long block, SiteBlock& out) const {
    out.arrivals.clear();
    out.departure_times.clear();
    out.departure_marks.clear();
    const double start = static_cast<double>(block) * block_len_;
    const std::uint64_t len_bits = std::bit_cast<std::uint64_t>(block_len_);

    std::uint64_t h = mix64(seed_);
    h = mix64(h ^ code);
    h = mix64(h ^ zigzag64(block));

    // Arrivals (keyed on lambda).
    {
        SplitMix64 g{mix64(h ^ kArrivalTag ^ std::bit_cast<std::uint64_t>(lambda_) ^ len_bits)};
        long long n = poisson_inverse(lambda_ * block_len_, g.next_double());
        out.arrivals.reserve(static_cast<size_t>(n));
        for (long long i = 0; i < n; ++i) out.arrivals.push_back(start + g.next_double() * block_len_);
        sort_strictly_increasing(out.arrivals);
    }

    // Potential departures with marks (lambda-independent).
    {
        SplitMix64 g{mix64(h ^ kDepartureTag ^ len_bits)};
        long long n = poisson_inverse(block_len_, g.next_double());
        out.departure_times.reserve(static_cast<size_t>(n));
        out.departure_marks.reserve(static_cast<size_t>(n));
        for (long long i = 0; i < n; ++i) {
            out.departure_times.push_back(start + g.next_double() * block_len_);
            out.departure_marks.push_back(g.next_u53());
        }
        // Tandem insertion sort by time (counts are tiny), then nudge ties
        // upward so times within one site-block are strictly increasing.
        for (size_t i = 1; i < out.departure_times.size(); ++i) {
            double t = out.departure_times[i];
            std::uint64_t m = out.departure_marks[i];
            size_t j = i;
            while (j > 0 && out.departure_times[j - 1] > t) {
                out.departure_times[j] = out.departure_times[j - 1];
                out.departure_marks[j] = out.departure_marks[j - 1];
                --j;
            }
            out.departure_times[j] = t;
            out.departure_marks[j] = m;
        }
        for (size_t i = 1; i < out.departure_times.size(); ++i)
            if (out.departure_times[i] <= out.departure_times[i - 1])
                out.departure_times[i] = std::nextafter(out.departure_times[i - 1],
                                                        std::numeric_limits<double>::infinity());
    }
}

SiteBlock DrivingStream::generate_block_coded(std::uint64_t code, long long block) const {
    SiteBlock out;
    generate_block_into(code, block, out);
    return out;
}

SiteBlock DrivingStream::generate_block(const Offset& site, long long block) const {
    return generate_block_coded(site_code(site), block);
}

void DrivingStream::enable_cache(bool on) const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    cache_enabled_ = on;
    if (!on) cache_.clear();
}

std::size_t DrivingStream::CacheKeyHash::operator()(
    const std::pair<std::uint64_t, long long>& k) const {
    return static_cast<std::size_t>(mix64(k.first ^ mix64(zigzag64(k.second))));
}

const SiteBlock& DrivingStream::cached_block(const Offset& site, long long block) const {
    const std::pair<std::uint64_t, long long> key{site_code(site), block};
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return *it->second;
    }
    auto fresh = std::make_unique<SiteBlock>(generate_block_coded(key.first, block));
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto [it, inserted] = cache_.emplace(key, std::move(fresh));
    (void)inserted; // a racing writer computed the identical block
    if (!cache_enabled_ && cache_.size() > 4096) cache_.clear(); // unmanaged use: stay bounded
    return *it->second;
}

std::vector<Event> events_in(const DrivingStream& stream, const std::vector<Offset>& sites,
                             double t0, double t1) {
    if (!(t0 < t1)) fail(ErrorCode::empty_window, "event window is empty");
    std::vector<Event> out;
    std::vector<Offset> ordered = sites;
    std::sort(ordered.begin(), ordered.end());
    const long long m0 = stream.block_of(t0);
    const long long m1 = stream.block_of(std::nextafter(t1, -std::numeric_limits<double>::infinity()));
    for (long long m = m0; m <= m1; ++m) {
        for (const auto& s : ordered) {
            SiteBlock blk = stream.generate_block(s, m);
            for (double t : blk.arrivals) {
                if (t < t0 || t >= t1) continue;
                Event e;
                e.time = t;
                e.site = s;
                e.kind = EventKind::arrival;
                out.push_back(std::move(e));
            }
            for (size_t i = 0; i < blk.departure_times.size(); ++i) {
                double t = blk.departure_times[i];
                if (t < t0 || t >= t1) continue;
                Event e;
                e.time = t;
                e.site = s;
                e.kind = EventKind::potential_departure;
                e.mark_bits = blk.departure_marks[i];
                e.mark = static_cast<double>(e.mark_bits) * 0x1.0p-53;
                out.push_back(std::move(e));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.site != b.site) return a.site < b.site;
        return a.kind < b.kind; // arrivals first
    });
    return out;
}

CountStats count_statistics(const DrivingStream& stream, const Offset& site, double horizon) {
    if (horizon <= 0.0) fail(ErrorCode::empty_window, "horizon must be positive");
    CountStats stats;
    const long long m1 = stream.block_of(std::nextafter(horizon, 0.0));
    for (long long m = 0; m <= m1; ++m) {
        SiteBlock blk = stream.generate_block(site, m);
        for (double t : blk.arrivals)
            if (t >= 0.0 && t < horizon) ++stats.arrivals;
        for (double t : blk.departure_times)
            if (t >= 0.0 && t < horizon) ++stats.departures;
    }
    return stats;
}

} // namespace iqnet
