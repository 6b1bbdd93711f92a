#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <functional>

#include "iqnet/dynamics.hpp"
#include "iqnet/engine.hpp"

using namespace iqnet;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const IqnetError& e) {
        return e.code();
    }
    return ErrorCode::parse_error; // sentinel: "did not throw"
}

QueueState make_state(const DynamicsConfig& config, const InitialCondition& init,
                      std::uint64_t seed, double clock = 0.0) {
    QueueState s;
    s.d = config.seq.dimension();
    s.index = config.index;
    s.sites = index_sites(config.index, s.d);
    s.counts.reserve(s.sites.size());
    for (const auto& site : s.sites) s.counts.push_back(init.value_at(site, seed));
    s.clock = clock;
    return s;
}

DynamicsConfig ones_box(int width, int n, double lambda) {
    DynamicsConfig c;
    c.seq = ones_sequence(1, width);
    c.lambda = lambda;
    c.index = IndexSpec::box(n);
    return c;
}

Event departure_at(const Offset& site, double time, std::uint64_t mark_bits) {
    Event e;
    e.time = time;
    e.site = site;
    e.kind = EventKind::potential_departure;
    e.mark_bits = mark_bits;
    e.mark = static_cast<double>(mark_bits) * 0x1.0p-53;
    return e;
}

} // namespace

TEST_CASE("departure probability: processor-sharing ratio with 0/0 = 0") {
    DynamicsConfig c = ones_box(3, 3, 0.5);
    InitialCondition init = InitialCondition::from_map({{{-1}, 2}, {{0}, 3}, {{1}, 1}});
    QueueState s = make_state(c, init, 1);

    CHECK(departure_probability(s, c, {0}) == doctest::Approx(3.0 / 6.0).epsilon(1e-15));
    CHECK(departure_probability(s, c, {-1}) == doctest::Approx(2.0 / 5.0).epsilon(1e-15));
    CHECK(departure_probability(s, c, {1}) == doctest::Approx(1.0 / 4.0).epsilon(1e-15));
    CHECK(departure_probability(s, c, {3}) == 0.0);  // empty site: 0/0 = 0
    CHECK(departure_probability(s, c, {-2}) == doctest::Approx(0.0).epsilon(1e-15)); // count 0

    // The departure floor gates the ratio to zero.
    DynamicsConfig gated = c;
    gated.K = 3;
    CHECK(departure_probability(s, gated, {0}) == 0.0);
    gated.K = 2;
    CHECK(departure_probability(s, gated, {0}) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("departure probability wraps on the torus and not on the box") {
    DynamicsConfig c = ones_box(3, 2, 0.5);
    c.index = IndexSpec::torus(2);
    InitialCondition init = InitialCondition::from_map({{{-2}, 1}, {{2}, 4}});
    QueueState torus = make_state(c, init, 1);
    CHECK(departure_probability(torus, c, {2}) == doctest::Approx(4.0 / 5.0).epsilon(1e-15));

    DynamicsConfig b = ones_box(3, 2, 0.5);
    QueueState box = make_state(b, init, 1);
    CHECK(departure_probability(box, b, {2}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pinned sites: probability queries fail, neighbors see zero rate") {
    DynamicsConfig c = ones_box(3, 3, 0.5);
    c.frozen[{-3}] = kInfiniteCount;
    c.frozen[{0}] = 5;
    InitialCondition init = InitialCondition::from_map({{{-2}, 4}, {{1}, 2}});
    QueueState s = make_state(c, init, 1);
    // Materialize the pinned counts the way run() would.
    for (std::size_t i = 0; i < s.sites.size(); ++i) {
        auto it = c.frozen.find(s.sites[i]);
        if (it != c.frozen.end()) s.counts[i] = it->second;
    }

    CHECK(code_of([&] { departure_probability(s, c, {-3}); }) == ErrorCode::frozen_site);
    CHECK(code_of([&] { departure_probability(s, c, {0}); }) == ErrorCode::frozen_site);
    // A neighbor pinned to infinity forces the ratio to zero.
    CHECK(departure_probability(s, c, {-2}) == 0.0);
    // A neighbor pinned to a finite level just contributes that level.
    CHECK(departure_probability(s, c, {1}) == doctest::Approx(2.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("apply_event: arrivals, suppression, clock discipline") {
    DynamicsConfig c = ones_box(3, 2, 0.5);
    c.suppressed.insert({1});
    c.frozen[{2}] = 7;
    QueueState s = make_state(c, InitialCondition::zero(), 1);
    for (std::size_t i = 0; i < s.sites.size(); ++i)
        if (s.sites[i] == Offset{2}) s.counts[i] = 7;

    Event arr;
    arr.time = 1.0;
    arr.site = {0};
    arr.kind = EventKind::arrival;

    QueueState s1 = apply_event(s, c, arr);
    CHECK(s1.count_at({0}) == 1);
    CHECK(s1.clock == 1.0);

    arr.site = {1}; // suppressed
    QueueState s2 = apply_event(s1, c, arr);
    CHECK(s2.count_at({1}) == 0);

    arr.site = {2}; // frozen
    QueueState s3 = apply_event(s2, c, arr);
    CHECK(s3.count_at({2}) == 7);

    arr.site = {4}; // outside the index set: ignored
    QueueState s4 = apply_event(s3, c, arr);
    CHECK(s4.count_at({4}) == 0);

    arr.time = 0.5; // behind the clock
    CHECK(code_of([&] { apply_event(s4, c, arr); }) == ErrorCode::clock_regression);
}

TEST_CASE("apply_event: exact mark comparison is strict at the boundary") {
    // Counts 1,2,1 around the origin: acceptance ratio is exactly 1/2.
    DynamicsConfig c = ones_box(3, 2, 0.5);
    InitialCondition init = InitialCondition::from_map({{{-1}, 1}, {{0}, 2}, {{1}, 1}});
    QueueState s = make_state(c, init, 1);
    REQUIRE(c.seq.exact());

    const std::uint64_t half = 1ULL << 52; // mark value exactly 1/2
    QueueState rejected = apply_event(s, c, departure_at({0}, 1.0, half));
    CHECK(rejected.count_at({0}) == 2);

    QueueState accepted = apply_event(s, c, departure_at({0}, 1.0, half - 1));
    CHECK(accepted.count_at({0}) == 1);

    // Mark 0 accepts whenever the ratio is positive ...
    QueueState zero_mark = apply_event(s, c, departure_at({1}, 1.0, 0));
    CHECK(zero_mark.count_at({1}) == 0);
    // ... but never at an empty site.
    QueueState empty_site = apply_event(s, c, departure_at({2}, 1.0, 0));
    CHECK(empty_site.count_at({2}) == 0);
}

TEST_CASE("single-queue special case matches the classical mean") {
    // Support = center only: every positive count departs at rate 1, so the
    // queue is the classical single server at load lambda with mean l/(1-l).
    DynamicsConfig c;
    c.seq = InterferenceSequence::validate(std::map<Offset, double>{{{0}, 1.0}}, 1);
    c.lambda = 0.5;
    c.index = IndexSpec::restricted({{0}});

    DrivingStream stream(20240817, c.lambda);
    ProbeSpec probes;
    for (double t = 1000.0; t < 20000.0; t += 1.0) probes.times.push_back(t);
    probes.sites = {{0}};

    const RunResult r = run(c, InitialCondition::zero(), stream, 0.0, 20000.0, probes);
    double acc = 0.0;
    for (const auto& s : r.samples) acc += static_cast<double>(s.counts[0]);
    const double mean = acc / static_cast<double>(r.samples.size());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.15));

    // Exact conservation on the single site.
    CHECK(r.final_state.count_at({0}) == r.arrivals_accepted - r.departures_accepted);
}

TEST_CASE("run agrees with folding single events over the listing") {
    for (bool torus : {false, true}) {
        DynamicsConfig c = ones_box(3, 2, 0.6);
        if (torus) c.index = IndexSpec::torus(2);
        c.K = 1; // exercise the floor too
        InitialCondition init = InitialCondition::from_map({{{0}, 3}, {{-2}, 1}});

        DrivingStream stream(777, c.lambda);
        const RunResult r = run(c, init, stream, 0.0, 50.0);

        QueueState folded = make_state(c, init, stream.seed());
        const auto events = events_in(stream, folded.sites, 0.0, 50.0);
        for (const auto& e : events) folded = apply_event(folded, c, e);

        REQUIRE(folded.counts.size() == r.final_state.counts.size());
        for (std::size_t i = 0; i < folded.counts.size(); ++i)
            CHECK(folded.counts[i] == r.final_state.counts[i]);
        CHECK(r.events_processed == static_cast<long long>(events.size()));
    }
}

TEST_CASE("conservation ledger: initial + arrivals - departures = final") {
    DynamicsConfig c = ones_box(5, 4, 0.4);
    InitialCondition init = InitialCondition::iid_geometric(2.0);
    DrivingStream stream(31337, c.lambda);
    const RunResult r = run(c, init, stream, 0.0, 100.0);

    const auto sites = index_sites(c.index, 1);
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const long long start = init.value_at(sites[i], stream.seed());
        CHECK(start + r.arrivals_by_site[i] - r.departures_by_site[i] ==
              r.final_state.counts[i]);
    }
}

TEST_CASE("restricted mode with a box-shaped site list equals box mode") {
    DynamicsConfig a = ones_box(3, 2, 0.5);
    DynamicsConfig b = a;
    b.index = IndexSpec::restricted({{-2}, {-1}, {0}, {1}, {2}});
    DrivingStream stream(99, 0.5);
    const RunResult ra = run(a, InitialCondition::constant_level(2), stream, 0.0, 75.0);
    const RunResult rb = run(b, InitialCondition::constant_level(2), stream, 0.0, 75.0);
    CHECK(ra.final_state.counts == rb.final_state.counts);
    CHECK(ra.events_processed == rb.events_processed);
}

TEST_CASE("runs are bitwise reproducible and seed-sensitive") {
    DynamicsConfig c = ones_box(3, 3, 0.45);
    DrivingStream s1(5150, c.lambda);
    DrivingStream s2(5150, c.lambda);
    DrivingStream s3(5151, c.lambda);
    const RunResult r1 = run(c, InitialCondition::zero(), s1, 0.0, 120.0);
    const RunResult r2 = run(c, InitialCondition::zero(), s2, 0.0, 120.0);
    const RunResult r3 = run(c, InitialCondition::zero(), s3, 0.0, 120.0);
    CHECK(r1.final_state.counts == r2.final_state.counts);
    CHECK(r1.events_processed == r2.events_processed);
    CHECK(r1.final_state.counts != r3.final_state.counts);
}

TEST_CASE("frozen walls block departures next to them") {
    DynamicsConfig c = ones_box(3, 3, 0.5);
    c.frozen[{-3}] = kInfiniteCount;
    c.frozen[{3}] = kInfiniteCount;
    DrivingStream stream(4242, c.lambda);
    const RunResult r = run(c, InitialCondition::zero(), stream, 0.0, 300.0);

    const auto sites = index_sites(c.index, 1);
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (sites[i] == Offset{-3} || sites[i] == Offset{3}) {
            CHECK(r.final_state.counts[i] == kInfiniteCount);
            CHECK(r.arrivals_by_site[i] == 0);
            continue;
        }
        if (sites[i] == Offset{-2} || sites[i] == Offset{2}) {
            // Wall inside the support: zero departure rate, counts only grow.
            CHECK(r.departures_by_site[i] == 0);
            CHECK(r.final_state.counts[i] > 0.5 * 0.5 * 300.0);
        } else {
            CHECK(r.departures_by_site[i] > 0);
        }
    }
}

TEST_CASE("departure floor drains exactly to the floor") {
    DynamicsConfig c = ones_box(3, 2, 0.02);
    c.K = 5;
    DrivingStream stream(60021, c.lambda);
    const RunResult r = run(c, InitialCondition::constant_level(8), stream, 0.0, 400.0);
    int at_floor = 0;
    for (long long v : r.final_state.counts) {
        CHECK(v >= 5);
        if (v == 5) ++at_floor;
    }
    CHECK(at_floor >= 3); // almost no arrivals at this rate: most sites hit the floor
}

TEST_CASE("initial condition families") {
    InitialCondition geo = InitialCondition::iid_geometric(3.0);
    double acc = 0.0;
    const int n = 20000;
    for (int x = 0; x < n; ++x) {
        const long long v = geo.value_at({x}, 11);
        CHECK(v >= 0);
        acc += static_cast<double>(v);
        CHECK(geo.value_at({x}, 11) == v); // deterministic
    }
    CHECK(acc / n == doctest::Approx(3.0).epsilon(0.05));

    InitialCondition pow = InitialCondition::iid_power(2.5, 50);
    long long max_seen = 0;
    for (int x = 0; x < n; ++x) {
        const long long v = pow.value_at({x}, 11);
        CHECK(v >= 0);
        CHECK(v <= 50);
        max_seen = std::max(max_seen, v);
    }
    CHECK(max_seen == 50); // the cap binds somewhere over 2e4 heavy-tail draws

    CHECK(code_of([] { InitialCondition::constant_level(-1); }) == ErrorCode::semantic_error);
    CHECK(code_of([] { InitialCondition::iid_geometric(0.0); }) == ErrorCode::semantic_error);
    CHECK(code_of([] { InitialCondition::iid_power(1.0, 5); }) == ErrorCode::semantic_error);
    CHECK(code_of([] { InitialCondition::from_map({{{0}, -2}}); }) == ErrorCode::semantic_error);
}

TEST_CASE("probe samples are right-continuous readings at fixed times") {
    DynamicsConfig c;
    c.seq = InterferenceSequence::validate(std::map<Offset, double>{{{0}, 1.0}}, 1);
    c.lambda = 0.0; // drain-only: counts are nonincreasing
    c.index = IndexSpec::restricted({{0}});
    DrivingStream stream(8, 0.0);
    ProbeSpec probes;
    for (double t = 0.0; t < 30.0; t += 0.5) probes.times.push_back(t);
    probes.sites = {{0}};
    probes.record_probabilities = true;

    const RunResult r = run(c, InitialCondition::constant_level(4), stream, 0.0, 30.0, probes);
    REQUIRE(r.samples.size() == probes.times.size());
    CHECK(r.samples.front().counts[0] == 4);
    for (std::size_t i = 1; i < r.samples.size(); ++i)
        CHECK(r.samples[i].counts[0] <= r.samples[i - 1].counts[0]);
    for (const auto& s : r.samples) {
        REQUIRE(s.probabilities.size() == 1);
        if (s.counts[0] > 0) CHECK(s.probabilities[0] == 1.0);
        if (s.counts[0] == 0) CHECK(s.probabilities[0] == 0.0);
    }
    CHECK(r.final_state.count_at({0}) == 0); // rate-1 service drains 4 units well before t=30
}

TEST_CASE("validation errors carry the right codes") {
    DynamicsConfig c = ones_box(3, 2, 0.5);
    DrivingStream stream(1, 0.5);

    CHECK(code_of([&] { run(c, InitialCondition::zero(), stream, 5.0, 5.0); }) ==
          ErrorCode::empty_window);

    DynamicsConfig mismatched = c;
    mismatched.lambda = 0.25;
    CHECK(code_of([&] { run(mismatched, InitialCondition::zero(), stream, 0.0, 1.0); }) ==
          ErrorCode::semantic_error);

    DynamicsConfig small = c;
    small.index = IndexSpec::torus(1);
    small.seq = ones_sequence(1, 7); // radius 3 cannot wrap on a 3-cycle
    small.lambda = 0.5;
    CHECK(code_of([&] { run(small, InitialCondition::zero(), stream, 0.0, 1.0); }) ==
          ErrorCode::torus_too_small);

    DynamicsConfig badfrozen = c;
    badfrozen.frozen[{9}] = 1;
    CHECK(code_of([&] { run(badfrozen, InitialCondition::zero(), stream, 0.0, 1.0); }) ==
          ErrorCode::semantic_error);

    ProbeSpec bad;
    bad.times = {2.0, 1.0};
    CHECK(code_of([&] { run(c, InitialCondition::zero(), stream, 0.0, 5.0, bad); }) ==
          ErrorCode::semantic_error);
    ProbeSpec outside;
    outside.times = {7.0};
    CHECK(code_of([&] { run(c, InitialCondition::zero(), stream, 0.0, 5.0, outside); }) ==
          ErrorCode::semantic_error);

    CHECK(code_of([&] {
              IndexSpec r = IndexSpec::restricted({});
              index_sites(r, 1);
          }) == ErrorCode::semantic_error);
}

TEST_CASE("ordered initial conditions stay ordered under shared events") {
    CoupledSpec low, high;
    low.config = ones_box(3, 2, 0.5);
    low.initial = InitialCondition::zero();
    high.config = low.config;
    high.initial = InitialCondition::constant_level(3);

    DrivingStream stream(1001, 0.5);
    const auto res = coupled_run({low, high}, stream, 0.0, 200.0, {{0, 1}}, true);
    CHECK(res.violations.empty());
    CHECK(res.events_checked > 0);
    for (std::size_t i = 0; i < res.finals[0].counts.size(); ++i)
        CHECK(res.finals[0].counts[i] <= res.finals[1].counts[i]);
}

TEST_CASE("suppressing arrivals on a set keeps the system below the original") {
    CoupledSpec thinned, full;
    full.config = ones_box(3, 2, 0.5);
    full.initial = InitialCondition::constant_level(1);
    thinned.config = full.config;
    thinned.config.suppressed = {{-1}, {0}};
    thinned.initial = full.initial;

    DrivingStream stream(2002, 0.5);
    const auto res = coupled_run({thinned, full}, stream, 0.0, 200.0, {{0, 1}}, true);
    CHECK(res.violations.empty());
}

TEST_CASE("smaller index sets are dominated by larger ones and by the torus") {
    CoupledSpec small_box, big_box, torus;
    small_box.config = ones_box(3, 2, 0.5);
    small_box.initial = InitialCondition::constant_level(1);
    big_box.config = ones_box(3, 4, 0.5);
    big_box.initial = small_box.initial;
    torus.config = ones_box(3, 4, 0.5);
    torus.config.index = IndexSpec::torus(4);
    torus.initial = small_box.initial;

    DrivingStream stream(3003, 0.5);
    const auto res = coupled_run({small_box, big_box, torus}, stream, 0.0, 150.0,
                                 {{0, 1}, {1, 2}}, true);
    CHECK(res.violations.empty());
}

TEST_CASE("ordering checks catch genuine crossings") {
    // "Lower" starts above "upper": the initial audit already trips.
    CoupledSpec hi, lo;
    hi.config = ones_box(3, 2, 0.5);
    hi.initial = InitialCondition::constant_level(2);
    lo.config = hi.config;
    lo.initial = InitialCondition::zero();

    DrivingStream stream(4004, 0.5);
    CHECK(code_of([&] { coupled_run({hi, lo}, stream, 0.0, 10.0, {{0, 1}}, true); }) ==
          ErrorCode::ordering_violation);

    const auto soft = coupled_run({hi, lo}, stream, 0.0, 10.0, {{0, 1}}, false);
    CHECK(!soft.violations.empty());
    CHECK(soft.violations.front().time == 0.0);

    // A crossing that only develops mid-run: suppression on the *upper* system.
    CoupledSpec starved = hi;
    starved.initial = InitialCondition::zero();
    starved.config.suppressed = {{-2}, {-1}, {0}, {1}, {2}};
    const auto mid = coupled_run({lo, starved}, stream, 0.0, 50.0, {{0, 1}}, false);
    CHECK(!mid.violations.empty());
    CHECK(mid.violations.front().time > 0.0);
}

TEST_CASE("site traces record every change at the traced site") {
    CoupledSpec spec;
    spec.config = ones_box(3, 2, 0.5);
    spec.initial = InitialCondition::zero();
    DrivingStream stream(5005, 0.5);
    const auto res = coupled_run({spec}, stream, 0.0, 100.0, {}, true, {{0}});
    REQUIRE(res.traces.size() == 1);
    REQUIRE(res.traces[0].size() == 1);
    const auto& pts = res.traces[0][0].points;
    REQUIRE(pts.size() > 4);
    CHECK(pts.front().first == 0.0);
    CHECK(pts.front().second == 0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        CHECK(pts[i].first >= pts[i - 1].first);
        CHECK(std::llabs(pts[i].second - pts[i - 1].second) == 1);
    }
    CHECK(pts.back().second == res.finals[0].count_at({0}));
}
