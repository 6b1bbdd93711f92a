#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "json.hpp"

#include "iqnet/engine.hpp"
#include "iqnet/stationary.hpp"
#include "iqnet/stats.hpp"

using namespace iqnet;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const IqnetError& e) {
        return e.code();
    }
    return ErrorCode::parse_error;  // sentinel: "did not throw"
}

DynamicsConfig torus_ones(int width, int n, double lambda) {
    DynamicsConfig cfg;
    cfg.seq = ones_sequence(1, width);
    cfg.lambda = lambda;
    cfg.index = IndexSpec::torus(n);
    return cfg;
}

long long wrap1(long long c, int n) {
    const long long m = 2LL * n + 1;
    return ((c + n) % m + m) % m - n;
}

}  // namespace

TEST_CASE("zero arrival rate converges immediately at depth zero with value zero") {
    DynamicsConfig cfg = torus_ones(3, 5, 0.0);
    const LoynesSample ls = loynes_sample(cfg, {{0}, {2}}, 4.0, 6, 11);
    CHECK(ls.depths.size() == 1);
    CHECK(ls.all_converged);
    CHECK(ls.final_values == std::vector<long long>{0, 0});
    CHECK(ls.values[0] == std::vector<long long>{0});
}

TEST_CASE("backward-sampling values are nondecreasing in the past depth") {
    DynamicsConfig cfg = torus_ones(3, 50, 0.25);
    const std::vector<Offset> sites{{-3}, {0}, {17}};
    const LoynesSample ls = loynes_sample(cfg, sites, 4.0, 6, 2024, false);
    REQUIRE(ls.depths.size() >= 3);
    for (std::size_t s = 0; s < sites.size(); ++s) {
        for (std::size_t k = 1; k < ls.values[s].size(); ++k) {
            CHECK(ls.values[s][k] >= ls.values[s][k - 1]);
        }
        CHECK(ls.final_values[s] == ls.values[s].back());
    }
}

TEST_CASE("box values at matching depths never decrease when the box grows") {
    const std::vector<Offset> sites{{0}, {1}};
    std::vector<LoynesSample> samples;
    for (int n : {4, 8, 16}) {
        DynamicsConfig cfg = torus_ones(3, 0, 0.25);
        cfg.index = IndexSpec::box(n);
        samples.push_back(loynes_sample(cfg, sites, 4.0, 4, 555, false));
    }
    for (std::size_t s = 0; s < sites.size(); ++s) {
        for (std::size_t k = 0; k < samples[0].values[s].size(); ++k) {
            CHECK(samples[0].values[s][k] <= samples[1].values[s][k]);
            CHECK(samples[1].values[s][k] <= samples[2].values[s][k]);
        }
    }
}

TEST_CASE("subcritical backward sampling stabilizes and reports convergence") {
    DynamicsConfig cfg = torus_ones(3, 0, 0.25);
    cfg.index = IndexSpec::box(10);
    const LoynesSample ls = loynes_sample(cfg, {{0}}, 16.0, 7, 3);
    CHECK(ls.all_converged);
    REQUIRE(ls.values[0].size() >= 3);
    const auto& v = ls.values[0];
    CHECK(v[v.size() - 1] == v[v.size() - 2]);
    CHECK(v[v.size() - 2] == v[v.size() - 3]);
}

TEST_CASE("supercritical backward sampling keeps growing and reports it") {
    DynamicsConfig cfg = torus_ones(3, 10, 0.5);
    CHECK(code_of([&] { loynes_sample(cfg, {{0}}, 8.0, 3, 17); }) == ErrorCode::not_converged);
    const LoynesSample ls = loynes_sample(cfg, {{0}}, 8.0, 3, 17, false);
    CHECK_FALSE(ls.all_converged);
    CHECK(ls.values[0].back() > ls.values[0].front());
}

TEST_CASE("backward sampling validates its inputs") {
    DynamicsConfig cfg = torus_ones(3, 5, 0.25);
    CHECK(code_of([&] { loynes_sample(cfg, {}, 4.0, 3, 1); }) == ErrorCode::semantic_error);
    CHECK(code_of([&] { loynes_sample(cfg, {{9}}, 4.0, 3, 1); }) == ErrorCode::site_out_of_range);
    CHECK(code_of([&] { loynes_sample(cfg, {{0}}, 0.0, 3, 1); }) == ErrorCode::semantic_error);
    CHECK(code_of([&] { loynes_sample(cfg, {{0}}, 4.0, -1, 1); }) == ErrorCode::semantic_error);
    DynamicsConfig rc = cfg;
    rc.index = IndexSpec::restricted({{0}});
    CHECK(code_of([&] { loynes_sample(rc, {{0}}, 4.0, 3, 1); }) == ErrorCode::semantic_error);
}

TEST_CASE("single-queue long-run estimates match birth-death closed forms") {
    // Center-only weights on a one-site torus: the origin behaves as an
    // M/M/1 queue with utilization lambda, so mean = l/(1-l), second moment
    // = l(1+l)/(1-l)^2, and the busy probability equals lambda.
    DynamicsConfig cfg;
    cfg.lambda = 0.5;
    cfg.index = IndexSpec::torus(0);
    const StatReport rep = ergodic_estimates(cfg, 4242, 1000.0, 40000.0, 25, {0});
    CHECK_FALSE(rep.divergent_warning);
    CHECK(rep.closed_form_mu == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(rep.mean - 1.0) < std::max(4.0 * rep.mean_half_width, 0.08));
    CHECK(std::abs(rep.second_moment - 3.0) < std::max(4.0 * rep.second_moment_half_width, 0.5));
    CHECK(rep.mean_half_width > 0.0);
    CHECK(std::abs(rep.origin_departure_rate - 0.5) < 0.01);
    CHECK(std::abs(rep.origin_accepted_rate - 0.5) < 0.02);
    CHECK(std::abs(rep.drift_residual) <= 3.0 * rep.drift_residual_half_width + 1e-9);
    // Center-only weights have no off-center support, so both transport sums
    // vanish identically.
    CHECK(rep.mass_transport_lhs == 0.0);
    CHECK(rep.mass_transport_rhs == 0.0);
    REQUIRE(rep.covariance.size() == 1);
    CHECK(std::abs(rep.covariance[0].estimate - 2.0) <
          std::max(4.0 * rep.covariance[0].half_width, 0.4));
}

TEST_CASE("an arrival-free system reports exactly zero moments") {
    DynamicsConfig cfg = torus_ones(3, 5, 0.0);
    const StatReport rep = ergodic_estimates(cfg, 9, 10.0, 500.0, 20, {0, 1});
    CHECK(rep.mean == 0.0);
    CHECK(rep.second_moment == 0.0);
    CHECK(rep.origin_departure_rate == 0.0);
    CHECK(rep.origin_accepted_rate == 0.0);
    CHECK(rep.drift_residual == 0.0);
    CHECK(rep.mass_transport_residual == 0.0);
    for (const CovariancePoint& pt : rep.covariance) {
        CHECK(pt.estimate == 0.0);
        CHECK(pt.half_width == 0.0);
    }
}

TEST_CASE("estimator integrals match an independent event-by-event replay") {
    // Replays the identical event list through the map-based single-step
    // path, accumulating every reported functional directly, and demands the
    // streaming estimator agree to floating-point accuracy.
    const int n = 2;
    DynamicsConfig cfg = torus_ones(3, n, 0.3);
    const std::uint64_t seed = 77;
    const double burn = 3.0, horizon = 17.0, t_end = burn + horizon;
    const int nb = 20;
    const std::vector<int> lags{0, 1, 2};
    const StatReport rep = ergodic_estimates(cfg, seed, burn, horizon, nb, lags);

    DrivingStream stream(seed, cfg.lambda);
    const std::vector<Offset> sites = index_sites(cfg.index, 1);
    const std::vector<Event> events = events_in(stream, sites, 0.0, t_end);

    QueueState st;
    st.d = 1;
    st.index = cfg.index;
    st.sites = sites;
    st.counts.assign(sites.size(), 0);
    const double bl = horizon / nb;
    const int M = static_cast<int>(sites.size());

    std::vector<double> i_s1(nb, 0.0), i_s2(nb, 0.0), i_r0(nb, 0.0), i_lhs(nb, 0.0),
        i_rhs(nb, 0.0);
    std::vector<std::vector<double>> i_p(lags.size(), std::vector<double>(nb, 0.0));
    std::vector<double> i_bound(nb + 1, 0.0);
    int next_bound = 0;
    long long origin_accepts = 0;

    auto boundary = [&](int k) { return k == nb ? t_end : burn + bl * k; };
    auto count = [&](long long c) { return st.counts[static_cast<std::size_t>(c + n)]; };
    auto eval_i = [&]() {
        double acc = 0.0;
        for (const auto& [off, w] : cfg.seq.entries()) acc += w * static_cast<double>(count(wrap1(off[0], n)));
        return static_cast<double>(count(0)) * acc;
    };
    auto add_interval = [&](double a, double b) {
        while (next_bound <= nb && boundary(next_bound) <= b && boundary(next_bound) >= a) {
            i_bound[static_cast<std::size_t>(next_bound)] = eval_i();
            ++next_bound;
        }
        double lo = std::max(a, burn);
        const double hi_all = std::min(b, t_end);
        while (lo < hi_all) {
            int ib = std::clamp(static_cast<int>((lo - burn) / bl), 0, nb - 1);
            const double hi = std::min(hi_all, burn + bl * (ib + 1));
            const double dt = hi - lo;
            if (dt <= 0.0) break;
            double s1 = 0.0, s2 = 0.0;
            for (long long c : st.counts) {
                s1 += static_cast<double>(c);
                s2 += static_cast<double>(c * c);
            }
            i_s1[static_cast<std::size_t>(ib)] += s1 * dt;
            i_s2[static_cast<std::size_t>(ib)] += s2 * dt;
            for (std::size_t l = 0; l < lags.size(); ++l) {
                double p = 0.0;
                for (int i = -n; i <= n; ++i)
                    p += static_cast<double>(count(i)) *
                         static_cast<double>(count(wrap1(i + lags[l], n)));
                i_p[l][static_cast<std::size_t>(ib)] += p * dt;
            }
            const double r0 = departure_probability(st, cfg, {0});
            i_r0[static_cast<std::size_t>(ib)] += r0 * dt;
            double lhs = 0.0, rhs = 0.0;
            for (const auto& [off, w] : cfg.seq.entries()) {
                if (off[0] == 0) continue;
                lhs += departure_probability(st, cfg, {wrap1(off[0], n)}) * w *
                       static_cast<double>(count(0));
                rhs += r0 * w * static_cast<double>(count(wrap1(off[0], n)));
            }
            i_lhs[static_cast<std::size_t>(ib)] += lhs * dt;
            i_rhs[static_cast<std::size_t>(ib)] += rhs * dt;
            lo = hi;
        }
    };

    double cur = 0.0;
    for (const Event& e : events) {
        const double et = std::max(e.time, cur);
        add_interval(cur, et);
        const long long before = count(0);
        st = apply_event(st, cfg, e);
        if (e.site == Offset{0} && count(0) < before && e.time >= burn && e.time < t_end) {
            ++origin_accepts;
        }
        cur = et;
    }
    add_interval(cur, t_end);
    REQUIRE(next_bound == nb + 1);

    auto avg = [&](const std::vector<double>& v, double scale) {
        double acc = 0.0;
        for (double x : v) acc += x / scale;
        return acc / static_cast<double>(v.size());
    };
    const double mean_ref = avg(i_s1, M * bl);
    const double second_ref = avg(i_s2, M * bl);
    CHECK(rep.mean == doctest::Approx(mean_ref).epsilon(1e-10));
    CHECK(rep.second_moment == doctest::Approx(second_ref).epsilon(1e-10));
    CHECK(rep.origin_departure_rate == doctest::Approx(avg(i_r0, bl)).epsilon(1e-10));
    CHECK(rep.origin_accepted_rate ==
          doctest::Approx(static_cast<double>(origin_accepts) / horizon).epsilon(1e-12));
    CHECK(rep.mass_transport_lhs == doctest::Approx(avg(i_lhs, bl)).epsilon(1e-10));
    CHECK(rep.mass_transport_rhs == doctest::Approx(avg(i_rhs, bl)).epsilon(1e-10));

    double drift_ref = 0.0;
    for (int b = 0; b < nb; ++b)
        drift_ref += (i_bound[static_cast<std::size_t>(b) + 1] - i_bound[static_cast<std::size_t>(b)]) / bl;
    drift_ref /= nb;
    CHECK(rep.drift_residual == doctest::Approx(drift_ref).epsilon(1e-10));

    const double mu = closed_form_mean(cfg.seq, cfg.lambda);
    REQUIRE(rep.covariance.size() == lags.size());
    for (std::size_t l = 0; l < lags.size(); ++l) {
        std::vector<double> closed_b(nb), emp_b(nb);
        for (int b = 0; b < nb; ++b) {
            const auto bi = static_cast<std::size_t>(b);
            const double p = i_p[l][bi] / (M * bl);
            const double mb = i_s1[bi] / (M * bl);
            closed_b[bi] = p - 2.0 * mu * mb + mu * mu;
            emp_b[bi] = p - 2.0 * rep.mean * mb + rep.mean * rep.mean;
        }
        const MeanCI cci = batch_means_ci(closed_b);
        const MeanCI eci = batch_means_ci(emp_b);
        CHECK(rep.covariance[l].estimate == doctest::Approx(cci.estimate).epsilon(1e-9));
        CHECK(rep.covariance[l].half_width == doctest::Approx(cci.half_width).epsilon(1e-9));
        CHECK(rep.covariance[l].empirical_estimate == doctest::Approx(eci.estimate).epsilon(1e-9));
    }
}

TEST_CASE("interfering torus run reproduces the closed-form mean") {
    DynamicsConfig cfg = torus_ones(3, 10, 0.25);
    const StatReport rep = ergodic_estimates(cfg, 31337, 2000.0, 60000.0, 30, {0, 1, 5});
    CHECK(rep.closed_form_mu == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.mean > 0.9);
    CHECK(rep.mean < 1.1);
    CHECK(std::abs(rep.mean - 1.0) < 4.0 * rep.mean_half_width + 0.02);
    CHECK(rep.covariance[0].estimate > 0.0);
    // Neighboring queues compete for service, so correlations stay positive.
    CHECK(rep.covariance[1].estimate > -3.0 * rep.covariance[1].half_width);
    CHECK(std::abs(rep.origin_departure_rate - 0.25) < 0.025);
    CHECK(std::abs(rep.drift_residual) <= 3.0 * rep.drift_residual_half_width + 1e-9);
    CHECK(std::abs(rep.mass_transport_residual) <= 3.0 * rep.mass_transport_half_width + 1e-9);
}

TEST_CASE("long-run estimator validates its inputs") {
    DynamicsConfig cfg = torus_ones(3, 5, 0.25);
    CHECK(code_of([&] { ergodic_estimates(cfg, 1, 0.0, 100.0, 19, {}); }) ==
          ErrorCode::insufficient_batches);
    CHECK(code_of([&] { ergodic_estimates(cfg, 1, -1.0, 100.0, 20, {}); }) ==
          ErrorCode::semantic_error);
    CHECK(code_of([&] { ergodic_estimates(cfg, 1, 0.0, 0.0, 20, {}); }) ==
          ErrorCode::semantic_error);
    CHECK(code_of([&] { ergodic_estimates(cfg, 1, 0.0, 100.0, 20, {6}); }) ==
          ErrorCode::semantic_error);
    CHECK(code_of([&] { ergodic_estimates(cfg, 1, 0.0, 100.0, 20, {-1}); }) ==
          ErrorCode::semantic_error);
    DynamicsConfig boxed = cfg;
    boxed.index = IndexSpec::box(5);
    CHECK(code_of([&] { ergodic_estimates(boxed, 1, 0.0, 100.0, 20, {}); }) ==
          ErrorCode::semantic_error);
    DynamicsConfig pinned = cfg;
    pinned.frozen[{0}] = 3;
    CHECK(code_of([&] { ergodic_estimates(pinned, 1, 0.0, 100.0, 20, {}); }) ==
          ErrorCode::semantic_error);
}

TEST_CASE("supercritical rates are flagged instead of rejected") {
    DynamicsConfig cfg = torus_ones(3, 5, 0.5);
    const StatReport rep = ergodic_estimates(cfg, 7, 0.0, 200.0, 20, {0});
    CHECK(rep.divergent_warning);
    CHECK(std::isnan(rep.closed_form_mu));
    CHECK(rep.mean > 0.0);
}

TEST_CASE("identical inputs serialize to identical reports") {
    DynamicsConfig cfg = torus_ones(3, 4, 0.2);
    const StatReport a = ergodic_estimates(cfg, 5, 50.0, 400.0, 20, {0, 2});
    const StatReport b = ergodic_estimates(cfg, 5, 50.0, 400.0, 20, {0, 2});
    CHECK(stat_report_json(a) == stat_report_json(b));
    CHECK(covariance_csv(a) == covariance_csv(b));
    const StatReport c = ergodic_estimates(cfg, 6, 50.0, 400.0, 20, {0, 2});
    CHECK(stat_report_json(a) != stat_report_json(c));
}

TEST_CASE("report serialization carries the documented fields") {
    DynamicsConfig cfg = torus_ones(3, 4, 0.2);
    const StatReport rep = rate_balance_check(cfg, 12, 100.0, 2000.0);
    CHECK(rep.batch_count == 30);
    CHECK(rep.covariance.empty());
    const auto j = nlohmann::json::parse(stat_report_json(rep));
    CHECK(j.contains("mean"));
    CHECK(j.contains("origin_departure_rate"));
    CHECK(j.contains("mass_transport_residual"));
    CHECK(j.contains("drift_residual"));
    CHECK(j["batch_count"] == 30);
    CHECK(j["covariance"].is_array());
    DynamicsConfig wide = torus_ones(3, 10, 0.25);
    const StatReport cv = ergodic_estimates(wide, 3, 100.0, 2000.0, 20, {0, 1});
    const std::string csv = covariance_csv(cv);
    CHECK(csv.rfind("lag,estimate,half_width\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
