#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "iqnet/driving.hpp"
#include "iqnet/errors.hpp"
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

}  // namespace

TEST_CASE("batch means interval matches a hand-computed Student-t value") {
    std::vector<double> vals(20);
    std::iota(vals.begin(), vals.end(), 1.0);  // 1..20: mean 10.5, sample variance 35
    const MeanCI ci = batch_means_ci(vals);
    CHECK(ci.batches == 20);
    CHECK(ci.estimate == doctest::Approx(10.5).epsilon(1e-15));
    CHECK(ci.half_width == doctest::Approx(2.7688105680201942).epsilon(1e-9));
}

TEST_CASE("batch means requires twenty batches and a sane confidence") {
    std::vector<double> vals(19, 1.0);
    CHECK(code_of([&] { batch_means_ci(vals); }) == ErrorCode::insufficient_batches);
    std::vector<double> ok(20, 1.0);
    CHECK(code_of([&] { batch_means_ci(ok, 1.5); }) == ErrorCode::semantic_error);
    const MeanCI ci = batch_means_ci(ok);  // degenerate but legal: zero width
    CHECK(ci.estimate == 1.0);
    CHECK(ci.half_width == 0.0);
}

TEST_CASE("chi-square goodness of fit separates matching and broken counts") {
    std::vector<double> expected(6, 10.0);
    std::vector<double> perfect(6, 10.0);
    CHECK(chi_square_gof_pvalue(perfect, expected) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> broken{60.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(chi_square_gof_pvalue(broken, expected) < 1e-6);
    CHECK(code_of([&] { chi_square_gof_pvalue({}, {}); }) == ErrorCode::semantic_error);
}

TEST_CASE("chi-square pooling merges sparse cells instead of failing") {
    // Final cell has tiny expectation; it must be pooled backwards.
    std::vector<double> observed{50.0, 49.0, 1.0};
    std::vector<double> expected{50.0, 49.9, 0.1};
    const double p = chi_square_gof_pvalue(observed, expected);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
}

TEST_CASE("per-block arrival counts pass a Poisson goodness-of-fit check") {
    DrivingStream stream(424242, 0.7);
    std::vector<long long> counts;
    counts.reserve(10000);
    for (long long b = 0; b < 10000; ++b) {
        counts.push_back(static_cast<long long>(stream.generate_block({b}, 0).arrivals.size()));
    }
    CHECK(poisson_gof_pvalue(counts, 0.7) > 1e-3);
    // The same histogram against a wrong mean must be rejected decisively.
    CHECK(poisson_gof_pvalue(counts, 1.4) < 1e-6);
}

TEST_CASE("departure marks pass a Kolmogorov-Smirnov uniformity check") {
    DrivingStream stream(99, 0.5);
    std::vector<double> unit;
    long long block = 0;
    while (unit.size() < 100000) {
        const SiteBlock sb = stream.generate_block({block++}, 0);
        for (std::uint64_t m : sb.departure_marks) {
            unit.push_back(static_cast<double>(m) * 0x1.0p-53);
        }
    }
    unit.resize(100000);
    CHECK(ks_uniform_pvalue(unit) > 1e-3);
    std::vector<double> clumped(1000, 0.9);
    CHECK(ks_uniform_pvalue(clumped) < 1e-9);
}

TEST_CASE("ordinary least squares recovers an exact line and flags errors") {
    std::vector<double> x{0, 1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 * v + 1.0);
    const SlopeFit fit = ols_slope(x, y);
    CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::isinf(fit.t_stat));

    std::vector<double> noisy{1.1, 2.9, 5.2, 6.8, 9.1, 10.9};
    const SlopeFit nf = ols_slope(x, noisy);
    CHECK(nf.slope == doctest::Approx(2.0).epsilon(0.05));
    CHECK(nf.t_stat > 10.0);

    CHECK(code_of([&] { ols_slope({1.0, 2.0}, {1.0, 2.0}); }) == ErrorCode::semantic_error);
    CHECK(code_of([&] { ols_slope({1, 1, 1}, {1, 2, 3}); }) == ErrorCode::semantic_error);
}

TEST_CASE("median handles odd and even sample sizes") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK(median({7.0}) == 7.0);
    CHECK(code_of([&] { median({}); }) == ErrorCode::semantic_error);
}
