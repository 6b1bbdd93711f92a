#include "iqnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "iqnet/errors.hpp"

namespace iqnet {

MeanCI batch_means_ci(const std::vector<double>& batch_values, double confidence) {
    const int n = static_cast<int>(batch_values.size());
    if (n < 20) {
        fail(ErrorCode::insufficient_batches,
             "batch means require at least 20 batches, got " + std::to_string(n));
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
        fail(ErrorCode::semantic_error, "confidence must lie in (0,1)");
    }
    double mean = 0.0;
    for (double v : batch_values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : batch_values) ss += (v - mean) * (v - mean);
    const double variance = ss / (n - 1);
    boost::math::students_t_distribution<double> dist(n - 1);
    const double q = boost::math::quantile(dist, 0.5 + confidence / 2.0);
    MeanCI ci;
    ci.estimate = mean;
    ci.half_width = q * std::sqrt(variance / n);
    ci.batches = n;
    return ci;
}

namespace {

// Pools adjacent cells until every pooled cell's expected count reaches the
// floor, merging any undersized trailing cell backwards.
void pool_cells(const std::vector<double>& observed, const std::vector<double>& expected,
                double min_expected, std::vector<double>& obs_out, std::vector<double>& exp_out) {
    double o_acc = 0.0;
    double e_acc = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o_acc += observed[i];
        e_acc += expected[i];
        if (e_acc >= min_expected) {
            obs_out.push_back(o_acc);
            exp_out.push_back(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (!exp_out.empty()) {
            obs_out.back() += o_acc;
            exp_out.back() += e_acc;
        } else {
            obs_out.push_back(o_acc);
            exp_out.push_back(e_acc);
        }
    }
}

}  // namespace

double chi_square_gof_pvalue(const std::vector<double>& observed,
                             const std::vector<double>& expected, double min_expected) {
    if (observed.size() != expected.size() || observed.empty()) {
        fail(ErrorCode::semantic_error, "observed/expected category vectors must match and be nonempty");
    }
    std::vector<double> obs, exp;
    pool_cells(observed, expected, min_expected, obs, exp);
    if (obs.size() < 2) return 1.0;
    double stat = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (exp[i] <= 0.0) {
            fail(ErrorCode::semantic_error, "expected counts must be positive after pooling");
        }
        const double d = obs[i] - exp[i];
        stat += d * d / exp[i];
    }
    boost::math::chi_squared_distribution<double> dist(static_cast<double>(obs.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

double poisson_gof_pvalue(const std::vector<long long>& samples, double mean) {
    if (samples.empty()) fail(ErrorCode::semantic_error, "need at least one sample");
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        fail(ErrorCode::semantic_error, "Poisson mean must be finite and nonnegative");
    }
    long long cap = 0;
    for (long long s : samples) {
        if (s < 0) fail(ErrorCode::semantic_error, "Poisson samples must be nonnegative");
        cap = std::max(cap, s);
    }
    if (mean == 0.0) {
        return cap == 0 ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(samples.size());
    std::vector<double> observed(static_cast<std::size_t>(cap) + 2, 0.0);
    for (long long s : samples) observed[static_cast<std::size_t>(s)] += 1.0;
    boost::math::poisson_distribution<double> dist(mean);
    std::vector<double> expected(observed.size(), 0.0);
    double head = 0.0;
    for (long long k = 0; k <= cap; ++k) {
        const double pk = boost::math::pdf(dist, static_cast<double>(k));
        expected[static_cast<std::size_t>(k)] = n * pk;
        head += pk;
    }
    expected.back() = n * std::max(0.0, 1.0 - head);  // tail cell beyond the largest sample
    return chi_square_gof_pvalue(observed, expected);
}

double ks_uniform_pvalue(std::vector<double> samples) {
    if (samples.empty()) fail(ErrorCode::semantic_error, "need at least one sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d_stat = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = samples[i];
        if (!(u >= 0.0 && u <= 1.0)) {
            fail(ErrorCode::semantic_error, "uniformity test samples must lie in [0,1]");
        }
        const double hi = (static_cast<double>(i) + 1.0) / n - u;
        const double lo = u - static_cast<double>(i) / n;
        d_stat = std::max({d_stat, hi, lo});
    }
    const double x = d_stat * d_stat * n;
    double p = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * x);
        p += sign * term;
        sign = -sign;
        if (term < 1e-12) break;
    }
    return std::clamp(2.0 * p, 0.0, 1.0);
}

SlopeFit ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) {
        fail(ErrorCode::semantic_error, "OLS needs matching x/y with at least 3 points");
    }
    const int n = static_cast<int>(x.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) fail(ErrorCode::semantic_error, "OLS needs non-constant x values");
    SlopeFit fit;
    fit.points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    const double ssr = std::max(0.0, syy - fit.slope * sxy);
    const double sigma2 = ssr / (n - 2);
    fit.slope_std_error = std::sqrt(sigma2 / sxx);
    if (fit.slope_std_error > 0.0) {
        fit.t_stat = fit.slope / fit.slope_std_error;
    } else {
        fit.t_stat = fit.slope == 0.0 ? 0.0
                                      : std::copysign(std::numeric_limits<double>::infinity(), fit.slope);
    }
    return fit;
}

double median(std::vector<double> values) {
    if (values.empty()) fail(ErrorCode::semantic_error, "median of empty sample");
    const std::size_t n = values.size();
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    double hi = *mid;
    if (n % 2 == 1) return hi;
    auto lo_it = std::max_element(values.begin(), mid);
    return (*lo_it + hi) / 2.0;
}

}  // namespace iqnet
