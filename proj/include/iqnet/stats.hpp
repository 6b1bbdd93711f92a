#pragma once

#include <cstdint>
#include <vector>

namespace iqnet {

// Confidence interval produced by the method of non-overlapping batch means.
struct MeanCI {
    double estimate = 0.0;    // mean of the batch values
    double half_width = 0.0;  // Student-t half-width at the requested confidence
    int batches = 0;
};

// Computes a Student-t confidence interval from per-batch values.
// Requires at least 20 batches; throws insufficient_batches otherwise.
MeanCI batch_means_ci(const std::vector<double>& batch_values, double confidence = 0.95);

// Chi-square goodness-of-fit p-value for observed category counts against
// expected category counts. Categories with expected count below `min_expected`
// are pooled into their right neighbour (and the final cell into the previous
// one) before forming the statistic. Degrees of freedom = cells - 1.
double chi_square_gof_pvalue(const std::vector<double>& observed,
                             const std::vector<double>& expected,
                             double min_expected = 5.0);

// Chi-square goodness-of-fit p-value of integer samples against Poisson(mean).
// Builds a histogram over 0..max_sample and an overflow-aware expected vector.
double poisson_gof_pvalue(const std::vector<long long>& samples, double mean);

// Kolmogorov-Smirnov p-value for the hypothesis that the samples are
// i.i.d. Uniform(0,1), using the asymptotic Kolmogorov distribution.
double ks_uniform_pvalue(std::vector<double> samples);

// Ordinary least squares fit y = intercept + slope * x.
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_std_error = 0.0;
    double t_stat = 0.0;  // slope / standard error
    int points = 0;
};

// Requires at least 3 points and non-constant x.
SlopeFit ols_slope(const std::vector<double>& x, const std::vector<double>& y);

// Median of a sample (average of the two middle order statistics when even).
double median(std::vector<double> values);

}  // namespace iqnet
