#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "treelab/rng.hpp"

namespace treelab {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  double sd = 0.0;
  std::size_t n = 0;
};

MeanSe mean_se(const std::vector<double>& xs);

double median(std::vector<double> xs);  // by value: sorts a copy

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Tail of the Kolmogorov distribution, Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
double kolmogorov_tail(double lambda);

// Asymptotic two-sample p-value for an observed KS statistic.
double ks_p_value(double d, std::size_t n, std::size_t m);

// Distribution-free reference quantile of the two-sample KS statistic,
// estimated by pooling the two samples and re-splitting at random.
double ks_permutation_quantile(const std::vector<double>& a,
                               const std::vector<double>& b, double q,
                               std::size_t reps, Rng& rng);

// Regularized upper incomplete gamma Q(a, x); Q(df/2, x/2) is the
// chi-square tail probability.
double regularized_gamma_q(double a, double x);

double chi_square_tail(double stat, std::size_t df);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

LineFit least_squares_line(const std::vector<double>& xs,
                           const std::vector<double>& ys);

struct BootstrapBand {
  double lo = 0.0;
  double hi = 0.0;
  double se = 0.0;
};

// Percentile bootstrap band for the median of `xs` at the given level
// (level = 0.95 gives [2.5%, 97.5%]).
BootstrapBand bootstrap_median_band(const std::vector<double>& xs, double level,
                                    std::size_t reps, Rng& rng);

// Trend verdict shared by all suites: values should be nonincreasing along
// the parameter list; at most one adjacent inversion is tolerated.
std::size_t count_adjacent_inversions(const std::vector<double>& vals,
                                      double slack = 0.0);
bool trend_nonincreasing(const std::vector<double>& vals, double slack = 0.0);

}  // namespace treelab
