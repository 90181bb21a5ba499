#include "treelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace treelab {

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  r.n = xs.size();
  if (r.n == 0) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double x : xs) {
      const double d = x - r.mean;
      ss += d * d;
    }
    r.sd = std::sqrt(ss / static_cast<double>(r.n - 1));
    r.se = r.sd / std::sqrt(static_cast<double>(r.n));
  }
  return r;
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median: empty sample");
  const std::size_t n = xs.size();
  std::sort(xs.begin(), xs.end());
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  return d;
}

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 101; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  const double q = 2.0 * sum;
  return std::min(1.0, std::max(0.0, q));
}

double ks_p_value(double d, std::size_t n, std::size_t m) {
  const double ne = static_cast<double>(n) * static_cast<double>(m) /
                    static_cast<double>(n + m);
  return kolmogorov_tail(std::sqrt(ne) * d);
}

double ks_permutation_quantile(const std::vector<double>& a,
                               const std::vector<double>& b, double q,
                               std::size_t reps, Rng& rng) {
  if (q <= 0.0 || q >= 1.0)
    throw std::invalid_argument("ks_permutation_quantile: q in (0,1)");
  std::vector<double> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  std::vector<double> stats;
  stats.reserve(reps);
  std::vector<double> x(a.size()), y(b.size());
  for (std::size_t r = 0; r < reps; ++r) {
    // Fisher-Yates over the pool, then split at |a|
    for (std::size_t i = pool.size() - 1; i > 0; --i) {
      const std::size_t j = rng.below(static_cast<std::uint32_t>(i + 1));
      std::swap(pool[i], pool[j]);
    }
    std::copy(pool.begin(), pool.begin() + a.size(), x.begin());
    std::copy(pool.begin() + a.size(), pool.end(), y.begin());
    stats.push_back(ks_statistic(x, y));
  }
  std::sort(stats.begin(), stats.end());
  const double pos = q * static_cast<double>(stats.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, stats.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return stats[lo] * (1.0 - frac) + stats[hi] * frac;
}

namespace {

// series representation of P(a,x), valid for x < a+1
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// continued fraction for Q(a,x), valid for x >= a+1 (modified Lentz)
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0)
    throw std::invalid_argument("regularized_gamma_q: need a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_square_tail(double stat, std::size_t df) {
  return regularized_gamma_q(0.5 * static_cast<double>(df), 0.5 * stat);
}

LineFit least_squares_line(const std::vector<double>& xs,
                           const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("least_squares_line: need >= 2 paired points");
  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0)
    throw std::invalid_argument("least_squares_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

BootstrapBand bootstrap_median_band(const std::vector<double>& xs, double level,
                                    std::size_t reps, Rng& rng) {
  if (xs.empty()) throw std::invalid_argument("bootstrap: empty sample");
  if (level <= 0.0 || level >= 1.0)
    throw std::invalid_argument("bootstrap: level in (0,1)");
  std::vector<double> meds;
  meds.reserve(reps);
  std::vector<double> resample(xs.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto& v : resample)
      v = xs[rng.below(static_cast<std::uint32_t>(xs.size()))];
    meds.push_back(median(resample));
  }
  std::sort(meds.begin(), meds.end());
  const double alpha = 0.5 * (1.0 - level);
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(meds.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, meds.size() - 1);
    return meds[lo] + (meds[hi] - meds[lo]) * (pos - lo);
  };
  BootstrapBand band;
  band.lo = at(alpha);
  band.hi = at(1.0 - alpha);
  band.se = mean_se(meds).sd;
  return band;
}

std::size_t count_adjacent_inversions(const std::vector<double>& vals,
                                      double slack) {
  std::size_t inv = 0;
  for (std::size_t i = 0; i + 1 < vals.size(); ++i)
    if (vals[i + 1] > vals[i] + slack) ++inv;
  return inv;
}

bool trend_nonincreasing(const std::vector<double>& vals, double slack) {
  return count_adjacent_inversions(vals, slack) <= 1;
}

}  // namespace treelab
