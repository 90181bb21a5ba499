#include "treelab/excursion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <stdexcept>

namespace treelab {

struct Excursion::RmqCache {
  std::once_flag once;
  SparseRmq table;
};

Excursion Excursion::from_values(std::vector<double> values) {
  if (values.size() < 2)
    throw std::invalid_argument("Excursion: need at least two grid values");
  if (values.front() != 0.0 || values.back() != 0.0)
    throw std::invalid_argument("Excursion: endpoints must be exactly zero");
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("Excursion: values must be finite and >= 0");
  }
  Excursion w;
  w.values_ = std::move(values);
  w.cache_ = std::make_shared<RmqCache>();
  return w;
}

const SparseRmq& Excursion::rmq() const {
  std::call_once(cache_->once,
                 [this] { cache_->table = SparseRmq(values_); });
  return cache_->table;
}

std::size_t Excursion::index_of(double t) const {
  const std::size_t n = grid_size();
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("Excursion: time outside [0,1]");
  const double scaled = t * static_cast<double>(n);
  const double rounded = std::nearbyint(scaled);
  const auto i = static_cast<std::size_t>(rounded);
  // accept only times that reproduce i/N exactly in double arithmetic
  if (i > n || t != static_cast<double>(i) / static_cast<double>(n))
    throw std::invalid_argument(
        "Excursion: time is not a grid point (interpolation is a caller "
        "decision, not a silent rounding)");
  return i;
}

double Excursion::grid_min(std::size_t i, std::size_t j) const {
  return values_[grid_argmin(i, j)];
}

std::size_t Excursion::grid_argmin(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  if (j >= values_.size()) throw std::out_of_range("Excursion: bad grid index");
  return rmq().argmin(i, j);
}

double Excursion::minimum(double s, double t) const {
  return grid_min(index_of(s), index_of(t));
}

double Excursion::distance(double s, double t) const {
  return value_at(s) + value_at(t) - 2.0 * minimum(s, t);
}

double Excursion::pl_value(double t) const {
  if (!(t >= -1e-12 && t <= 1.0 + 1e-12))
    throw std::out_of_range("Excursion: time outside [0,1]");
  const auto n = static_cast<double>(grid_size());
  const double x = std::min(std::max(t, 0.0), 1.0) * n;
  const auto i = static_cast<std::size_t>(x);
  if (i >= grid_size()) return values_.back();
  const double frac = x - static_cast<double>(i);
  return values_[i] + frac * (values_[i + 1] - values_[i]);
}

double Excursion::pl_minimum(double s, double t) const {
  if (s > t) std::swap(s, t);
  const double vs = pl_value(s);
  const double vt = pl_value(t);
  const auto n = static_cast<double>(grid_size());
  const auto lo = static_cast<std::size_t>(std::ceil(std::max(s, 0.0) * n));
  const auto hi = static_cast<std::size_t>(std::floor(std::min(t, 1.0) * n));
  double m = std::min(vs, vt);
  if (lo <= hi) m = std::min(m, grid_min(lo, hi));
  return m;
}

double Excursion::pl_distance(double s, double t) const {
  return pl_value(s) + pl_value(t) - 2.0 * pl_minimum(s, t);
}

bool Excursion::strictly_positive() const {
  for (std::size_t i = 1; i + 1 < values_.size(); ++i)
    if (values_[i] <= 0.0) return false;
  return true;
}

double excursion_integral(const Excursion& w) {
  // endpoints are zero, so the trapezoid rule collapses to the plain mean
  double s = 0.0;
  for (double v : w.values()) s += v;
  return s / static_cast<double>(w.grid_size());
}

double excursion_max(const Excursion& w) {
  double m = 0.0;
  for (double v : w.values()) m = std::max(m, v);
  return m;
}

Excursion sample_excursion_vervaat(std::size_t n_grid, Rng& rng,
                                   std::size_t refine) {
  if (n_grid < 2)
    throw std::invalid_argument("sample_excursion_vervaat: need N >= 2");
  if (refine < 1)
    throw std::invalid_argument("sample_excursion_vervaat: refine >= 1");
  const std::size_t m = n_grid * refine;
  std::vector<double> b(m + 1);
  const double step = 1.0 / std::sqrt(static_cast<double>(m));
  double s = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    s += rng.normal() * step;
    b[i] = s;
  }
  const double drift = b[m];
  for (std::size_t i = 1; i <= m; ++i)
    b[i] -= drift * static_cast<double>(i) / static_cast<double>(m);
  b[m] = 0.0;
  std::size_t lo = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (b[i] < b[lo]) lo = i;
  const double floor_val = b[lo];
  std::vector<double> vals(n_grid + 1);
  for (std::size_t i = 0; i <= n_grid; ++i) {
    const std::size_t j = (lo + i * refine) % m;
    vals[i] = b[j] - floor_val;
  }
  vals[0] = 0.0;
  vals[n_grid] = 0.0;
  return Excursion::from_values(std::move(vals));
}

namespace {

// Dvoretzky-Motzkin rotation: for +-1 steps with one more up than down, the
// rotation starting after the last prefix-sum minimum has every proper
// prefix sum positive.
std::size_t cycle_rotation_point(const std::vector<signed char>& steps) {
  long best = std::numeric_limits<long>::max();
  long sum = 0;
  std::size_t where = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    sum += steps[i];
    if (sum <= best) {  // <= keeps the LAST minimum
      best = sum;
      where = i + 1;
    }
  }
  return where % steps.size();
}

}  // namespace

Excursion sample_excursion_walk(std::size_t n_grid, Rng& rng) {
  if (n_grid < 2)
    throw std::invalid_argument("sample_excursion_walk: need N >= 2");
  const std::size_t m = (n_grid + 1) / 2;  // path length 2m, 2m >= n_grid
  // m ups and m-1 downs in uniform order
  std::vector<signed char> steps(2 * m - 1, -1);
  std::fill(steps.begin(), steps.begin() + static_cast<long>(m), +1);
  for (std::size_t i = steps.size() - 1; i > 0; --i) {
    const std::size_t j = rng.below(static_cast<std::uint32_t>(i + 1));
    std::swap(steps[i], steps[j]);
  }
  const std::size_t r = cycle_rotation_point(steps);
  // rotated prefix sums sigma_j >= 1; excursion: 0, sigma_1..sigma_{2m-1}, 0
  std::vector<double> path(2 * m + 1, 0.0);
  long sum = 0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(2 * m));
  for (std::size_t j = 0; j < steps.size(); ++j) {
    sum += steps[(r + j) % steps.size()];
    path[j + 1] = static_cast<double>(sum) * scale;
  }
  path[2 * m] = 0.0;
  if (2 * m == n_grid) return Excursion::from_values(std::move(path));
  // odd N: read the 2m-step path back on the N-grid by linear interpolation
  std::vector<double> vals(n_grid + 1, 0.0);
  for (std::size_t i = 1; i < n_grid; ++i) {
    const double u = static_cast<double>(i) * static_cast<double>(2 * m) /
                     static_cast<double>(n_grid);
    const auto k = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(k);
    vals[i] = path[k] * (1.0 - frac) + path[k + 1] * frac;
  }
  return Excursion::from_values(std::move(vals));
}

void write_excursion_csv(const Excursion& w, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_excursion_csv: cannot open " + path);
  std::fputs("t,w\n", f);
  const std::size_t n = w.grid_size();
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    std::fprintf(f, "%.17g,%.17g\n", t, w.value(i));
  }
  std::fclose(f);
}

Excursion read_excursion_csv(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  if (!f) throw std::runtime_error("read_excursion_csv: cannot open " + path);
  char line[256];
  if (!std::fgets(line, sizeof line, f)) {
    std::fclose(f);
    throw std::runtime_error("read_excursion_csv: empty file");
  }
  std::vector<double> ts, vs;
  while (std::fgets(line, sizeof line, f)) {
    double t = 0.0, v = 0.0;
    if (std::sscanf(line, "%lg,%lg", &t, &v) != 2) {
      std::fclose(f);
      throw std::runtime_error("read_excursion_csv: malformed row");
    }
    ts.push_back(t);
    vs.push_back(v);
  }
  std::fclose(f);
  if (ts.size() < 2) throw std::runtime_error("read_excursion_csv: too short");
  const std::size_t n = ts.size() - 1;
  for (std::size_t i = 0; i <= n; ++i) {
    if (ts[i] != static_cast<double>(i) / static_cast<double>(n))
      throw std::runtime_error("read_excursion_csv: non-uniform time grid");
  }
  return Excursion::from_values(std::move(vs));
}

}  // namespace treelab
