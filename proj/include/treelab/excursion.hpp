#pragma once

#include <memory>
#include <string>
#include <vector>

#include "treelab/rmq.hpp"
#include "treelab/rng.hpp"

namespace treelab {

// Nonnegative excursion sampled on the uniform grid {0, 1/N, ..., 1}.
// Values are immutable after construction; the range-minimum table is built
// on first use and shared between copies, so instances are safe to read from
// several workers at once.
class Excursion {
 public:
  static Excursion from_values(std::vector<double> values);

  std::size_t grid_size() const { return values_.size() - 1; }  // N
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t i) const { return values_.at(i); }

  // Maps a grid-aligned time to its index. Off-grid times are an error, not
  // a rounding: callers that need interpolation must say so explicitly.
  std::size_t index_of(double t) const;
  double value_at(double t) const { return values_[index_of(t)]; }

  // min over the closed index range [min(i,j), max(i,j)]
  double grid_min(std::size_t i, std::size_t j) const;
  std::size_t grid_argmin(std::size_t i, std::size_t j) const;

  // m_w(s, t) and d_w(s, t) for grid-aligned times
  double minimum(double s, double t) const;
  double distance(double s, double t) const;

  // Piecewise-linear extension at arbitrary times in [0,1]. The minimum is
  // exact: on a linear piece it sits at an endpoint, so the grid table plus
  // the two boundary values cover the whole range.
  double pl_value(double t) const;
  double pl_minimum(double s, double t) const;
  double pl_distance(double s, double t) const;

  bool strictly_positive() const;  // no interior zeros

 private:
  Excursion() = default;
  const SparseRmq& rmq() const;

  struct RmqCache;
  std::vector<double> values_;
  std::shared_ptr<RmqCache> cache_;
};

// trapezoid integral of the piecewise-linear extension over [0,1]
double excursion_integral(const Excursion& w);

double excursion_max(const Excursion& w);

// Brownian-excursion sampler, bridge route: a discretized Brownian bridge is
// rotated at its minimum. `refine` samples the bridge on a refine*N internal
// grid before the rotation, which tightens the downward bias the grid minimum
// inflicts on small-scale functionals; output values sit on the N-grid.
Excursion sample_excursion_vervaat(std::size_t n_grid, Rng& rng,
                                   std::size_t refine = 1);

// Brownian-excursion sampler, lattice route: a +-1 walk conditioned to first
// return to zero at time 2m, drawn by cycle-lemma rotation and scaled by
// (2m)^{-1/2}. For odd N the 2m = N+1 path is read back onto the N-grid by
// linear interpolation.
Excursion sample_excursion_walk(std::size_t n_grid, Rng& rng);

void write_excursion_csv(const Excursion& w, const std::string& path);
Excursion read_excursion_csv(const std::string& path);

}  // namespace treelab
