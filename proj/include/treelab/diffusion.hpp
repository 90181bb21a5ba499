#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "treelab/metric_tree.hpp"
#include "treelab/rng.hpp"
#include "treelab/walk.hpp"

namespace treelab {

// Host metric tree subdivided into cells of size about h. Grid ids 0..V-1
// are the host vertices under their own ids; the interior points of the
// edge above host vertex v follow at interior_base[v].., ordered from the
// parent end. Every edge keeps at least one cell, so branch degrees match
// the host.
struct GridTree {
  MetricTree host;
  double h = 0.0;
  Adjacency adj;
  std::vector<std::uint32_t> cells;          // per host vertex, cells[0] = 0
  std::vector<double> spacing;               // edge_len / cells, 0 for the root
  std::vector<std::uint32_t> interior_base;  // per host vertex
  std::vector<std::uint32_t> gedge;          // owning edge per grid id
  std::vector<std::uint32_t> gindex;         // cell index from the parent end
  std::vector<std::uint32_t> up;             // rootward grid neighbor, up[0] = 0
  std::size_t size() const { return adj.size(); }
};

GridTree build_grid(const MetricTree& t, double h);

TreePoint grid_point(const GridTree& g, std::uint32_t gid);

// Inverse of grid_point; the point must sit on the grid up to 1e-9.
std::uint32_t grid_locate(const GridTree& g, TreePoint p);

// Measure seen by the grid: each vertex absorbs the density mass of its
// adjacent half-cells plus the atoms that round to it.
std::vector<double> measure_cell_weights(const GridTree& g, const EdgeMeasure& m);

// Grid walk standing in for Brownian motion on the tree. Under the default
// clock every step is worth h^2 units of length-measure time. The random
// clock instead draws each holding as h^2 times an exact two-sided
// first-passage time (mean one) and records the cumulative times (size
// steps+1).
struct DiffusionPath {
  std::vector<std::uint32_t> steps;
  double h = 0.0;
  double step_time = 0.0;
  std::vector<double> times;
  std::uint64_t seed = 0;
  bool random_clock = false;

  double elapsed() const {
    if (!times.empty()) return times.back();
    return static_cast<double>(steps.size()) * step_time;
  }
};

DiffusionPath grid_bm(const GridTree& g, double horizon, std::uint64_t seed,
                      bool random_clock = false);
DiffusionPath grid_bm(const MetricTree& t, double h, double horizon,
                      std::uint64_t seed, bool random_clock = false);

// First time a standard Brownian motion leaves [-1, 1]: survival function
// and an exact sampler (series inversion by bisection). The mean is 1.
double crossing_time_survival(double t);
double sample_crossing_time(Rng& rng);

// P_z(hit x before y) = d(b(z,x,y), y) / d(x, y).
double hitting_prob_formula(const MetricTree& t, TreePoint z, TreePoint x,
                            TreePoint y);
double hitting_prob_estimate(const MetricTree& t, TreePoint z, TreePoint x,
                             TreePoint y, double h, std::size_t replicas,
                             std::uint64_t seed);

// E_x[time to hit y] against the occupation density 2 d(b(z,x,y), y) nu(dz):
// the quadrature integrates the density edge by edge (exact, the integrand
// is piecewise linear between the recorded cut points), the empirical side
// weights each visit to z by 2 h nu(cell(z)) / deg(z).
double occupation_quadrature(const MetricTree& t, const EdgeMeasure& nu,
                             TreePoint x, TreePoint y);
std::pair<double, double> occupation_density_check(const MetricTree& t,
                                                   const EdgeMeasure& nu,
                                                   TreePoint x, TreePoint y,
                                                   double h, std::size_t replicas,
                                                   std::uint64_t seed);

// Visit counts over steps 0..m and the continuum normalization
// L(x) = h l(x) / (deg(x)/2).
struct GridLocalField {
  std::vector<std::uint64_t> occupation;
  std::vector<double> local;
};

GridLocalField grid_local_times(const DiffusionPath& p,
                                const std::vector<std::uint32_t>& degree,
                                std::size_t upto = SIZE_MAX);
GridLocalField grid_local_times(const GridTree& g, const DiffusionPath& p,
                                std::size_t upto = SIZE_MAX);

// Largest jump of L across a single grid edge.
double local_modulus(const GridTree& g, const GridLocalField& f);

// Grid view of the sub-metric-tree spanned by the root and a set of host
// leaves. proj sends every grid vertex to the nearest member on its
// rootward path; member_degree counts neighbors inside the subtree.
struct GridSubtree {
  std::vector<std::uint8_t> member;
  std::vector<std::uint32_t> member_degree;
  std::vector<std::uint32_t> proj;
  double total_length = 0.0;
};

GridSubtree grid_subtree(const GridTree& g,
                         const std::vector<std::uint32_t>& host_leaves);

// Time change onto the subtree: keeps exactly the member steps (so a step
// may repeat a vertex where the host walk left the subtree and came back).
DiffusionPath trace_on_subtree(const DiffusionPath& p, const GridSubtree& sub);

// Pushforward of per-vertex weights through proj.
std::vector<double> project_weights(const GridSubtree& sub,
                                    const std::vector<double>& w);

// Additive functional curve with its clock spelled out ("length" for raw
// length-measure time, "normalized" after dividing time by the total edge
// length).
struct HatCurve {
  std::vector<double> t;
  std::vector<double> value;
  std::string clock;
};

// A-hat along t_grid: integrates grid local times against the site weights,
// linearly interpolated between steps. Requires the constant-step clock and
// t_grid inside the path horizon.
HatCurve a_hat_limit(const DiffusionPath& p,
                     const std::vector<double>& site_weight,
                     const std::vector<std::uint32_t>& site_degree,
                     const std::vector<double>& t_grid, std::string clock_tag);
HatCurve a_hat_limit(const GridTree& g, const DiffusionPath& p,
                     const EdgeMeasure& mu, const std::vector<double>& t_grid);

void write_hat_csv(const HatCurve& c, const std::string& path);
HatCurve read_hat_csv(const std::string& path);

std::uint64_t grid_hash(const GridTree& g);

// Same varint layout as the walk logs, plus raw little-endian doubles for
// the cumulative times when the random clock is on.
void write_diffusion_binary(const DiffusionPath& p, const GridTree& g,
                            const std::string& path);
DiffusionPath read_diffusion_binary(const std::string& path,
                                    std::uint64_t* grid_hash_out = nullptr);

}  // namespace treelab
