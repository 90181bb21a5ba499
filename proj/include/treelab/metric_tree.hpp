#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treelab/excursion.hpp"
#include "treelab/ordered_tree.hpp"

namespace treelab {

// A point on a metric tree: the edge is named by its child vertex, and the
// offset is measured from the parent end. The root is {0, 0}. Vertex points
// are canonically {v, edge_len[v]}.
struct TreePoint {
  std::uint32_t edge = 0;
  double offset = 0.0;
};

// Finite rooted tree with edge lengths. Vertices are the root, the labeled
// points zeta_1..zeta_k (one per input point, in input order, possibly
// repeated after merges), and true branch points. edge_len[v] is the length
// of the edge from v up to its parent; edge_len[0] is zero by convention.
struct MetricTree {
  OrderedTree shape = OrderedTree::single_vertex();
  std::vector<double> edge_len;
  std::vector<double> height;          // distance from the root, per vertex
  std::vector<std::uint32_t> leaves;   // vertex of zeta_i per input index
  double total_len = 0.0;
  std::size_t merged_count = 0;        // inputs that landed on existing vertices
};

TreePoint vertex_point(const MetricTree& t, std::uint32_t v);
TreePoint normalize_point(const MetricTree& t, TreePoint p);
double point_height(const MetricTree& t, TreePoint p);
double point_distance(const MetricTree& t, TreePoint p, TreePoint q);
bool same_shape(const MetricTree& a, const MetricTree& b);

// Degrees of unlabeled interior vertices (the true branch points).
std::vector<std::uint32_t> interior_degrees(const MetricTree& t);

// Reduction of the excursion's tree to the span of the points [u_i]: leaf i
// sits at height w(u_i), and pairs meet at height m_w(u_i, u_j). Built by
// sequential insertion; inputs at tree distance below 1e-12 merge.
struct ExcursionReduction {
  MetricTree tree;
  Excursion w;
  std::vector<double> times;                            // u_i per leaf index
  std::vector<std::pair<double, std::uint32_t>> order;  // sorted times + 0/1 sentinels -> vertex
};

ExcursionReduction reduced_tree_from_excursion(const Excursion& w,
                                               const std::vector<double>& u);

// Same construction driven by a discrete tree: picks are host vertices, the
// metric is scale * graph distance. Labeled pass-through vertices follow the
// same conventions as the excursion route, so matching inputs give equal
// ordered shapes.
MetricTree reduced_tree_from_vertices(const OrderedTree& host,
                                      const std::vector<std::uint32_t>& picks,
                                      double scale);

// Projection of [t] onto the reduced tree: inside the bracketing interval
// (t_i, t_j) of sample times (0 and 1 act as root sentinels), the image lies
// at height max(m_w(t,t_i), m_w(t,t_j)) on the root path of the higher side.
TreePoint project_time(const ExcursionReduction& r, double t);
double projection_height(const ExcursionReduction& r, double t);

// sup_t of d([t], projection of [t]); exact for the piecewise-linear
// excursion since the gap is piecewise linear with peaks on the grid.
double projection_gap(const ExcursionReduction& r);

// Measure on a metric tree: a uniform density per unit length on each edge
// plus atoms at (edge, offset). Vertex atoms sit at offset edge_len[v];
// root atoms live on the placeholder edge 0.
struct EdgeMeasure {
  std::vector<double> density;
  std::vector<std::vector<std::pair<double, double>>> atoms;  // offset -> mass
  double total(const MetricTree& t) const;
};

EdgeMeasure empty_measure(const MetricTree& t);
void add_atom(const MetricTree& t, EdgeMeasure& m, TreePoint p, double mass);

// Pushforward of Lebesgue measure on [0,1] through the projection, as atoms
// of mass 1/M at the images of the M cell midpoints.
EdgeMeasure grid_pushforward_measure(const ExcursionReduction& r,
                                     std::size_t M = 10000);

// Normalized length measure: density 1/total_len on every edge.
EdgeMeasure length_measure(const MetricTree& t);

double segment_mass_to_root(const MetricTree& t, const EdgeMeasure& m, TreePoint p);

// Exact Wasserstein-1 distance between equal-mass measures on one tree,
// integrating |net flow| across every edge cross-section.
double tree_w1(const MetricTree& t, const EdgeMeasure& a, const EdgeMeasure& b);

// Per-edge linear rescaling between same-shape trees; vertices map to
// vertices exactly.
TreePoint upsilon_map(const MetricTree& from, const MetricTree& to, TreePoint p);
EdgeMeasure transport_measure(const MetricTree& from, const MetricTree& to,
                              const EdgeMeasure& m);

// Comparison tuple: tree, mass measure, a tree-valued path sampled on a
// uniform time grid of [0, horizon], and a scalar field sampled on the same
// time grid at fixed probe points.
struct TreeTuple {
  MetricTree tree;
  EdgeMeasure mu;
  std::vector<TreePoint> path;
  std::vector<TreePoint> probes;
  std::vector<std::vector<double>> field;  // field[time][probe]
  double horizon = 1.0;
};

// (max edge length gap) + (two-sided transported W1) + (two-sided path sup)
// + (field sup), capped at 1. Shape mismatch returns the cap. The measure
// term uses W1 in place of a Prohorov metric and is reported as such.
double tuple_distance(const TreeTuple& a, const TreeTuple& b);

void write_metric_tree_json(const MetricTree& t, const std::string& path);
MetricTree read_metric_tree_json(const std::string& path);
void write_measure_csv(const EdgeMeasure& m, const std::string& path);
EdgeMeasure read_measure_csv(const std::string& path, std::size_t n_vertices);

}  // namespace treelab
