#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "treelab/metric_tree.hpp"

namespace treelab {

// sorted by index, values nonzero; empty vector is the origin
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;
  bool operator==(const SparseVector&) const = default;
};

double l1_norm(const SparseVector& x);
double l1_distance(const SparseVector& x, const SparseVector& y);
SparseVector sparse_scale(const SparseVector& x, double a);
// a*x + b*y with exact zero entries dropped
SparseVector sparse_axpy(double a, const SparseVector& x, double b, const SparseVector& y);

// sequential isometry into l1: branch added at insertion step i runs along
// coordinate i, so every edge is labeled by the first leaf path covering it
struct TreeEmbedding {
  MetricTree tree;
  std::vector<std::uint32_t> edge_coord;  // per vertex, 0 for the root
  std::vector<SparseVector> vertex_map;
};

TreeEmbedding sequential_embed(const MetricTree& t);
SparseVector embed_point(const TreeEmbedding& emb, TreePoint p);

// finite net of the embedded tree: all vertices plus edge-interior points at
// most `spacing` apart
std::vector<SparseVector> tree_cloud(const TreeEmbedding& emb, double spacing);

// atoms only; fills `masses` parallel to the returned points
std::vector<SparseVector> embed_measure(const TreeEmbedding& emb, const EdgeMeasure& m,
                                        std::vector<double>& masses);

struct EmbeddedTriple {
  std::vector<SparseVector> cloud;
  std::vector<double> mass;                       // atom masses on cloud points
  std::vector<std::vector<SparseVector>> paths;   // empirical path law
  double time_step = 1.0;                         // spacing of path samples
};

// space shrinks by n^{-1/2}, path time runs through n^{3/2} over [0,1];
// output paths are resampled on a uniform grid of out_samples points
EmbeddedTriple theta_rescale(std::size_t n, const EmbeddedTriple& e,
                             std::size_t out_samples = 513);

double hausdorff_l1(const std::vector<SparseVector>& a, const std::vector<SparseVector>& b);

// exact W1 between two atomic measures on a common cloud (Prohorov surrogate,
// reported as such wherever it is printed)
double prohorov_proxy(const std::vector<SparseVector>& cloud, const std::vector<double>& mu,
                      const std::vector<double>& nu);

double path_sup_distance(const std::vector<SparseVector>& p, const std::vector<SparseVector>& q);

void write_cloud_jsonl(const std::vector<SparseVector>& cloud, const std::string& path);
std::vector<SparseVector> read_cloud_jsonl(const std::string& path);
void write_paths_jsonl(const std::vector<std::vector<SparseVector>>& paths,
                       const std::string& path);
std::vector<std::vector<SparseVector>> read_paths_jsonl(const std::string& path);

}  // namespace treelab
