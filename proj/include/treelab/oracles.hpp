#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <utility>
#include <vector>

// Exact reference computations used to pin expected values in tests.
// Everything here is deliberately independent of the simulation modules:
// trees are plain parent vectors, chains are dense rational matrices, and
// enumeration goes through balanced sequences rather than the contour code
// under test.

namespace treelab::oracle {

using Rat = boost::multiprecision::cpp_rational;
using Adjacency = std::vector<std::vector<std::size_t>>;

// Dense row-stochastic chain with exact rational entries.
class ChainOracle {
 public:
  explicit ChainOracle(std::vector<std::vector<Rat>> rows);

  std::size_t size() const { return p_.size(); }

  // E_start[ time to hit `targets` ]; zero if start is a target.
  Rat expected_hitting_time(std::size_t start,
                            const std::vector<std::size_t>& targets) const;

  // E_start[ (time to hit `targets`)^2 ].
  Rat hitting_time_second_moment(std::size_t start,
                                 const std::vector<std::size_t>& targets) const;

  // P_start[ hit `a` before `b` ]; both sets absorbing.
  Rat hitting_probability(std::size_t start, const std::vector<std::size_t>& a,
                          const std::vector<std::size_t>& b) const;

 private:
  std::vector<std::vector<Rat>> p_;
};

// Simple random walk on an undirected graph.
ChainOracle srw_chain(const Adjacency& adj);

// All ordered rooted trees on n vertices as parent vectors (parent[0] = -1,
// vertices in depth-first order, children kept in planted order).
std::vector<std::vector<int>> enumerate_parent_trees(std::size_t n);

Adjacency tree_adjacency(const std::vector<int>& parent);

int tree_height(const std::vector<int>& parent);

// Attach `d` pendant vertices at vertex `at`; pendants take ids n..n+d-1.
Adjacency attach_pendants(Adjacency adj, std::size_t at, std::size_t d);

// Closed forms for the mean exit time and the second-moment bound of the
// walk started at the root of a tree with d extra root pendants.
Rat alpha_closed_form(std::size_t tree_size, std::size_t d);
Rat beta_closed_form_bound(std::size_t tree_size, std::size_t d, int height);

// Crossing gadget: path x = v_0, ..., v_L = y with extra pendants so that
// deg(x) = d1 and deg(y) = d2.
struct Gadget {
  Adjacency adj;
  std::size_t x = 0;
  std::size_t y = 0;
};
Gadget crossing_gadget(std::size_t l, std::size_t d1, std::size_t d2);

// Law of N = number of visits to y before the walk from x first returns
// to x. pk[k-1] = P(N = k) for k = 1..kmax.
struct VisitLaw {
  Rat p0;
  std::vector<Rat> pk;
  Rat mean;  // E[N]
};
VisitLaw visit_law_closed_form(std::size_t l, std::size_t d1, std::size_t d2,
                               std::size_t kmax);
VisitLaw visit_law_from_chain(std::size_t l, std::size_t d1, std::size_t d2,
                              std::size_t kmax);

// Conditioned Galton-Watson law over ordered shapes with n vertices.
// `weights` are rational offspring weights q(0), q(1), ...; any geometric
// tilt q(k) -> q(k) t^k leaves the conditioned law unchanged, which is what
// makes Poisson(1) (q(k) = 1/k!) exactly representable.
std::vector<std::pair<std::vector<int>, Rat>> conditioned_gw_law(
    const std::vector<Rat>& weights, std::size_t n);

// Offspring weight tables for the two built-in laws.
std::vector<Rat> geometric_weights(const Rat& q, std::size_t kmax);
std::vector<Rat> poisson_weights(std::size_t kmax);

// Law of the vertex picked by the depth-selection rule, computed exactly
// from a padded depth/vertex contour pair: interval (j, j+1)/2n contributes
// mass 1/2n to vertex[j] when depth[j] >= depth[j+1], else to vertex[j+1].
std::vector<Rat> depth_selection_vertex_law(const std::vector<int>& depth,
                                            const std::vector<int>& vertex,
                                            std::size_t n_vertices);

}  // namespace treelab::oracle
