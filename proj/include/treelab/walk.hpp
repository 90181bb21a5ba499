#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "treelab/ordered_tree.hpp"
#include "treelab/rng.hpp"

namespace treelab {

// CSR neighbor lists of an undirected graph
struct Adjacency {
  std::vector<std::uint32_t> offset;  // size n+1
  std::vector<std::uint32_t> nbr;

  std::size_t size() const { return offset.size() - 1; }
  std::uint32_t degree(std::uint32_t v) const { return offset[v + 1] - offset[v]; }
  std::span<const std::uint32_t> neighbors(std::uint32_t v) const {
    return {nbr.data() + offset[v], nbr.data() + offset[v + 1]};
  }
};

Adjacency adjacency_from_edges(
    std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);
Adjacency tree_adjacency(const OrderedTree& t);
Adjacency path_adjacency(std::size_t vertex_count);
// `count` extra pendant vertices attached at `at`, ids appended at the end
Adjacency with_pendants(const Adjacency& g, std::uint32_t at, std::size_t count);
// path x = 0, ..., y = l with pendants making deg(x) = d1 and deg(y) = d2
Adjacency gadget_adjacency(std::size_t l, std::size_t d1, std::size_t d2);

struct WalkPath {
  std::vector<std::uint32_t> steps;  // X_0..X_M
  std::uint64_t seed = 0;
};

WalkPath simulate_srw(const Adjacency& g, std::uint32_t start, std::size_t steps,
                      std::uint64_t seed);
WalkPath simulate_srw(const OrderedTree& t, std::size_t steps, std::uint64_t seed);

// crossing decomposition of the projected walk: J is the jump chain, A the
// crossing clock (strictly increasing, final incomplete crossing dropped),
// tau(m) the index of the last crossing completed by time m
struct JumpDecomposition {
  std::vector<std::uint32_t> jumps;      // J_0..J_L, host vertex ids
  std::vector<std::uint64_t> clock;      // A_0..A_L
  std::vector<std::uint32_t> tau;        // tau(0)..tau(M)
  std::vector<std::uint32_t> projected;  // phi(X_m) for every step
};

JumpDecomposition project_and_decompose(const WalkPath& p, const DiscreteSubtree& sub);

struct LocalTimeField {
  std::vector<std::uint32_t> vertices;     // subtree vertices, host ids
  std::vector<std::uint64_t> occupation;   // visit counts of J_0..J_m
  std::vector<double> nu;                  // deg/2 within the subtree
  std::vector<double> local;               // occupation / nu
  std::uint64_t total_occupation = 0;      // always m + 1
};

LocalTimeField local_times(const std::vector<std::uint32_t>& jumps,
                           const DiscreteSubtree& sub, std::size_t m);

// vertex-wait clock: value[m] = ticks[m] / denom with integer ticks, so the
// two defining formulas can be compared without rounding.  Increments are
// 2 n mu({J_m}) / deg(J_m) with mu({x}) = mu_counts[x] / mu_total.
struct HatClock {
  std::vector<std::int64_t> ticks;
  std::int64_t denom = 1;
  std::vector<double> value;
};

HatClock a_hat(const std::vector<std::uint32_t>& jumps, const DiscreteSubtree& sub,
               const std::vector<std::uint32_t>& mu_counts, std::uint64_t mu_total,
               std::size_t n);

// position at continuous time t: the last jump state whose clock reading is
// at most t, clamped to the final state beyond the last knot
std::uint32_t hat_x(const std::vector<std::uint32_t>& jumps,
                    const std::vector<double>& clock, double t);

struct ExitStats {
  double mean = 0.0;
  double second_moment = 0.0;
  std::size_t replicas = 0;
};

// exit time from t of the walk on t with extra pendant edges at the root
ExitStats exit_time_stats(const OrderedTree& t, std::size_t extra_root_edges,
                          std::size_t replicas, std::uint64_t seed);

struct VisitHistogram {
  std::vector<std::uint64_t> count;  // count[k] = replicas with exactly k visits
  std::size_t replicas = 0;
  double mean = 0.0;
};

// visits to y before the walk from x first returns to x, on the gadget graph
VisitHistogram visits_before_return(std::size_t path_len, std::size_t d1, std::size_t d2,
                                    std::size_t replicas, std::uint64_t seed);

struct TailCurve {
  std::vector<double> t;
  std::vector<double> tail;  // P(visits to x within n^2 steps >= t n)
  double fitted_slope = 0.0;
};

TailCurve occupation_tail(std::size_t r, std::size_t n, std::uint32_t x,
                          std::size_t replicas, std::uint64_t seed);

std::uint64_t tree_hash(const OrderedTree& t);
void write_walk_binary(const WalkPath& p, const OrderedTree& host, const std::string& path);
WalkPath read_walk_binary(const std::string& path, std::uint64_t* tree_hash_out = nullptr);

}  // namespace treelab
