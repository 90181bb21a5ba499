#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treelab/excursion.hpp"
#include "treelab/ordered_tree.hpp"
#include "treelab/rng.hpp"

namespace treelab {

// Offspring law for the conditioned branching sampler. Text forms:
//   "geometric:0.5"      P(k) = (1-q) q^k
//   "poisson:1.0"        P(k) = e^-l l^k / k!
//   "table:0.2,0.5,0.3"  explicit pmf, normalized
struct OffspringSpec {
  enum class Kind { geometric, poisson, table };
  Kind kind = Kind::geometric;
  double param = 0.5;
  std::vector<double> table;

  static OffspringSpec parse(const std::string& text);
  std::string describe() const;
};

// Unique rotation of a count sequence (sum = size-1) that makes every proper
// prefix of the shifted steps c_i - 1 nonnegative.
std::size_t lukasiewicz_rotation(const std::vector<std::uint32_t>& counts);

// Preorder tree whose depth-first offspring sequence is `counts`; the
// sequence must already be valid (as produced by the rotation above).
OrderedTree tree_from_offspring_counts(const std::vector<std::uint32_t>& counts);

// Branching tree conditioned on exactly n vertices. Geometric laws reduce to
// a uniform composition and Poisson laws to a multinomial, both exact and
// parameter-free after conditioning; table laws fall back to rejection with
// at most max_attempts tries.
OrderedTree sample_gw_conditioned(const OffspringSpec& spec, std::size_t n,
                                  Rng& rng, std::size_t max_attempts = 100000);

// Deterministic n-vertex tree tracking a target excursion: a +-1 quantizer
// follows sqrt(n) * w(i / (2n-2)) subject to staying nonnegative and coming
// home, so the rescaled contour converges to w as n grows.
OrderedTree quantize_excursion_tree(const Excursion& target, std::size_t n);

}  // namespace treelab
