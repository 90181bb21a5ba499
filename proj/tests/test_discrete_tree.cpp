#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "treelab/gw.hpp"
#include "treelab/ordered_tree.hpp"
#include "treelab/oracles.hpp"
#include "treelab/rng.hpp"

using namespace treelab;

namespace {

std::map<std::vector<int>, double> law_as_map(
    const std::vector<std::pair<std::vector<int>, oracle::Rat>>& law) {
  std::map<std::vector<int>, double> out;
  for (const auto& [shape, p] : law)
    out[shape] = static_cast<double>(p);
  return out;
}

bool counts_prefix_valid(const std::vector<std::uint32_t>& counts) {
  long long sum = 0;
  for (std::size_t j = 0; j + 1 < counts.size(); ++j) {
    sum += static_cast<long long>(counts[j]) - 1;
    if (sum < 0) return false;
  }
  return true;
}

void all_compositions(std::size_t parts, std::size_t total,
                      std::vector<std::uint32_t>& cur,
                      std::vector<std::vector<std::uint32_t>>& out) {
  if (parts == 1) {
    cur.push_back(static_cast<std::uint32_t>(total));
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (std::size_t c = 0; c <= total; ++c) {
    cur.push_back(static_cast<std::uint32_t>(c));
    all_compositions(parts - 1, total - c, cur, out);
    cur.pop_back();
  }
}

Excursion triangle_excursion(std::size_t n) {
  std::vector<double> v(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    v[i] = std::min(t, 1.0 - t);
  }
  return Excursion::from_values(std::move(v));
}

}  // namespace

TEST_CASE("contour of the two-vertex path matches the padded convention") {
  const auto tree = OrderedTree::from_parents({-1, 0});
  const Contour c = contour_and_depth(tree);
  CHECK(c.depth == std::vector<std::uint32_t>{0, 1, 0, 0, 0});
  CHECK(c.vertex == std::vector<std::uint32_t>{0, 1, 0, 0, 0});
  CHECK(c.tree_size() == 2);
}

TEST_CASE("contour walks a hand-built four-vertex tree") {
  // root 0 with subtrees (1 -> 2) and 3
  const auto tree = OrderedTree::from_parents({-1, 0, 1, 0});
  const Contour c = contour_and_depth(tree);
  CHECK(c.depth == std::vector<std::uint32_t>{0, 1, 2, 1, 0, 1, 0, 0, 0});
  CHECK(c.vertex == std::vector<std::uint32_t>{0, 1, 2, 1, 0, 3, 0, 0, 0});
  CHECK(tree.degree(0) == 2);
  CHECK(tree.degree(1) == 2);
  CHECK(tree.degree(2) == 1);
  CHECK(tree.depth(2) == 2);
}

TEST_CASE("contour and depth reconstruction invert each other on every small tree") {
  const std::size_t catalan[] = {1, 1, 1, 2, 5, 14, 42, 132};
  for (std::size_t n = 1; n <= 7; ++n) {
    const auto trees = enumerate_ordered_trees(n);
    CHECK(trees.size() == catalan[n]);

    const auto reference = oracle::enumerate_parent_trees(n);
    std::set<std::vector<int>> ours, theirs(reference.begin(), reference.end());
    for (const auto& t : trees) ours.insert(t.to_parents());
    CHECK(ours == theirs);

    for (const auto& t : trees) {
      const Contour c = contour_and_depth(t);
      REQUIRE(c.depth.size() == 2 * n + 1);
      CHECK(tree_from_depth(c.depth) == t);
      CHECK(OrderedTree::from_parents(t.to_parents()) == t);
    }
  }
}

TEST_CASE("parent arrays are relabeled to preorder ids") {
  CHECK(OrderedTree::from_parents({2, -1, 1}).to_parents() ==
        std::vector<int>{-1, 0, 1});
  // children keep their id order through the relabeling: root 2 visits its
  // child 0 (whose own child is 3) before its child 1
  const auto t = OrderedTree::from_parents({2, 2, -1, 0});
  CHECK(t.to_parents() == std::vector<int>{-1, 0, 1, 0});
  CHECK(t.depth(2) == 2);
}

TEST_CASE("malformed parent arrays and contours are rejected") {
  CHECK_THROWS(OrderedTree::from_parents({}));
  CHECK_THROWS(OrderedTree::from_parents({-1, -1}));
  CHECK_THROWS(OrderedTree::from_parents({0}));
  CHECK_THROWS(OrderedTree::from_parents({-1, 2, 1}));
  CHECK_THROWS(OrderedTree::from_parents({-1, 5}));

  CHECK_THROWS(tree_from_depth({0, 1, 0, 0}));             // even length
  CHECK_THROWS(tree_from_depth({1, 0, 1, 0, 0}));          // starts off the root
  CHECK_THROWS(tree_from_depth({0, 1, 0, 1, 0}));          // padding leaves the root
  CHECK_THROWS(tree_from_depth({0, 2, 0, 0, 0}));          // jumps two levels
  CHECK_THROWS(tree_from_depth({0, 0xffffffffu, 0, 0, 0}));
  CHECK(tree_from_depth({0, 0, 0}).size() == 1);
}

TEST_CASE("depth selection follows descents and hits grid points exactly") {
  const auto tree = OrderedTree::from_parents({-1, 0, 1, 0});
  const Contour c = contour_and_depth(tree);
  CHECK(depth_selection_index(c, 0.0) == 0);
  CHECK(depth_selection_index(c, 1.0) == 8);
  CHECK(depth_selection_index(c, 0.25) == 2);   // grid aligned
  CHECK(depth_selection_index(c, 0.17) == 2);   // ascent, ceiling wins
  CHECK(depth_selection_index(c, 0.30) == 2);   // descent, floor wins
  CHECK(select_vertex(c, 0.55) == 3);
  CHECK(select_vertex(c, 0.80) == 0);
  CHECK_THROWS(depth_selection_index(c, -0.1));
  CHECK_THROWS(depth_selection_index(c, 1.1));
}

TEST_CASE("interval midpoints reproduce the exact selection law on all small trees") {
  for (std::size_t n = 1; n <= 6; ++n) {
    for (const auto& t : enumerate_ordered_trees(n)) {
      const Contour c = contour_and_depth(t);
      std::vector<int> depth(c.depth.begin(), c.depth.end());
      std::vector<int> vertex(c.vertex.begin(), c.vertex.end());
      const auto law = oracle::depth_selection_vertex_law(depth, vertex, n);

      std::vector<std::size_t> hits(n, 0);
      for (std::size_t j = 0; j < 2 * n; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(2 * n);
        ++hits[select_vertex(c, u)];
      }
      for (std::uint32_t v = 0; v < n; ++v)
        CHECK(oracle::Rat(hits[v], 2 * n) == law[v]);
    }
  }
}

TEST_CASE("random selection times land with the advertised frequencies") {
  const auto tree = OrderedTree::from_parents({-1, 0, 1, 1, 0});
  const Contour c = contour_and_depth(tree);
  std::vector<int> depth(c.depth.begin(), c.depth.end());
  std::vector<int> vertex(c.vertex.begin(), c.vertex.end());
  const auto law = oracle::depth_selection_vertex_law(depth, vertex, tree.size());

  Rng rng(9101);
  const std::size_t samples = 120000;
  std::vector<std::size_t> hits(tree.size(), 0);
  for (std::size_t s = 0; s < samples; ++s) ++hits[select_vertex(c, rng.uniform())];
  for (std::uint32_t v = 0; v < tree.size(); ++v) {
    const double p = static_cast<double>(law[v]);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    CHECK(std::abs(static_cast<double>(hits[v]) / samples - p) < 4.0 * se);
  }
}

TEST_CASE("rotation picks the unique valid start of an offspring sequence") {
  for (std::size_t n = 1; n <= 5; ++n) {
    std::vector<std::vector<std::uint32_t>> seqs;
    std::vector<std::uint32_t> cur;
    all_compositions(n, n - 1, cur, seqs);
    for (const auto& counts : seqs) {
      const std::size_t r = lukasiewicz_rotation(counts);
      std::size_t valid = 0;
      for (std::size_t s = 0; s < n; ++s) {
        auto rotated = counts;
        std::rotate(rotated.begin(), rotated.begin() + static_cast<std::ptrdiff_t>(s),
                    rotated.end());
        if (counts_prefix_valid(rotated)) {
          ++valid;
          CHECK(s == r);
          CHECK(tree_from_offspring_counts(rotated).size() == n);
        }
      }
      CHECK(valid == 1);
    }
  }
  CHECK_THROWS(lukasiewicz_rotation({1, 1}));  // sums to size, not size-1
}

TEST_CASE("conditioned sampling matches the exact law for each offspring family") {
  struct Case {
    const char* spec;
    std::size_t n;
    std::size_t samples;
    std::uint64_t seed;
    std::vector<oracle::Rat> weights;
  };
  const std::vector<Case> cases = {
      {"geometric:0.5", 4, 40000, 501, oracle::geometric_weights(oracle::Rat(1, 2), 3)},
      {"geometric:0.25", 4, 15000, 502, oracle::geometric_weights(oracle::Rat(1, 4), 3)},
      {"poisson:1.0", 3, 30000, 503, oracle::poisson_weights(2)},
      {"poisson:2.5", 5, 40000, 504, oracle::poisson_weights(4)},
      {"table:0.25,0.5,0.25", 5, 40000, 505,
       {oracle::Rat(1, 4), oracle::Rat(1, 2), oracle::Rat(1, 4)}},
  };

  for (const auto& c : cases) {
    CAPTURE(c.spec);
    const auto spec = OffspringSpec::parse(c.spec);
    const auto law = law_as_map(oracle::conditioned_gw_law(c.weights, c.n));
    Rng rng(c.seed);
    std::map<std::vector<int>, std::size_t> freq;
    for (std::size_t s = 0; s < c.samples; ++s) {
      const auto tree = sample_gw_conditioned(spec, c.n, rng);
      REQUIRE(tree.size() == c.n);
      ++freq[tree.to_parents()];
    }
    double total_law = 0.0;
    for (const auto& [shape, p] : law) {
      total_law += p;
      const double observed =
          static_cast<double>(freq.count(shape) ? freq.at(shape) : 0) /
          static_cast<double>(c.samples);
      const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(c.samples));
      CHECK(std::abs(observed - p) < 4.0 * se + 1e-12);
    }
    CHECK(total_law == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& [shape, count] : freq) CHECK(law.count(shape) == 1);
  }
}

TEST_CASE("sampling is reproducible and validates its inputs") {
  const auto spec = OffspringSpec::parse("geometric:0.5");
  Rng a(7), b(7);
  for (int i = 0; i < 5; ++i)
    CHECK(sample_gw_conditioned(spec, 30, a) == sample_gw_conditioned(spec, 30, b));

  CHECK(sample_gw_conditioned(spec, 1, a).size() == 1);
  CHECK(sample_gw_conditioned(OffspringSpec::parse("poisson:1.0"), 2, a).size() == 2);

  CHECK_THROWS(OffspringSpec::parse("geometric:1.5"));
  CHECK_THROWS(OffspringSpec::parse("geometric:0.2,0.3"));
  CHECK_THROWS(OffspringSpec::parse("poisson:-1"));
  CHECK_THROWS(OffspringSpec::parse("table:0.5"));
  CHECK_THROWS(OffspringSpec::parse("table:-1,2"));
  CHECK_THROWS(OffspringSpec::parse("uniform:3"));
  CHECK_THROWS(OffspringSpec::parse("poisson"));
  CHECK(OffspringSpec::parse("table:2,6").table == std::vector<double>{0.25, 0.75});
  CHECK(OffspringSpec::parse("geometric:0.5").describe() == "geometric:0.5");
}

TEST_CASE("the rejection sampler reports an exhausted budget") {
  const auto spec = OffspringSpec::parse("table:0,1");
  Rng rng(11);
  CHECK_THROWS_WITH(
      sample_gw_conditioned(spec, 3, rng, 50),
      "offspring rejection sampler gave up after 50 attempts "
      "(total progeny 3 may be unreachable)");
}

TEST_CASE("reduced subtrees carry projections, degrees and depth gaps") {
  // two chains from the root: 0-1-2-3 and 0-4-5
  const auto tree = OrderedTree::from_parents({-1, 0, 1, 2, 0, 4});

  SUBCASE("one chosen vertex keeps its whole root path") {
    const auto sub = reduced_subtree(tree, {3});
    CHECK(sub.vertices == std::vector<std::uint32_t>{0, 1, 2, 3});
    CHECK(sub.edge_count == 3);
    CHECK(sub.phi[4] == 0);
    CHECK(sub.phi[5] == 0);
    CHECK(sub.phi[2] == 2);
    CHECK(sub.delta == 2);  // vertex 5 sits two levels off its projection
    CHECK(sub.degree[0] == 1);
    CHECK(sub.degree[1] == 2);
    CHECK(sub.degree[3] == 1);

    const auto nu = stationary_measure(sub);
    CHECK(nu.mass == std::vector<double>{0.5, 1.0, 1.0, 0.5});
    CHECK(nu.total() == doctest::Approx(3.0));

    const auto mu = pushforward_measure(uniform_vertex_measure(tree), sub);
    CHECK(mu.support == sub.vertices);
    CHECK(mu.mass[0] == doctest::Approx(0.5));
    CHECK(mu.mass[1] == doctest::Approx(1.0 / 6.0));
    CHECK(mu.total() == doctest::Approx(1.0));

    const auto counts = pushforward_counts(tree, sub);
    CHECK(counts[0] == 3);
    CHECK(counts[1] == 1);
    CHECK(counts[4] == 0);
    std::size_t sum = 0;
    for (auto k : counts) sum += k;
    CHECK(sum == tree.size());
  }

  SUBCASE("both tips give back the full tree") {
    const auto sub = reduced_subtree(tree, {3, 5});
    CHECK(sub.vertices.size() == tree.size());
    CHECK(sub.delta == 0);
    CHECK(sub.edge_count == 5);
    CHECK(sub.degree[0] == 2);
  }

  SUBCASE("no chosen vertices collapse everything to the root") {
    const auto sub = reduced_subtree(tree, {});
    CHECK(sub.vertices == std::vector<std::uint32_t>{0});
    CHECK(sub.edge_count == 0);
    CHECK(sub.delta == 3);
  }

  CHECK_THROWS(reduced_subtree(tree, {17}));
}

TEST_CASE("tree json io round trips") {
  const auto tree = OrderedTree::from_parents({-1, 0, 1, 1, 0, 4, 4});
  const std::string path = "tree_io_test.json";
  write_tree_json(tree, path);
  CHECK(read_tree_json(path) == tree);
  std::remove(path.c_str());
  CHECK_THROWS(read_tree_json("no_such_tree.json"));
}

TEST_CASE("the excursion quantizer tracks its target") {
  const auto target = triangle_excursion(64);

  auto sup_error = [&](std::size_t n) {
    const auto tree = quantize_excursion_tree(target, n);
    REQUIRE(tree.size() == n);
    const Contour c = contour_and_depth(tree);
    const std::size_t steps = 2 * (n - 1);
    const double scale = std::sqrt(static_cast<double>(n));
    double worst = 0.0;
    for (std::size_t i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(steps);
      worst = std::max(worst, std::abs(static_cast<double>(c.depth[i]) / scale -
                                       target.pl_value(t)));
    }
    return worst;
  };

  const double e25 = sup_error(25);
  const double e400 = sup_error(400);
  CHECK(e400 < e25);
  CHECK(e400 <= 0.15);

  CHECK(quantize_excursion_tree(target, 2) == OrderedTree::from_parents({-1, 0}));
  CHECK(quantize_excursion_tree(target, 50) == quantize_excursion_tree(target, 50));
}
