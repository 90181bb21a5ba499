#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "treelab/diffusion.hpp"
#include "treelab/oracles.hpp"
#include "treelab/stats.hpp"

using namespace treelab;

namespace {

// peaks of height 0.5 at t = 1/4 and 3/4, valley of 0.25 at t = 1/2
Excursion two_peak() {
  return Excursion::from_values({0.0, 0.25, 0.5, 0.375, 0.25, 0.375, 0.5, 0.25, 0.0});
}

MetricTree two_peak_tree() {
  return reduced_tree_from_excursion(two_peak(), {0.25, 0.75}).tree;
}

// one edge of length 1
MetricTree unit_segment() {
  const auto w =
      Excursion::from_values({0.0, 0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25, 0.0});
  return reduced_tree_from_excursion(w, {0.5}).tree;
}

// rounds every edge to a positive multiple of h so grids align exactly
MetricTree snap_lengths(MetricTree t, double h) {
  t.total_len = 0.0;
  for (std::uint32_t v = 1; v < t.shape.size(); ++v) {
    t.edge_len[v] =
        h * static_cast<double>(std::max<long long>(1, std::llround(t.edge_len[v] / h)));
    t.total_len += t.edge_len[v];
    t.height[v] = t.height[t.shape.parent(v)] + t.edge_len[v];
  }
  return t;
}

oracle::Adjacency oracle_adjacency(const GridTree& g) {
  oracle::Adjacency adj(g.size());
  for (std::uint32_t v = 0; v < g.size(); ++v)
    for (const auto u : g.adj.neighbors(v)) adj[v].push_back(u);
  return adj;
}

std::vector<std::uint32_t> collapse(const std::vector<std::uint32_t>& xs) {
  std::vector<std::uint32_t> out;
  for (const auto x : xs)
    if (out.empty() || out.back() != x) out.push_back(x);
  return out;
}

std::vector<double> sample_exit_times(const MetricTree& t, double h, std::size_t R,
                                      std::uint64_t seed) {
  const auto g = build_grid(t, h);
  std::vector<double> out;
  out.reserve(R);
  for (std::size_t r = 0; r < R; ++r) {
    Rng rng(derive_seed(seed, r));
    std::uint32_t pos = 0;
    std::uint64_t n = 0;
    while (pos != 1) {
      pos = g.adj.neighbors(pos)[rng.below(g.adj.degree(pos))];
      ++n;
    }
    out.push_back(static_cast<double>(n) * h * h);
  }
  return out;
}

}  // namespace

TEST_CASE("grid construction matches the host layout") {
  const auto t = two_peak_tree();
  REQUIRE(t.shape.size() == 4);
  const auto g = build_grid(t, 0.05);

  CHECK(g.size() == 4 + 3 * 4);
  for (std::uint32_t v = 1; v < 4; ++v) {
    CHECK(g.cells[v] == 5);
    CHECK(g.spacing[v] == doctest::Approx(0.05).epsilon(1e-14));
  }

  const auto branch = t.shape.parent(t.leaves[0]);
  CHECK(branch == t.shape.parent(t.leaves[1]));
  std::size_t deg1 = 0, deg2 = 0, deg3 = 0;
  for (std::uint32_t v = 0; v < g.size(); ++v) {
    const auto d = g.adj.degree(v);
    if (d == 1) ++deg1;
    if (d == 2) ++deg2;
    if (d == 3) ++deg3;
  }
  CHECK(deg1 == 3);  // root and the two leaves
  CHECK(deg2 == 12);
  CHECK(deg3 == 1);
  CHECK(g.adj.degree(branch) == 3);

  // walking rootward from a leaf crosses both edges cell by cell
  std::uint32_t pos = t.leaves[0];
  std::size_t hops = 0;
  while (pos != 0) {
    pos = g.up[pos];
    ++hops;
  }
  CHECK(hops == 10);

  for (std::uint32_t gid = 0; gid < g.size(); ++gid)
    CHECK(grid_locate(g, grid_point(g, gid)) == gid);

  CHECK_THROWS_AS(grid_locate(g, TreePoint{t.leaves[0], 0.012}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_grid(t, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(t, 0.0), std::invalid_argument);

  const auto coarse = build_grid(t, 0.25);
  CHECK(coarse.size() == 4);
  CHECK(coarse.adj.degree(branch) == 3);

  const auto lonely = reduced_tree_from_excursion(two_peak(), {}).tree;
  CHECK_THROWS_AS(build_grid(lonely, 0.1), std::invalid_argument);
}

TEST_CASE("cell weights conserve mass and split the length measure") {
  const auto t = two_peak_tree();
  const auto g = build_grid(t, 0.05);
  const auto branch = t.shape.parent(t.leaves[0]);

  const auto lm = length_measure(t);
  const auto w = measure_cell_weights(g, lm);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w[0] == doctest::Approx(0.025 / 0.75).epsilon(1e-12));
  CHECK(w[branch] == doctest::Approx(0.075 / 0.75).epsilon(1e-12));
  CHECK(w[t.leaves[0]] == doctest::Approx(0.025 / 0.75).epsilon(1e-12));
  CHECK(w[g.interior_base[t.leaves[0]]] == doctest::Approx(0.05 / 0.75).epsilon(1e-12));

  auto mixed = length_measure(t);
  add_atom(t, mixed, vertex_point(t, branch), 0.3);
  add_atom(t, mixed, TreePoint{t.leaves[1], 0.1}, 0.2);
  const auto w2 = measure_cell_weights(g, mixed);
  CHECK(std::accumulate(w2.begin(), w2.end(), 0.0) ==
        doctest::Approx(mixed.total(t)).epsilon(1e-12));
  CHECK(w2[branch] - w[branch] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(w2[g.interior_base[t.leaves[1]] + 1] - w[g.interior_base[t.leaves[1]] + 1] ==
        doctest::Approx(0.2).epsilon(1e-12));

  CHECK_THROWS_AS(measure_cell_weights(g, empty_measure(unit_segment())),
                  std::invalid_argument);
}

TEST_CASE("segment exit time matches the chain oracle exactly and empirically") {
  const auto t = unit_segment();
  const auto g = build_grid(t, 0.1);
  REQUIRE(g.size() == 11);

  const auto chain = oracle::srw_chain(oracle_adjacency(g));
  const auto mean = chain.expected_hitting_time(0, {1});
  CHECK(mean == oracle::Rat(100));
  const auto m2 = chain.hitting_time_second_moment(0, {1});
  const double sd = std::sqrt((m2 - mean * mean).convert_to<double>());

  const std::size_t R = 20000;
  const auto [emp, quad] =
      occupation_density_check(t, length_measure(t), TreePoint{0, 0.0},
                               vertex_point(t, 1), 0.1, R, 20260822);
  CHECK(quad == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(emp - 1.0) <= 3.0 * sd * 0.01 / std::sqrt(static_cast<double>(R)));
}

TEST_CASE("gamblers ruin on the grid matches the exact law") {
  const auto t = unit_segment();
  const auto g = build_grid(t, 0.1);
  const TreePoint z{1, 0.3}, x = vertex_point(t, 1), y{0, 0.0};

  CHECK(hitting_prob_formula(t, z, x, y) == doctest::Approx(0.3).epsilon(1e-14));

  const auto chain = oracle::srw_chain(oracle_adjacency(g));
  const auto gz = grid_locate(g, z);
  CHECK(chain.hitting_probability(gz, {1}, {0}) == oracle::Rat(3, 10));

  const double emp = hitting_prob_estimate(t, z, x, y, 0.1, 100000, 99);
  CHECK(std::abs(emp - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / 100000.0));
}

TEST_CASE("exit statistics agree under grid refinement") {
  const auto t = unit_segment();
  const auto a = mean_se(sample_exit_times(t, 0.1, 4000, 11));
  const auto b = mean_se(sample_exit_times(t, 0.05, 4000, 12));
  CHECK(std::abs(a.mean - 1.0) <= 3.0 * a.se);
  CHECK(std::abs(b.mean - 1.0) <= 3.0 * b.se);
  CHECK(std::abs(a.mean - b.mean) <= 3.0 * std::hypot(a.se, b.se));
}

TEST_CASE("grid walks are seeded deterministically and step along edges") {
  const auto t = two_peak_tree();
  const auto g = build_grid(t, 0.05);
  const auto p = grid_bm(g, 5.0, 42);
  const auto q = grid_bm(g, 5.0, 42);
  CHECK(p.steps == q.steps);
  CHECK(p.steps.front() == 0);
  CHECK(p.elapsed() >= 5.0);
  CHECK(p.elapsed() < 5.0 + 2.0 * p.step_time);
  CHECK(grid_bm(g, 5.0, 43).steps != p.steps);

  for (std::size_t m = 0; m + 1 < p.steps.size(); ++m) {
    const auto nbrs = g.adj.neighbors(p.steps[m]);
    CHECK(std::find(nbrs.begin(), nbrs.end(), p.steps[m + 1]) != nbrs.end());
  }

  CHECK(grid_bm(t, 0.05, 0.0, 7).steps.size() == 1);
  CHECK(grid_bm(t, 0.05, 1.0, 7).steps.size() == grid_bm(g, 1.0, 7).steps.size());
}

TEST_CASE("crossing time series agree and the sampler has mean one") {
  CHECK(crossing_time_survival(0.0) == 1.0);
  CHECK(crossing_time_survival(-1.0) == 1.0);
  // both series meet at the switch point
  CHECK(std::abs(crossing_time_survival(0.3) - crossing_time_survival(0.2999999999)) <
        1e-9);
  CHECK(crossing_time_survival(0.05) > crossing_time_survival(0.1));
  CHECK(crossing_time_survival(0.1) > crossing_time_survival(0.3));
  CHECK(crossing_time_survival(0.3) > crossing_time_survival(1.0));
  CHECK(crossing_time_survival(1.0) > crossing_time_survival(3.0));
  CHECK(crossing_time_survival(30.0) < 1e-10);

  Rng rng(2027);
  std::vector<double> draws(20000);
  for (auto& d : draws) {
    d = sample_crossing_time(rng);
    CHECK(d > 0.0);
  }
  const auto s = mean_se(draws);
  CHECK(std::abs(s.mean - 1.0) <= 3.0 * s.se);

  Rng r1(5), r2(5);
  for (int i = 0; i < 5; ++i)
    CHECK(sample_crossing_time(r1) == sample_crossing_time(r2));
}

TEST_CASE("the random clock covers the horizon with unit-mean holdings") {
  const auto t = two_peak_tree();
  const auto g = build_grid(t, 0.05);
  const auto p = grid_bm(g, 2.0, 31, true);
  REQUIRE(p.random_clock);
  REQUIRE(p.times.size() == p.steps.size() + 1);
  CHECK(p.times.front() == 0.0);
  CHECK(p.times.back() >= 2.0);
  CHECK(p.elapsed() == p.times.back());
  for (std::size_t m = 0; m + 1 < p.times.size(); ++m) CHECK(p.times[m] < p.times[m + 1]);
  for (std::size_t m = 0; m + 1 < p.steps.size(); ++m) {
    const auto nbrs = g.adj.neighbors(p.steps[m]);
    CHECK(std::find(nbrs.begin(), nbrs.end(), p.steps[m + 1]) != nbrs.end());
  }
  const auto n = static_cast<double>(p.steps.size());
  CHECK(std::abs(p.times.back() / n - p.step_time) <=
        5.0 * p.step_time * 0.8165 / std::sqrt(n));
}

TEST_CASE("hitting probabilities match the formula, the chain, and the walk") {
  const auto t = two_peak_tree();
  const double h = 0.02;
  const auto g = build_grid(t, h);
  const auto x = vertex_point(t, t.leaves[0]);
  const auto y = vertex_point(t, t.leaves[1]);
  const TreePoint root{0, 0.0};

  CHECK(hitting_prob_formula(t, root, x, y) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(hitting_prob_formula(t, x, x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hitting_prob_formula(t, y, x, y) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(hitting_prob_formula(t, root, x, x), std::invalid_argument);

  const auto chain = oracle::srw_chain(oracle_adjacency(g));
  const auto gx = grid_locate(g, x), gy = grid_locate(g, y);
  CHECK(chain.hitting_probability(0, {gx}, {gy}) == oracle::Rat(1, 2));

  CHECK(hitting_prob_estimate(t, x, x, y, h, 1, 3) == 1.0);
  CHECK(hitting_prob_estimate(t, y, x, y, h, 1, 3) == 0.0);
  CHECK_THROWS_AS(hitting_prob_estimate(t, root, x, x, h, 1, 3), std::invalid_argument);

  const double emp = hitting_prob_estimate(t, root, x, y, h, 100000, 424);
  CHECK(std::abs(emp - 0.5) <= 0.01);

  // a start inside the x edge: the formula and the grid chain coincide exactly
  const auto c = g.cells[t.leaves[0]];
  const TreePoint z{t.leaves[0], 4.0 * g.spacing[t.leaves[0]]};
  const double form = hitting_prob_formula(t, z, x, y);
  const auto exact = chain.hitting_probability(grid_locate(g, z), {gx}, {gy});
  CHECK(exact == oracle::Rat(4 + c, 2 * c));
  CHECK(form == doctest::Approx(exact.convert_to<double>()).epsilon(1e-12));
  const double emp2 = hitting_prob_estimate(t, z, x, y, h, 40000, 425);
  CHECK(std::abs(emp2 - form) <= 3.0 * std::sqrt(form * (1.0 - form) / 40000.0));
}

TEST_CASE("occupation density closed forms and Monte Carlo agree") {
  const auto seg = unit_segment();
  const auto root = TreePoint{0, 0.0};
  const auto tip = vertex_point(seg, 1);

  // atom measures integrate the density pointwise
  auto atom = empty_measure(seg);
  add_atom(seg, atom, TreePoint{1, 0.3}, 0.4);
  CHECK(occupation_quadrature(seg, atom, root, tip) ==
        doctest::Approx(0.56).epsilon(1e-14));
  const auto [aemp, aquad] = occupation_density_check(seg, atom, root, tip, 0.1,
                                                      20000, 5150);
  CHECK(aquad == doctest::Approx(0.56).epsilon(1e-14));
  CHECK(std::abs(aemp - 0.56) <= 0.03);

  // x = y collapses both sides
  const auto [zemp, zquad] =
      occupation_density_check(seg, length_measure(seg), tip, tip, 0.1, 10, 5);
  CHECK(zemp == 0.0);
  CHECK(zquad == 0.0);

  // mixed density plus an atom on the fork
  const auto t = two_peak_tree();
  const auto branch = t.shape.parent(t.leaves[0]);
  auto mixed = length_measure(t);
  add_atom(t, mixed, vertex_point(t, branch), 0.5);
  const auto [memp, mquad] = occupation_density_check(
      t, mixed, TreePoint{0, 0.0}, vertex_point(t, t.leaves[0]), 0.05, 30000, 6021);
  CHECK(mquad == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(std::abs(memp - mquad) <= 0.05 * mquad);

  // the segment at a finer grid, same 5 percent band
  const auto [semp, squad] = occupation_density_check(
      seg, length_measure(seg), root, tip, 0.02, 30000, 6022);
  CHECK(squad == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(semp - squad) <= 0.05 * squad);
}

TEST_CASE("grid local times satisfy the occupation identity exactly") {
  const auto t = two_peak_tree();
  const auto g = build_grid(t, 0.05);
  const auto p = grid_bm(g, 3.0, 1234);

  const auto f = grid_local_times(g, p);
  std::uint64_t visits = 0;
  for (const auto c : f.occupation) visits += c;
  CHECK(visits == p.steps.size());

  double integral = 0.0;
  for (std::uint32_t v = 0; v < g.size(); ++v) {
    CHECK(f.local[v] >= 0.0);
    integral += f.local[v] * 0.5 * static_cast<double>(g.adj.degree(v)) * g.h;
  }
  CHECK(integral ==
        doctest::Approx(static_cast<double>(p.steps.size()) * p.step_time)
            .epsilon(1e-12));

  const auto head = grid_local_times(g, p, 99);
  std::uint64_t head_visits = 0;
  for (const auto c : head.occupation) head_visits += c;
  CHECK(head_visits == 100);
}

TEST_CASE("the local time modulus shrinks under refinement") {
  const auto t = two_peak_tree();
  std::vector<double> coarse, fine;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto gc = build_grid(t, 0.05);
    coarse.push_back(local_modulus(gc, grid_local_times(gc, grid_bm(gc, 2.0, 900 + s))));
    const auto gf = build_grid(t, 0.025);
    fine.push_back(local_modulus(gf, grid_local_times(gf, grid_bm(gf, 2.0, 900 + s))));
  }
  CHECK(median(fine) < median(coarse));
}

TEST_CASE("a hat on the whole tree is linear in the elapsed time") {
  const auto t = two_peak_tree();
  const auto g = build_grid(t, 0.05);
  const auto p = grid_bm(g, 3.0, 77);
  const auto mu = length_measure(t);

  std::vector<double> ts;
  for (int j = 0; j <= 30; ++j) ts.push_back(0.1 * j);
  const auto c = a_hat_limit(g, p, mu, ts);
  CHECK(c.clock == "length");
  CHECK(c.value.front() == 0.0);
  for (std::size_t j = 1; j < ts.size(); ++j) {
    CHECK(c.value[j] == doctest::Approx(ts[j] / 0.75).epsilon(1e-9));
    CHECK(c.value[j] >= c.value[j - 1]);
  }

  CHECK_THROWS_AS(a_hat_limit(g, p, mu, {3.2}), std::invalid_argument);
  CHECK_THROWS_AS(a_hat_limit(g, p, mu, {-0.1}), std::invalid_argument);
  const auto rc = grid_bm(g, 0.5, 8, true);
  CHECK_THROWS_AS(a_hat_limit(g, rc, mu, {0.1}), std::invalid_argument);
}

TEST_CASE("a hat by hand on a pinned path") {
  const auto t = unit_segment();
  const auto g = build_grid(t, 0.1);

  DiffusionPath p;
  p.steps = {0, 2, 0, 2};
  p.h = 0.1;
  p.step_time = 0.01;

  std::vector<double> w(g.size(), 0.0);
  w[0] = 1.0;  // point mass at the root
  std::vector<std::uint32_t> deg(g.size());
  for (std::uint32_t v = 0; v < g.size(); ++v) deg[v] = g.adj.degree(v);

  const auto c = a_hat_limit(p, w, deg, {0.0, 0.005, 0.01, 0.025, 0.04}, "length");
  CHECK(c.value[0] == 0.0);
  CHECK(c.value[1] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(c.value[2] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(c.value[3] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(c.value[4] == doctest::Approx(0.4).epsilon(1e-14));

  auto bad = deg;
  bad[2] = 0;
  CHECK_THROWS_AS(a_hat_limit(p, w, bad, {0.01}, "length"), std::invalid_argument);
  CHECK_THROWS_AS(a_hat_limit(p, std::vector<double>(3, 0.0), deg, {0.01}, "length"),
                  std::invalid_argument);
}

TEST_CASE("grid subtrees mark the spanned segments") {
  const auto t = two_peak_tree();
  const auto g = build_grid(t, 0.05);
  const auto branch = t.shape.parent(t.leaves[0]);

  const auto sub = grid_subtree(g, {t.leaves[0]});
  std::size_t members = 0;
  for (std::uint32_t x = 0; x < g.size(); ++x) {
    if (sub.member[x]) {
      ++members;
      CHECK(sub.proj[x] == x);
    }
  }
  CHECK(members == 11);
  CHECK(sub.total_length == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(sub.member_degree[0] == 1);
  CHECK(sub.member_degree[branch] == 2);
  CHECK(sub.member_degree[t.leaves[0]] == 1);
  CHECK(sub.member[t.leaves[1]] == 0);
  CHECK(sub.proj[t.leaves[1]] == branch);
  CHECK(sub.proj[g.interior_base[t.leaves[1]]] == branch);

  const auto all = grid_subtree(g, {t.leaves[0], t.leaves[1]});
  CHECK(all.total_length == doctest::Approx(0.75).epsilon(1e-14));
  for (std::uint32_t x = 0; x < g.size(); ++x) {
    CHECK(all.member[x] == 1);
    CHECK(all.member_degree[x] == g.adj.degree(x));
    CHECK(all.proj[x] == x);
  }

  CHECK_THROWS_AS(grid_subtree(g, {}), std::invalid_argument);
  CHECK_THROWS_AS(grid_subtree(g, {999}), std::invalid_argument);

  // projected weights keep the total mass
  const auto w = measure_cell_weights(g, length_measure(t));
  const auto pw = project_weights(sub, w);
  CHECK(std::accumulate(pw.begin(), pw.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::uint32_t x = 0; x < g.size(); ++x)
    if (!sub.member[x]) CHECK(pw[x] == 0.0);
}

TEST_CASE("traces keep exactly the member steps and compose") {
  Rng tree_rng(55);
  const auto w = sample_excursion_vervaat(512, tree_rng);
  const auto host = snap_lengths(
      reduced_tree_from_excursion(w, {0.2, 0.45, 0.7, 0.9}).tree, 0.05);
  const auto g = build_grid(host, 0.05);
  const auto& leaves = host.leaves;

  const auto sub1 = grid_subtree(g, {leaves[0]});
  const auto sub2 = grid_subtree(g, {leaves[0], leaves[1]});
  const auto all = grid_subtree(g, leaves);

  const auto p = grid_bm(g, 4.0, 991);
  const auto tr1 = trace_on_subtree(p, sub1);
  const auto tr2 = trace_on_subtree(p, sub2);

  CHECK(trace_on_subtree(p, all).steps == p.steps);

  std::size_t expect = 0;
  for (const auto x : p.steps) expect += sub2.member[x];
  CHECK(tr2.steps.size() == expect);
  for (const auto x : tr2.steps) CHECK(sub2.member[x] == 1);

  // consecutive traced steps are grid neighbors, or repeats at a departure
  for (std::size_t m = 0; m + 1 < tr2.steps.size(); ++m) {
    const auto a = tr2.steps[m], b = tr2.steps[m + 1];
    if (a == b) continue;
    const auto nbrs = g.adj.neighbors(a);
    CHECK(std::find(nbrs.begin(), nbrs.end(), b) != nbrs.end());
  }

  CHECK(trace_on_subtree(tr2, sub1).steps == tr1.steps);

  std::vector<std::uint32_t> projected;
  projected.reserve(p.steps.size());
  for (const auto x : p.steps) projected.push_back(sub2.proj[x]);
  CHECK(collapse(tr2.steps) == collapse(projected));

  const auto prc = grid_bm(g, 1.0, 313, true);
  const auto trc = trace_on_subtree(prc, sub2);
  REQUIRE(trc.times.size() == trc.steps.size() + 1);
  double inside = 0.0;
  for (std::size_t m = 0; m < prc.steps.size(); ++m)
    if (sub2.member[prc.steps[m]]) inside += prc.times[m + 1] - prc.times[m];
  CHECK(trc.times.back() == doctest::Approx(inside).epsilon(1e-12));
}

TEST_CASE("traced hitting probabilities obey the branch formula") {
  const auto t = two_peak_tree();
  const double h = 0.025;
  const auto g = build_grid(t, h);
  const auto branch = t.shape.parent(t.leaves[0]);
  const auto sub = grid_subtree(g, {t.leaves[0]});

  const auto gz = branch;
  const auto gx = t.leaves[0];
  const std::uint32_t gy = 0;
  CHECK(hitting_prob_formula(t, vertex_point(t, branch), vertex_point(t, t.leaves[0]),
                             TreePoint{0, 0.0}) == doctest::Approx(0.5).epsilon(1e-12));

  const std::size_t R = 100000;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < R; ++r) {
    Rng rng(derive_seed(515, r));
    DiffusionPath path;
    path.h = h;
    path.step_time = h * h;
    std::uint32_t pos = gz;
    path.steps.push_back(pos);
    while (pos != gx && pos != gy) {
      pos = g.adj.neighbors(pos)[rng.below(g.adj.degree(pos))];
      path.steps.push_back(pos);
    }
    if (pos == gx) ++hits;
    if (r % 5000 == 0) {
      // the traced path reaches the same endpoint first
      const auto tr = trace_on_subtree(path, sub);
      std::uint32_t first = 0;
      for (const auto s : tr.steps)
        if (s == gx || s == gy) {
          first = s;
          break;
        }
      CHECK(first == pos);
    }
  }
  const double emp = static_cast<double>(hits) / static_cast<double>(R);
  CHECK(std::abs(emp - 0.5) <= 0.015);
  CHECK(std::abs(emp - 0.5) <= 3.0 * std::sqrt(0.25 / static_cast<double>(R)));
}

TEST_CASE("the two a hat routes differ by a vanishing attachment term") {
  const auto t = two_peak_tree();
  const auto leaf = t.leaves[0];

  auto gap_at = [&](double h, std::uint64_t seed) {
    const auto g = build_grid(t, h);
    const auto sub = grid_subtree(g, {leaf});
    auto mu = empty_measure(t);
    mu.density[leaf] = 1.0 / sub.total_length;
    mu.density[t.shape.parent(leaf)] = 1.0 / sub.total_length;
    const auto cw = measure_cell_weights(g, mu);

    const auto p = grid_bm(g, 2.0, seed);
    const auto tr = trace_on_subtree(p, sub);
    const double t_tr = static_cast<double>(tr.steps.size()) * tr.step_time;
    const auto curve = a_hat_limit(tr, cw, sub.member_degree, {t_tr}, "length");

    const auto f = grid_local_times(g, p);
    double restricted = 0.0;
    for (std::uint32_t x = 0; x < g.size(); ++x) restricted += f.local[x] * cw[x];
    return std::abs(curve.value[0] - restricted);
  };

  std::vector<double> coarse, fine;
  for (std::uint64_t s = 0; s < 12; ++s) {
    coarse.push_back(gap_at(0.05, 7100 + s));
    fine.push_back(gap_at(0.025, 7100 + s));
  }
  const double mc = median(coarse), mf = median(fine);
  CHECK(mc > 0.0);
  CHECK(mc <= 5.0 * 0.05);
  CHECK(mf <= 5.0 * 0.025);
  CHECK(mf <= 0.8 * mc);
}

TEST_CASE("a hat approaches the identity as the subtree fills out") {
  Rng tree_rng(40);
  const auto w = sample_excursion_vervaat(2048, tree_rng);
  std::vector<double> picks(16);
  for (auto& u : picks) u = tree_rng.uniform();
  const double h = 0.01;
  const auto host = snap_lengths(reduced_tree_from_excursion(w, picks).tree, h);
  const auto g = build_grid(host, h);
  const auto w_host = measure_cell_weights(g, length_measure(host));

  const std::vector<std::size_t> ks = {2, 4, 8, 16};
  std::vector<GridSubtree> subs;
  std::vector<std::vector<double>> mus;
  for (const auto k : ks) {
    std::vector<std::uint32_t> picked(host.leaves.begin(), host.leaves.begin() + k);
    subs.push_back(grid_subtree(g, picked));
    mus.push_back(project_weights(subs.back(), w_host));
  }

  const double horizon = 8.0 * host.total_len;
  std::vector<std::vector<double>> sups(ks.size());
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = grid_bm(g, horizon, derive_seed(777, s));
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto tr = trace_on_subtree(p, subs[i]);
      const double lambda = subs[i].total_length;
      REQUIRE(tr.elapsed() >= lambda);
      std::vector<double> ts(21);
      for (int j = 0; j <= 20; ++j) ts[j] = lambda * static_cast<double>(j) / 20.0;
      const auto c = a_hat_limit(tr, mus[i], subs[i].member_degree, ts, "length");
      double sup = 0.0;
      for (int j = 0; j <= 20; ++j)
        sup = std::max(sup, std::abs(c.value[j] - static_cast<double>(j) / 20.0));
      sups[i].push_back(sup);
    }
  }

  std::vector<double> med;
  for (auto& v : sups) med.push_back(median(v));
  CHECK(med.back() <= 1e-8);          // the full tree is exact by construction
  CHECK(med.front() > med.back());
  CHECK(trend_nonincreasing(med, 0.01));
}

TEST_CASE("curve and path files round trip") {
  HatCurve c;
  c.t = {0.0, 0.5, 1.0};
  c.value = {0.0, 0.3, 0.9};
  c.clock = "normalized";
  write_hat_csv(c, "diff_curve.csv");
  const auto back = read_hat_csv("diff_curve.csv");
  CHECK(back.t == c.t);
  CHECK(back.value == c.value);
  CHECK(back.clock == c.clock);
  CHECK_THROWS_AS(read_hat_csv("no_such_curve.csv"), std::runtime_error);
  {
    std::ofstream bad("diff_bad.csv");
    bad << "time,value\n0,0\n";
  }
  CHECK_THROWS_AS(read_hat_csv("diff_bad.csv"), std::runtime_error);

  const auto t = two_peak_tree();
  const auto g = build_grid(t, 0.05);
  const auto p = grid_bm(g, 1.0, 5);
  write_diffusion_binary(p, g, "diff_log.bin");
  std::uint64_t hash = 0;
  const auto q = read_diffusion_binary("diff_log.bin", &hash);
  CHECK(q.steps == p.steps);
  CHECK(q.h == p.h);
  CHECK(q.step_time == p.step_time);
  CHECK(q.seed == p.seed);
  CHECK(q.random_clock == false);
  CHECK(hash == grid_hash(g));
  CHECK(grid_hash(build_grid(t, 0.025)) != hash);

  const auto rc = grid_bm(g, 0.2, 6, true);
  write_diffusion_binary(rc, g, "diff_log_rc.bin");
  const auto rcq = read_diffusion_binary("diff_log_rc.bin");
  CHECK(rcq.steps == rc.steps);
  CHECK(rcq.times == rc.times);
  CHECK(rcq.random_clock);

  // a truncated log no longer matches its sidecar
  {
    std::ifstream in("diff_log.bin", std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out("diff_log.bin", std::ios::binary | std::ios::trunc);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()) - 1);
  }
  CHECK_THROWS_AS(read_diffusion_binary("diff_log.bin"), std::runtime_error);
  CHECK_THROWS_AS(read_diffusion_binary("no_such_log.bin"), std::runtime_error);
}
