#include "treelab/walk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "treelab/stats.hpp"

namespace treelab {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Adjacency adjacency_from_edges(
    std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
  Adjacency g;
  g.offset.assign(n + 1, 0);
  for (const auto& [a, b] : edges) {
    ++g.offset[a + 1];
    ++g.offset[b + 1];
  }
  for (std::size_t v = 0; v < n; ++v) g.offset[v + 1] += g.offset[v];
  g.nbr.resize(2 * edges.size());
  std::vector<std::uint32_t> fill(g.offset.begin(), g.offset.end() - 1);
  for (const auto& [a, b] : edges) {
    g.nbr[fill[a]++] = b;
    g.nbr[fill[b]++] = a;
  }
  return g;
}

Adjacency tree_adjacency(const OrderedTree& t) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(t.size() - 1);
  for (std::uint32_t v = 1; v < t.size(); ++v) edges.emplace_back(t.parent(v), v);
  return adjacency_from_edges(t.size(), edges);
}

Adjacency path_adjacency(std::size_t vertex_count) {
  check(vertex_count >= 1, "path needs at least one vertex");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t v = 1; v < vertex_count; ++v) edges.emplace_back(v - 1, v);
  return adjacency_from_edges(vertex_count, edges);
}

Adjacency with_pendants(const Adjacency& g, std::uint32_t at, std::size_t count) {
  check(at < g.size(), "pendant anchor out of range");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t v = 0; v < g.size(); ++v)
    for (std::uint32_t u : g.neighbors(v))
      if (v < u) edges.emplace_back(v, u);
  for (std::size_t i = 0; i < count; ++i)
    edges.emplace_back(at, static_cast<std::uint32_t>(g.size() + i));
  return adjacency_from_edges(g.size() + count, edges);
}

Adjacency gadget_adjacency(std::size_t l, std::size_t d1, std::size_t d2) {
  check(l >= 1, "gadget path must have positive length");
  check(d1 >= 1 && d2 >= 1, "gadget degrees must be positive");
  auto g = path_adjacency(l + 1);
  g = with_pendants(g, 0, d1 - 1);
  return with_pendants(g, static_cast<std::uint32_t>(l), d2 - 1);
}

WalkPath simulate_srw(const Adjacency& g, std::uint32_t start, std::size_t steps,
                      std::uint64_t seed) {
  check(start < g.size(), "start vertex out of range");
  WalkPath p;
  p.seed = seed;
  p.steps.reserve(steps + 1);
  p.steps.push_back(start);
  Rng rng(seed);
  std::uint32_t at = start;
  for (std::size_t m = 0; m < steps; ++m) {
    const auto nbrs = g.neighbors(at);
    check(!nbrs.empty(), "walk reached an isolated vertex");
    at = nbrs[rng.below(static_cast<std::uint32_t>(nbrs.size()))];
    p.steps.push_back(at);
  }
  return p;
}

WalkPath simulate_srw(const OrderedTree& t, std::size_t steps, std::uint64_t seed) {
  return simulate_srw(tree_adjacency(t), 0, steps, seed);
}

JumpDecomposition project_and_decompose(const WalkPath& p, const DiscreteSubtree& sub) {
  check(!p.steps.empty(), "empty walk");
  check(p.steps[0] < sub.member.size() && sub.member[p.steps[0]],
        "walk must start inside the subtree");

  JumpDecomposition d;
  d.projected.reserve(p.steps.size());
  d.tau.reserve(p.steps.size());
  d.jumps.push_back(p.steps[0]);
  d.clock.push_back(0);
  for (std::size_t m = 0; m < p.steps.size(); ++m) {
    const std::uint32_t x = p.steps[m];
    check(x < sub.phi.size(), "walk leaves the host tree");
    d.projected.push_back(sub.phi[x]);
    if (m > 0 && sub.member[x] && x != d.jumps.back()) {
      d.jumps.push_back(x);
      d.clock.push_back(m);
    }
    d.tau.push_back(static_cast<std::uint32_t>(d.jumps.size() - 1));
  }
  return d;
}

LocalTimeField local_times(const std::vector<std::uint32_t>& jumps,
                           const DiscreteSubtree& sub, std::size_t m) {
  check(!jumps.empty(), "empty jump chain");
  check(m < jumps.size(), "local time horizon beyond the chain");

  LocalTimeField f;
  f.vertices = sub.vertices;
  std::vector<std::uint32_t> index(sub.member.size(), 0xffffffffu);
  for (std::uint32_t i = 0; i < sub.vertices.size(); ++i) index[sub.vertices[i]] = i;

  f.occupation.assign(f.vertices.size(), 0);
  for (std::size_t l = 0; l <= m; ++l) {
    const std::uint32_t v = jumps[l];
    check(v < index.size() && index[v] != 0xffffffffu, "jump chain leaves the subtree");
    ++f.occupation[index[v]];
  }
  f.total_occupation = m + 1;

  f.nu.resize(f.vertices.size());
  f.local.resize(f.vertices.size());
  for (std::size_t i = 0; i < f.vertices.size(); ++i) {
    f.nu[i] = 0.5 * static_cast<double>(sub.degree[f.vertices[i]]);
    f.local[i] = f.nu[i] > 0.0 ? static_cast<double>(f.occupation[i]) / f.nu[i] : 0.0;
  }
  return f;
}

HatClock a_hat(const std::vector<std::uint32_t>& jumps, const DiscreteSubtree& sub,
               const std::vector<std::uint32_t>& mu_counts, std::uint64_t mu_total,
               std::size_t n) {
  check(!jumps.empty(), "empty jump chain");
  check(mu_total > 0, "measure must have positive total");
  check(mu_counts.size() == sub.member.size(), "counts must be host-indexed");

  std::uint64_t deg_lcm = 1;
  for (std::uint32_t v : sub.vertices)
    if (sub.degree[v] > 0) deg_lcm = std::lcm<std::uint64_t>(deg_lcm, sub.degree[v]);

  const auto wide_denom =
      static_cast<unsigned __int128>(mu_total) * deg_lcm;
  if (wide_denom > static_cast<unsigned __int128>(INT64_MAX))
    throw std::overflow_error("clock denominator overflows; coarsen the measure");
  const auto denom = static_cast<std::int64_t>(wide_denom);

  HatClock c;
  c.denom = denom;
  c.ticks.reserve(jumps.size() + 1);
  c.value.reserve(jumps.size() + 1);
  unsigned __int128 acc = 0;
  c.ticks.push_back(0);
  c.value.push_back(0.0);
  for (std::size_t m = 0; m < jumps.size(); ++m) {
    const std::uint32_t v = jumps[m];
    check(v < sub.member.size() && sub.member[v], "jump chain leaves the subtree");
    const std::uint64_t deg = sub.degree[v];
    check(deg > 0, "jump chain visits an isolated vertex");
    const unsigned __int128 term = static_cast<unsigned __int128>(2) * n *
                                   mu_counts[v] * (deg_lcm / deg);
    acc += term;
    if (acc > static_cast<unsigned __int128>(INT64_MAX))
      throw std::overflow_error("clock ticks overflow; shorten the path");
    c.ticks.push_back(static_cast<std::int64_t>(acc));
    c.value.push_back(static_cast<double>(c.ticks.back()) /
                      static_cast<double>(denom));
  }
  return c;
}

std::uint32_t hat_x(const std::vector<std::uint32_t>& jumps,
                    const std::vector<double>& clock, double t) {
  check(!jumps.empty(), "empty jump chain");
  check(clock.size() == jumps.size() + 1, "clock must have one knot per jump plus the origin");
  check(t >= 0.0, "negative time");
  // last m with clock[m] <= t; clock[m] covers J_m on [clock[m], clock[m+1])
  const auto it = std::upper_bound(clock.begin(), clock.end(), t);
  const auto m = static_cast<std::size_t>(it - clock.begin()) - 1;
  return jumps[std::min(m, jumps.size() - 1)];
}

ExitStats exit_time_stats(const OrderedTree& t, std::size_t extra_root_edges,
                          std::size_t replicas, std::uint64_t seed) {
  check(extra_root_edges >= 1, "need at least one exit edge");
  check(replicas >= 1, "need at least one replica");
  const auto g = with_pendants(tree_adjacency(t), 0, extra_root_edges);
  const auto first_pendant = static_cast<std::uint32_t>(t.size());

  ExitStats s;
  s.replicas = replicas;
  Rng rng(seed);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t rep = 0; rep < replicas; ++rep) {
    std::uint32_t at = 0;
    std::uint64_t time = 0;
    while (at < first_pendant) {
      const auto nbrs = g.neighbors(at);
      at = nbrs[rng.below(static_cast<std::uint32_t>(nbrs.size()))];
      ++time;
    }
    const auto x = static_cast<double>(time);
    sum += x;
    sum2 += x * x;
  }
  s.mean = sum / static_cast<double>(replicas);
  s.second_moment = sum2 / static_cast<double>(replicas);
  return s;
}

VisitHistogram visits_before_return(std::size_t path_len, std::size_t d1, std::size_t d2,
                                    std::size_t replicas, std::uint64_t seed) {
  check(replicas >= 1, "need at least one replica");
  const auto g = gadget_adjacency(path_len, d1, d2);
  const auto y = static_cast<std::uint32_t>(path_len);

  VisitHistogram h;
  h.replicas = replicas;
  Rng rng(seed);
  std::uint64_t total = 0;
  for (std::size_t rep = 0; rep < replicas; ++rep) {
    std::uint32_t at = 0;
    std::uint64_t visits = 0;
    do {
      const auto nbrs = g.neighbors(at);
      at = nbrs[rng.below(static_cast<std::uint32_t>(nbrs.size()))];
      if (at == y) ++visits;
    } while (at != 0);
    if (visits >= h.count.size()) h.count.resize(visits + 1, 0);
    ++h.count[visits];
    total += visits;
  }
  h.mean = static_cast<double>(total) / static_cast<double>(replicas);
  return h;
}

TailCurve occupation_tail(std::size_t r, std::size_t n, std::uint32_t x,
                          std::size_t replicas, std::uint64_t seed) {
  check(r >= 1 && n >= 2, "path scale too small");
  check(x <= 1, "tail is tracked at vertex 0 or 1");
  check(replicas >= 1, "need at least one replica");
  const auto g = path_adjacency(r * n + 1);
  const std::size_t horizon = n * n;

  std::vector<std::uint64_t> xi(replicas, 0);
  Rng rng(seed);
  for (std::size_t rep = 0; rep < replicas; ++rep) {
    std::uint32_t at = 0;
    std::uint64_t visits = (at == x) ? 1 : 0;
    for (std::size_t m = 0; m < horizon; ++m) {
      const auto nbrs = g.neighbors(at);
      at = nbrs[rng.below(static_cast<std::uint32_t>(nbrs.size()))];
      if (at == x) ++visits;
    }
    xi[rep] = visits;
  }

  TailCurve curve;
  std::vector<double> log_t, log_tail;
  for (std::size_t j = 0; j <= 4 * r + 8; ++j) {
    const double t = 0.25 * static_cast<double>(j);
    const double threshold = t * static_cast<double>(n);
    std::size_t hits = 0;
    for (const auto v : xi)
      if (static_cast<double>(v) >= threshold) ++hits;
    const double tail = static_cast<double>(hits) / static_cast<double>(replicas);
    curve.t.push_back(t);
    curve.tail.push_back(tail);
    if (j > 0 && tail > 0.0) {
      log_t.push_back(t);
      log_tail.push_back(std::log(tail));
    }
  }
  curve.fitted_slope =
      log_t.size() >= 2 ? least_squares_line(log_t, log_tail).slope : 0.0;
  return curve;
}

std::uint64_t tree_hash(const OrderedTree& t) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the parent array
  auto mix = [&h](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(t.size());
  for (std::uint32_t v = 1; v < t.size(); ++v) mix(t.parent(v));
  return h;
}

namespace {

void put_varint(std::string& out, std::uint64_t x) {
  while (x >= 0x80) {
    out.push_back(static_cast<char>(0x80 | (x & 0x7f)));
    x >>= 7;
  }
  out.push_back(static_cast<char>(x));
}

std::uint64_t get_varint(const std::string& in, std::size_t& pos) {
  std::uint64_t x = 0;
  int shift = 0;
  while (true) {
    if (pos >= in.size()) throw std::runtime_error("truncated varint stream");
    const auto byte = static_cast<unsigned char>(in[pos++]);
    x |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if (!(byte & 0x80)) return x;
    shift += 7;
    if (shift > 63) throw std::runtime_error("varint too wide");
  }
}

}  // namespace

void write_walk_binary(const WalkPath& p, const OrderedTree& host, const std::string& path) {
  std::string buf;
  buf.reserve(2 * p.steps.size());
  for (const auto v : p.steps) put_varint(buf, v);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));

  nlohmann::json side;
  side["seed"] = p.seed;
  side["tree_hash"] = tree_hash(host);
  side["steps"] = p.steps.size();
  std::ofstream meta(path + ".json");
  if (!meta) throw std::runtime_error("cannot open " + path + ".json for writing");
  meta << side.dump(2) << '\n';
}

WalkPath read_walk_binary(const std::string& path, std::uint64_t* tree_hash_out) {
  std::ifstream meta_in(path + ".json");
  if (!meta_in) throw std::runtime_error("cannot open " + path + ".json");
  nlohmann::json side;
  meta_in >> side;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  WalkPath p;
  p.seed = side.at("seed").get<std::uint64_t>();
  const auto want = side.at("steps").get<std::size_t>();
  std::size_t pos = 0;
  while (pos < buf.size())
    p.steps.push_back(static_cast<std::uint32_t>(get_varint(buf, pos)));
  if (p.steps.size() != want)
    throw std::runtime_error("walk log length disagrees with its sidecar");
  if (tree_hash_out) *tree_hash_out = side.at("tree_hash").get<std::uint64_t>();
  return p;
}

}  // namespace treelab
