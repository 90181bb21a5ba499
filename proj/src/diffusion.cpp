#include "treelab/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace treelab {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::uint32_t step_once(const Adjacency& adj, Rng& rng, std::uint32_t pos) {
  const auto deg = adj.degree(pos);
  return adj.neighbors(pos)[rng.below(deg)];
}

constexpr double kAlignTol = 1e-9;

}  // namespace

GridTree build_grid(const MetricTree& t, double h) {
  check(t.shape.size() >= 2, "grid needs at least one edge");
  check(h > 0.0, "grid spacing must be positive");
  const std::size_t nv = t.shape.size();
  double min_len = std::numeric_limits<double>::infinity();
  for (std::uint32_t v = 1; v < nv; ++v) min_len = std::min(min_len, t.edge_len[v]);
  check(h <= min_len * (1.0 + 1e-12), "grid spacing exceeds the shortest edge");

  GridTree g;
  g.host = t;
  g.h = h;
  g.cells.assign(nv, 0);
  g.spacing.assign(nv, 0.0);
  g.interior_base.assign(nv, 0);

  std::uint32_t next = static_cast<std::uint32_t>(nv);
  for (std::uint32_t v = 1; v < nv; ++v) {
    const auto c = static_cast<std::uint32_t>(
        std::max<long long>(1, std::llround(t.edge_len[v] / h)));
    g.cells[v] = c;
    g.spacing[v] = t.edge_len[v] / static_cast<double>(c);
    g.interior_base[v] = next;
    next += c - 1;
  }

  const std::size_t total = next;
  g.gedge.assign(total, 0);
  g.gindex.assign(total, 0);
  g.up.assign(total, 0);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(total - 1);
  for (std::uint32_t v = 1; v < nv; ++v) {
    const auto c = g.cells[v];
    g.gedge[v] = v;
    g.gindex[v] = c;
    auto gid = [&](std::uint32_t j) -> std::uint32_t {
      if (j == 0) return t.shape.parent(v);
      if (j == c) return v;
      return g.interior_base[v] + j - 1;
    };
    for (std::uint32_t j = 1; j < c; ++j) {
      g.gedge[gid(j)] = v;
      g.gindex[gid(j)] = j;
    }
    for (std::uint32_t j = 0; j < c; ++j) {
      edges.emplace_back(gid(j), gid(j + 1));
      g.up[gid(j + 1)] = gid(j);
    }
  }
  g.adj = adjacency_from_edges(total, edges);
  return g;
}

TreePoint grid_point(const GridTree& g, std::uint32_t gid) {
  check(gid < g.size(), "grid id out of range");
  if (gid < g.host.shape.size()) return vertex_point(g.host, gid);
  const auto v = g.gedge[gid];
  return {v, static_cast<double>(g.gindex[gid]) * g.spacing[v]};
}

std::uint32_t grid_locate(const GridTree& g, TreePoint p) {
  p = normalize_point(g.host, p);
  if (p.edge == 0) return 0;
  const auto v = p.edge;
  const auto c = g.cells[v];
  auto j = std::llround(p.offset / g.spacing[v]);
  j = std::clamp<long long>(j, 0, c);
  const double snapped = static_cast<double>(j) * g.spacing[v];
  check(std::abs(p.offset - snapped) <=
            kAlignTol * std::max(1.0, g.host.edge_len[v]),
        "point is not aligned with the grid");
  if (j == 0) return g.host.shape.parent(v);
  if (j == c) return v;
  return g.interior_base[v] + static_cast<std::uint32_t>(j) - 1;
}

std::vector<double> measure_cell_weights(const GridTree& g, const EdgeMeasure& m) {
  const auto& t = g.host;
  const std::size_t nv = t.shape.size();
  check(m.density.size() == nv && m.atoms.size() == nv,
        "measure does not fit the tree");
  std::vector<double> w(g.size(), 0.0);
  for (const auto& [off, mass] : m.atoms[0]) {
    (void)off;
    w[0] += mass;
  }
  for (std::uint32_t v = 1; v < nv; ++v) {
    const auto c = g.cells[v];
    const double s = g.spacing[v];
    auto gid = [&](std::uint32_t j) -> std::uint32_t {
      if (j == 0) return t.shape.parent(v);
      if (j == c) return v;
      return g.interior_base[v] + j - 1;
    };
    if (m.density[v] != 0.0) {
      const double half = 0.5 * m.density[v] * s;
      w[gid(0)] += half;
      for (std::uint32_t j = 1; j < c; ++j) w[gid(j)] += 2.0 * half;
      w[gid(c)] += half;
    }
    for (const auto& [off, mass] : m.atoms[v]) {
      auto j = std::llround(off / s);
      j = std::clamp<long long>(j, 0, c);
      w[gid(static_cast<std::uint32_t>(j))] += mass;
    }
  }
  return w;
}

DiffusionPath grid_bm(const GridTree& g, double horizon, std::uint64_t seed,
                      bool random_clock) {
  check(horizon >= 0.0, "horizon must be nonnegative");
  DiffusionPath p;
  p.h = g.h;
  p.step_time = g.h * g.h;
  p.seed = seed;
  p.random_clock = random_clock;
  Rng rng(seed);
  std::uint32_t pos = 0;
  if (!random_clock) {
    auto n = static_cast<std::size_t>(std::ceil(horizon / p.step_time));
    if (n == 0) n = 1;
    p.steps.reserve(n);
    p.steps.push_back(pos);
    while (p.steps.size() < n) {
      pos = step_once(g.adj, rng, pos);
      p.steps.push_back(pos);
    }
  } else {
    p.steps.push_back(pos);
    p.times.push_back(0.0);
    double clock = sample_crossing_time(rng) * p.step_time;
    p.times.push_back(clock);
    while (clock < horizon) {
      pos = step_once(g.adj, rng, pos);
      p.steps.push_back(pos);
      clock += sample_crossing_time(rng) * p.step_time;
      p.times.push_back(clock);
    }
  }
  return p;
}

DiffusionPath grid_bm(const MetricTree& t, double h, double horizon,
                      std::uint64_t seed, bool random_clock) {
  return grid_bm(build_grid(t, h), horizon, seed, random_clock);
}

double crossing_time_survival(double t) {
  if (t <= 0.0) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  double s = 0.0;
  if (t >= 0.3) {
    // spectral series, alternating and fast for moderate t
    for (int j = 0; j < 64; ++j) {
      const double odd = 2.0 * j + 1.0;
      const double term = (4.0 / (odd * pi)) * std::exp(-odd * odd * pi * pi * t / 8.0);
      s += (j % 2 == 0) ? term : -term;
      if (term < 1e-18) break;
    }
  } else {
    // reflection series, fast for small t
    const double r = 1.0 / std::sqrt(t);
    auto phi = [](double u) { return 0.5 * std::erfc(-u / 1.4142135623730951); };
    for (int k = -12; k <= 12; ++k) {
      const double term = phi((2.0 * k + 1.0) * r) - phi((2.0 * k - 1.0) * r);
      s += (k % 2 == 0) ? term : -term;
    }
  }
  return std::clamp(s, 0.0, 1.0);
}

double sample_crossing_time(Rng& rng) {
  const double u = rng.uniform_pos();
  double hi = 1.0;
  for (int i = 0; i < 64 && crossing_time_survival(hi) > u; ++i) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (crossing_time_survival(mid) > u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double hitting_prob_formula(const MetricTree& t, TreePoint z, TreePoint x,
                            TreePoint y) {
  const double dxy = point_distance(t, x, y);
  check(dxy > 0.0, "x and y must be distinct");
  return (point_distance(t, z, y) + dxy - point_distance(t, z, x)) / (2.0 * dxy);
}

double hitting_prob_estimate(const MetricTree& t, TreePoint z, TreePoint x,
                             TreePoint y, double h, std::size_t replicas,
                             std::uint64_t seed) {
  check(replicas > 0, "need at least one replica");
  const auto g = build_grid(t, h);
  const auto gz = grid_locate(g, z);
  const auto gx = grid_locate(g, x);
  const auto gy = grid_locate(g, y);
  check(gx != gy, "x and y must be distinct");
  if (gz == gx) return 1.0;
  if (gz == gy) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < replicas; ++r) {
    Rng rng(derive_seed(seed, r));
    std::uint32_t pos = gz;
    while (true) {
      pos = step_once(g.adj, rng, pos);
      if (pos == gx) {
        ++hits;
        break;
      }
      if (pos == gy) break;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(replicas);
}

double occupation_quadrature(const MetricTree& t, const EdgeMeasure& nu,
                             TreePoint x, TreePoint y) {
  const std::size_t nv = t.shape.size();
  check(nu.density.size() == nv && nu.atoms.size() == nv,
        "measure does not fit the tree");
  x = normalize_point(t, x);
  y = normalize_point(t, y);
  const double dxy = point_distance(t, x, y);
  auto f = [&](TreePoint z) {
    return point_distance(t, z, y) + dxy - point_distance(t, z, x);
  };
  double total = 0.0;
  for (const auto& [off, mass] : nu.atoms[0]) {
    (void)off;
    total += mass * f(TreePoint{0, 0.0});
  }
  for (std::uint32_t v = 1; v < nv; ++v) {
    const double len = t.edge_len[v];
    if (nu.density[v] != 0.0) {
      // the integrand is piecewise linear with kinks only where x or y sit
      // inside this edge, so the trapezoid rule on the cut segments is exact
      std::vector<double> cuts = {0.0, len};
      if (x.edge == v && x.offset > 0.0 && x.offset < len) cuts.push_back(x.offset);
      if (y.edge == v && y.offset > 0.0 && y.offset < len) cuts.push_back(y.offset);
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        if (b <= a) continue;
        total += nu.density[v] * (b - a) * 0.5 *
                 (f(TreePoint{v, a}) + f(TreePoint{v, b}));
      }
    }
    for (const auto& [off, mass] : nu.atoms[v]) total += mass * f(TreePoint{v, off});
  }
  return total;
}

std::pair<double, double> occupation_density_check(const MetricTree& t,
                                                   const EdgeMeasure& nu,
                                                   TreePoint x, TreePoint y,
                                                   double h, std::size_t replicas,
                                                   std::uint64_t seed) {
  check(replicas > 0, "need at least one replica");
  const double quad = occupation_quadrature(t, nu, x, y);
  const auto g = build_grid(t, h);
  const auto gx = grid_locate(g, x);
  const auto gy = grid_locate(g, y);
  if (gx == gy) return {0.0, quad};
  const auto cell = measure_cell_weights(g, nu);
  std::vector<double> hold(g.size());
  for (std::uint32_t z = 0; z < g.size(); ++z)
    hold[z] = 2.0 * h * cell[z] / static_cast<double>(g.adj.degree(z));
  double sum = 0.0;
  for (std::size_t r = 0; r < replicas; ++r) {
    Rng rng(derive_seed(seed, r));
    std::uint32_t pos = gx;
    while (pos != gy) {
      sum += hold[pos];
      pos = step_once(g.adj, rng, pos);
    }
  }
  return {sum / static_cast<double>(replicas), quad};
}

GridLocalField grid_local_times(const DiffusionPath& p,
                                const std::vector<std::uint32_t>& degree,
                                std::size_t upto) {
  check(!p.steps.empty(), "empty path");
  const std::size_t m = std::min(upto, p.steps.size() - 1);
  GridLocalField f;
  f.occupation.assign(degree.size(), 0);
  for (std::size_t l = 0; l <= m; ++l) {
    const auto x = p.steps[l];
    check(x < degree.size(), "path does not fit the grid");
    ++f.occupation[x];
  }
  f.local.assign(degree.size(), 0.0);
  for (std::size_t v = 0; v < degree.size(); ++v)
    if (f.occupation[v] > 0)
      f.local[v] = 2.0 * p.h * static_cast<double>(f.occupation[v]) /
                   static_cast<double>(degree[v]);
  return f;
}

GridLocalField grid_local_times(const GridTree& g, const DiffusionPath& p,
                                std::size_t upto) {
  std::vector<std::uint32_t> degree(g.size());
  for (std::uint32_t v = 0; v < g.size(); ++v) degree[v] = g.adj.degree(v);
  return grid_local_times(p, degree, upto);
}

double local_modulus(const GridTree& g, const GridLocalField& f) {
  check(f.local.size() == g.size(), "field does not fit the grid");
  double best = 0.0;
  for (std::uint32_t v = 0; v < g.size(); ++v)
    for (const auto u : g.adj.neighbors(v))
      if (u > v) best = std::max(best, std::abs(f.local[v] - f.local[u]));
  return best;
}

GridSubtree grid_subtree(const GridTree& g,
                         const std::vector<std::uint32_t>& host_leaves) {
  check(!host_leaves.empty(), "subtree needs at least one leaf");
  const auto& t = g.host;
  const std::size_t nv = t.shape.size();
  std::vector<std::uint8_t> hv(nv, 0);
  hv[0] = 1;
  for (const auto leaf : host_leaves) {
    check(leaf < nv, "leaf out of range");
    for (std::uint32_t v = leaf; v != 0 && !hv[v]; v = t.shape.parent(v)) hv[v] = 1;
  }

  GridSubtree s;
  s.member.assign(g.size(), 0);
  s.member_degree.assign(g.size(), 0);
  s.proj.assign(g.size(), 0);
  for (std::uint32_t v = 0; v < nv; ++v) s.member[v] = hv[v];
  for (std::uint32_t v = 1; v < nv; ++v) {
    if (!hv[v]) continue;
    s.total_length += t.edge_len[v];
    for (std::uint32_t j = 1; j < g.cells[v]; ++j)
      s.member[g.interior_base[v] + j - 1] = 1;
  }
  for (std::uint32_t x = 0; x < g.size(); ++x) {
    if (!s.member[x]) continue;
    std::uint32_t d = 0;
    for (const auto u : g.adj.neighbors(x)) d += s.member[u];
    s.member_degree[x] = d;
  }
  // non-member host vertices sit below a non-member edge, so their nearest
  // member is a host vertex further up; interiors inherit from the parent end
  for (std::uint32_t v = 0; v < nv; ++v)
    s.proj[v] = hv[v] ? v : s.proj[t.shape.parent(v)];
  for (std::uint32_t v = 1; v < nv; ++v)
    for (std::uint32_t j = 1; j < g.cells[v]; ++j) {
      const auto x = g.interior_base[v] + j - 1;
      s.proj[x] = hv[v] ? x : s.proj[t.shape.parent(v)];
    }
  return s;
}

DiffusionPath trace_on_subtree(const DiffusionPath& p, const GridSubtree& sub) {
  check(!p.steps.empty(), "empty path");
  DiffusionPath out;
  out.h = p.h;
  out.step_time = p.step_time;
  out.seed = p.seed;
  out.random_clock = p.random_clock;
  if (p.random_clock) out.times.push_back(0.0);
  for (std::size_t m = 0; m < p.steps.size(); ++m) {
    const auto x = p.steps[m];
    check(x < sub.member.size(), "path does not fit the subtree");
    if (!sub.member[x]) continue;
    out.steps.push_back(x);
    if (p.random_clock)
      out.times.push_back(out.times.back() + (p.times[m + 1] - p.times[m]));
  }
  check(!out.steps.empty(), "the path never enters the subtree");
  return out;
}

std::vector<double> project_weights(const GridSubtree& sub,
                                    const std::vector<double>& w) {
  check(w.size() == sub.proj.size(), "weights do not fit the grid");
  std::vector<double> out(w.size(), 0.0);
  for (std::size_t x = 0; x < w.size(); ++x) out[sub.proj[x]] += w[x];
  return out;
}

HatCurve a_hat_limit(const DiffusionPath& p,
                     const std::vector<double>& site_weight,
                     const std::vector<std::uint32_t>& site_degree,
                     const std::vector<double>& t_grid, std::string clock_tag) {
  check(!p.steps.empty(), "empty path");
  check(p.times.empty(), "additive functionals expect the constant-step clock");
  check(site_weight.size() == site_degree.size(), "weight and degree sizes differ");
  std::vector<double> pre(p.steps.size() + 1, 0.0);
  for (std::size_t m = 0; m < p.steps.size(); ++m) {
    const auto x = p.steps[m];
    check(x < site_weight.size(), "path does not fit the site arrays");
    check(site_degree[x] > 0, "visited site has degree zero");
    pre[m + 1] = pre[m] + 2.0 * p.h * site_weight[x] / static_cast<double>(site_degree[x]);
  }
  const double horizon = static_cast<double>(p.steps.size()) * p.step_time;
  HatCurve c;
  c.t = t_grid;
  c.clock = std::move(clock_tag);
  c.value.reserve(t_grid.size());
  for (const double t : t_grid) {
    check(t >= 0.0, "negative time");
    check(t <= horizon * (1.0 + 1e-12), "time grid runs past the path horizon");
    const double s = t / p.step_time;
    const auto m = static_cast<std::size_t>(s);
    if (m >= p.steps.size()) {
      c.value.push_back(pre.back());
    } else {
      const double frac = s - static_cast<double>(m);
      c.value.push_back(pre[m] + frac * (pre[m + 1] - pre[m]));
    }
  }
  return c;
}

HatCurve a_hat_limit(const GridTree& g, const DiffusionPath& p,
                     const EdgeMeasure& mu, const std::vector<double>& t_grid) {
  std::vector<std::uint32_t> degree(g.size());
  for (std::uint32_t v = 0; v < g.size(); ++v) degree[v] = g.adj.degree(v);
  return a_hat_limit(p, measure_cell_weights(g, mu), degree, t_grid, "length");
}

void write_hat_csv(const HatCurve& c, const std::string& path) {
  check(c.t.size() == c.value.size(), "curve arrays disagree");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "t,value,clock\n";
  char line[96];
  for (std::size_t i = 0; i < c.t.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,", c.t[i], c.value[i]);
    out << line << c.clock << '\n';
  }
}

HatCurve read_hat_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "t,value,clock")
    throw std::runtime_error("bad curve header in " + path);
  HatCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::runtime_error("bad curve row in " + path);
    c.t.push_back(std::stod(line.substr(0, c1)));
    c.value.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    const auto tag = line.substr(c2 + 1);
    if (c.clock.empty())
      c.clock = tag;
    else if (c.clock != tag)
      throw std::runtime_error("mixed clock tags in " + path);
  }
  return c;
}

std::uint64_t grid_hash(const GridTree& g) {
  std::uint64_t h = tree_hash(g.host.shape);
  auto mix = [&h](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  std::uint64_t bits;
  static_assert(sizeof bits == sizeof g.h);
  std::memcpy(&bits, &g.h, sizeof bits);
  mix(bits);
  for (const auto c : g.cells) mix(c);
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

void write_diffusion_binary(const DiffusionPath& p, const GridTree& g,
                            const std::string& path) {
  std::string buf;
  buf.reserve(2 * p.steps.size());
  for (const auto v : p.steps) put_varint(buf, v);
  if (p.random_clock) {
    check(p.times.size() == p.steps.size() + 1, "clock does not fit the path");
    const auto old = buf.size();
    buf.resize(old + 8 * p.times.size());
    std::memcpy(buf.data() + old, p.times.data(), 8 * p.times.size());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));

  nlohmann::json side;
  side["seed"] = p.seed;
  side["grid_hash"] = grid_hash(g);
  side["steps"] = p.steps.size();
  side["h"] = p.h;
  side["step_time"] = p.step_time;
  side["random_clock"] = p.random_clock;
  std::ofstream meta(path + ".json");
  if (!meta) throw std::runtime_error("cannot open " + path + ".json for writing");
  meta << side.dump(2) << '\n';
}

DiffusionPath read_diffusion_binary(const std::string& path,
                                    std::uint64_t* grid_hash_out) {
  std::ifstream meta_in(path + ".json");
  if (!meta_in) throw std::runtime_error("cannot open " + path + ".json");
  nlohmann::json side;
  meta_in >> side;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  DiffusionPath p;
  p.seed = side.at("seed").get<std::uint64_t>();
  p.h = side.at("h").get<double>();
  p.step_time = side.at("step_time").get<double>();
  p.random_clock = side.at("random_clock").get<bool>();
  const auto want = side.at("steps").get<std::size_t>();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < want; ++i)
    p.steps.push_back(static_cast<std::uint32_t>(get_varint(buf, pos)));
  if (p.random_clock) {
    if (buf.size() - pos != 8 * (want + 1))
      throw std::runtime_error("diffusion log length disagrees with its sidecar");
    p.times.resize(want + 1);
    std::memcpy(p.times.data(), buf.data() + pos, 8 * (want + 1));
  } else if (pos != buf.size()) {
    throw std::runtime_error("diffusion log length disagrees with its sidecar");
  }
  if (grid_hash_out) *grid_hash_out = side.at("grid_hash").get<std::uint64_t>();
  return p;
}

}  // namespace treelab
