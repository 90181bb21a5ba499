#include "treelab/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace treelab {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

double l1_norm(const SparseVector& x) {
  double s = 0.0;
  for (const auto& [i, v] : x.entries) s += std::abs(v);
  return s;
}

double l1_distance(const SparseVector& x, const SparseVector& y) {
  double s = 0.0;
  std::size_t a = 0, b = 0;
  while (a < x.entries.size() || b < y.entries.size()) {
    if (b == y.entries.size() ||
        (a < x.entries.size() && x.entries[a].first < y.entries[b].first)) {
      s += std::abs(x.entries[a++].second);
    } else if (a == x.entries.size() || y.entries[b].first < x.entries[a].first) {
      s += std::abs(y.entries[b++].second);
    } else {
      s += std::abs(x.entries[a++].second - y.entries[b++].second);
    }
  }
  return s;
}

SparseVector sparse_scale(const SparseVector& x, double a) {
  if (a == 1.0) return x;
  SparseVector out;
  out.entries.reserve(x.entries.size());
  for (const auto& [i, v] : x.entries)
    if (a * v != 0.0) out.entries.emplace_back(i, a * v);
  return out;
}

SparseVector sparse_axpy(double a, const SparseVector& x, double b, const SparseVector& y) {
  SparseVector out;
  out.entries.reserve(x.entries.size() + y.entries.size());
  std::size_t p = 0, q = 0;
  while (p < x.entries.size() || q < y.entries.size()) {
    std::uint32_t idx;
    double val;
    if (q == y.entries.size() ||
        (p < x.entries.size() && x.entries[p].first < y.entries[q].first)) {
      idx = x.entries[p].first;
      val = a * x.entries[p].second;
      ++p;
    } else if (p == x.entries.size() || y.entries[q].first < x.entries[p].first) {
      idx = y.entries[q].first;
      val = b * y.entries[q].second;
      ++q;
    } else {
      idx = x.entries[p].first;
      val = a * x.entries[p].second + b * y.entries[q].second;
      ++p;
      ++q;
    }
    if (val != 0.0) out.entries.emplace_back(idx, val);
  }
  return out;
}

TreeEmbedding sequential_embed(const MetricTree& t) {
  const std::size_t n = t.shape.size();
  TreeEmbedding emb;
  emb.tree = t;
  emb.edge_coord.assign(n, 0);

  for (std::size_t i = 0; i < t.leaves.size(); ++i) {
    std::uint32_t v = t.leaves[i];
    while (v != 0 && emb.edge_coord[v] == 0) {
      emb.edge_coord[v] = static_cast<std::uint32_t>(i + 1);
      v = t.shape.parent(v);
    }
  }
  for (std::size_t v = 1; v < n; ++v)
    if (emb.edge_coord[v] == 0)
      throw std::invalid_argument("tree has an edge not covered by any leaf path");

  emb.vertex_map.resize(n);
  for (std::size_t v = 1; v < n; ++v) {
    SparseVector step;
    step.entries = {{emb.edge_coord[v], t.edge_len[v]}};
    emb.vertex_map[v] =
        sparse_axpy(1.0, emb.vertex_map[t.shape.parent(v)], 1.0, step);
  }
  return emb;
}

SparseVector embed_point(const TreeEmbedding& emb, TreePoint p) {
  p = normalize_point(emb.tree, p);
  if (p.edge == 0) return {};
  if (p.offset == emb.tree.edge_len[p.edge]) return emb.vertex_map[p.edge];
  const std::uint32_t up = emb.tree.shape.parent(p.edge);
  if (p.offset == 0.0) return emb.vertex_map[up];
  SparseVector part;
  part.entries = {{emb.edge_coord[p.edge], p.offset}};
  return sparse_axpy(1.0, emb.vertex_map[up], 1.0, part);
}

std::vector<SparseVector> tree_cloud(const TreeEmbedding& emb, double spacing) {
  check(spacing > 0.0, "cloud spacing must be positive");
  std::vector<SparseVector> out;
  out.push_back({});
  for (std::uint32_t v = 1; v < emb.tree.shape.size(); ++v) {
    const double len = emb.tree.edge_len[v];
    const auto pieces = static_cast<std::size_t>(std::ceil(len / spacing));
    for (std::size_t j = 1; j < pieces; ++j) {
      const double off = len * static_cast<double>(j) / static_cast<double>(pieces);
      out.push_back(embed_point(emb, TreePoint{v, off}));
    }
    out.push_back(emb.vertex_map[v]);
  }
  return out;
}

std::vector<SparseVector> embed_measure(const TreeEmbedding& emb, const EdgeMeasure& m,
                                        std::vector<double>& masses) {
  for (double d : m.density)
    check(d == 0.0, "only atomic measures embed; this one has a density part");
  std::vector<SparseVector> out;
  masses.clear();
  for (std::uint32_t v = 0; v < m.atoms.size(); ++v) {
    for (const auto& [off, mass] : m.atoms[v]) {
      out.push_back(embed_point(emb, TreePoint{v, off}));
      masses.push_back(mass);
    }
  }
  return out;
}

EmbeddedTriple theta_rescale(std::size_t n, const EmbeddedTriple& e,
                             std::size_t out_samples) {
  check(n > 0, "rescaling index must be positive");
  check(out_samples >= 2, "need at least two output samples");
  check(e.time_step > 0.0, "path time step must be positive");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double horizon = std::pow(static_cast<double>(n), 1.5);

  EmbeddedTriple out;
  out.cloud.reserve(e.cloud.size());
  for (const auto& x : e.cloud) out.cloud.push_back(sparse_scale(x, scale));
  out.mass = e.mass;
  out.time_step = 1.0 / static_cast<double>(out_samples - 1);

  for (const auto& path : e.paths) {
    check(!path.empty(), "empty path");
    const double have = static_cast<double>(path.size() - 1) * e.time_step;
    if (have + 1e-9 < horizon) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "path horizon %.6g is shorter than the required n^(3/2) = %.6g",
                    have, horizon);
      throw std::invalid_argument(buf);
    }
    std::vector<SparseVector> g(out_samples);
    for (std::size_t j = 0; j < out_samples; ++j) {
      const double t =
          static_cast<double>(j) / static_cast<double>(out_samples - 1);
      const double s = t * horizon / e.time_step;
      auto i0 = static_cast<std::size_t>(s);
      if (i0 >= path.size() - 1) i0 = path.size() - 1;
      const double frac = s - static_cast<double>(i0);
      if (frac == 0.0 || i0 + 1 == path.size()) {
        g[j] = sparse_scale(path[i0], scale);
      } else {
        g[j] = sparse_scale(sparse_axpy(1.0 - frac, path[i0], frac, path[i0 + 1]),
                            scale);
      }
    }
    out.paths.push_back(std::move(g));
  }
  return out;
}

double hausdorff_l1(const std::vector<SparseVector>& a, const std::vector<SparseVector>& b) {
  check(!a.empty() && !b.empty(), "hausdorff distance of an empty cloud");
  auto one_sided = [](const std::vector<SparseVector>& from,
                      const std::vector<SparseVector>& to) {
    double worst = 0.0;
    for (const auto& x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : to) best = std::min(best, l1_distance(x, y));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

double prohorov_proxy(const std::vector<SparseVector>& cloud, const std::vector<double>& mu,
                      const std::vector<double>& nu) {
  check(!cloud.empty(), "transport on an empty cloud");
  check(mu.size() == cloud.size() && nu.size() == cloud.size(),
        "measure vectors must match the cloud");
  double tm = 0.0, tn = 0.0;
  for (double x : mu) {
    check(x >= 0.0, "negative mass");
    tm += x;
  }
  for (double x : nu) {
    check(x >= 0.0, "negative mass");
    tn += x;
  }
  check(std::abs(tm - tn) <= 1e-9, "total masses differ");

  std::vector<std::size_t> src, dst;
  std::vector<double> sup, dem;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = mu[i] - nu[i];
    if (d > 0.0) {
      src.push_back(i);
      sup.push_back(d);
    } else if (d < 0.0) {
      dst.push_back(i);
      dem.push_back(-d);
    }
  }
  if (src.empty() || dst.empty()) return 0.0;

  const std::size_t m = src.size(), k = dst.size();
  std::vector<double> cost(m * k);
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t d = 0; d < k; ++d)
      cost[s * k + d] = l1_distance(cloud[src[s]], cloud[dst[d]]);

  // successive shortest paths with potentials, real-valued capacities
  std::vector<double> flow(m * k, 0.0), pot(m + k, 0.0), rs = sup, rd = dem;
  const double total = tm;
  const double eps = 1e-15 * std::max(1.0, total);
  const std::size_t node_count = m + k;
  const double inf = std::numeric_limits<double>::infinity();

  double left = 0.0;
  for (double x : rd) left += x;
  std::size_t guard = 4 * node_count * node_count + 64;
  while (left > eps) {
    if (guard-- == 0) throw std::logic_error("transport solver failed to converge");
    std::vector<double> dist(node_count, inf);
    std::vector<std::uint32_t> from(node_count, 0xffffffffu);
    std::vector<char> done(node_count, 0);
    for (std::size_t s = 0; s < m; ++s)
      if (rs[s] > eps) dist[s] = 0.0;
    for (std::size_t it = 0; it < node_count; ++it) {
      std::size_t u = node_count;
      double best = inf;
      for (std::size_t v = 0; v < node_count; ++v)
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      if (u == node_count) break;
      done[u] = 1;
      if (u < m) {
        for (std::size_t d = 0; d < k; ++d) {
          const double rc =
              std::max(0.0, cost[u * k + d] + pot[u] - pot[m + d]);
          if (dist[u] + rc < dist[m + d]) {
            dist[m + d] = dist[u] + rc;
            from[m + d] = static_cast<std::uint32_t>(u);
          }
        }
      } else {
        const std::size_t d = u - m;
        for (std::size_t s = 0; s < m; ++s) {
          if (flow[s * k + d] <= 0.0) continue;
          const double rc =
              std::max(0.0, -cost[s * k + d] + pot[m + d] - pot[s]);
          if (dist[u] + rc < dist[s]) {
            dist[s] = dist[u] + rc;
            from[s] = static_cast<std::uint32_t>(u);
          }
        }
      }
    }

    std::size_t target = node_count;
    double best = inf;
    for (std::size_t d = 0; d < k; ++d)
      if (rd[d] > eps && dist[m + d] < best) {
        best = dist[m + d];
        target = m + d;
      }
    if (target == node_count) throw std::logic_error("transport target unreachable");

    // bottleneck along the alternating path
    double delta = rd[target - m];
    for (std::size_t v = target; from[v] != 0xffffffffu; v = from[v]) {
      const std::size_t u = from[v];
      if (v >= m) continue;                       // backward arc u(-m) -> v
      delta = std::min(delta, flow[v * k + (u - m)]);
    }
    {
      std::size_t v = target;
      while (from[v] != 0xffffffffu) v = from[v];
      delta = std::min(delta, rs[v]);
    }

    for (std::size_t v = target; from[v] != 0xffffffffu; v = from[v]) {
      const std::size_t u = from[v];
      if (v >= m)
        flow[u * k + (v - m)] += delta;           // forward source -> sink
      else
        flow[v * k + (from[v] - m)] -= delta;     // backward sink -> source
    }
    {
      std::size_t v = target;
      while (from[v] != 0xffffffffu) v = from[v];
      rs[v] -= delta;
    }
    rd[target - m] -= delta;
    left -= delta;

    const double cap = dist[target];
    for (std::size_t v = 0; v < node_count; ++v)
      pot[v] += std::min(dist[v], cap);
  }

  double w1 = 0.0;
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t d = 0; d < k; ++d) w1 += flow[s * k + d] * cost[s * k + d];
  return w1;
}

double path_sup_distance(const std::vector<SparseVector>& p,
                         const std::vector<SparseVector>& q) {
  check(p.size() == q.size(), "paths sampled on different grids");
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    worst = std::max(worst, l1_distance(p[i], q[i]));
  return worst;
}

namespace {

nlohmann::json vector_to_json(const SparseVector& x) {
  auto arr = nlohmann::json::array();
  for (const auto& [i, v] : x.entries) arr.push_back({i, v});
  return arr;
}

SparseVector vector_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw std::invalid_argument("expected a json array");
  SparseVector x;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2)
      throw std::invalid_argument("entries must be [index, value] pairs");
    const auto idx = pair[0].get<std::uint32_t>();
    const auto val = pair[1].get<double>();
    if (!x.entries.empty() && idx <= x.entries.back().first)
      throw std::invalid_argument("entry indices must be strictly increasing");
    if (val != 0.0) x.entries.emplace_back(idx, val);
  }
  return x;
}

}  // namespace

void write_cloud_jsonl(const std::vector<SparseVector>& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& x : cloud) out << vector_to_json(x).dump() << '\n';
}

std::vector<SparseVector> read_cloud_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<SparseVector> cloud;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    cloud.push_back(vector_from_json(nlohmann::json::parse(line)));
  }
  return cloud;
}

void write_paths_jsonl(const std::vector<std::vector<SparseVector>>& paths,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (std::size_t k = 0; k < paths.size(); ++k)
    for (const auto& x : paths[k])
      out << nlohmann::json::array({k, vector_to_json(x)}).dump() << '\n';
}

std::vector<std::vector<SparseVector>> read_paths_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<SparseVector>> paths;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto row = nlohmann::json::parse(line);
    if (!row.is_array() || row.size() != 2)
      throw std::invalid_argument("expected [path index, samples] rows");
    const auto k = row[0].get<std::size_t>();
    if (k == paths.size()) paths.emplace_back();
    if (k >= paths.size())
      throw std::invalid_argument("path indices must arrive in order");
    paths[k].push_back(vector_from_json(row[1]));
  }
  return paths;
}

}  // namespace treelab
