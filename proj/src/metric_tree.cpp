#include "treelab/metric_tree.hpp"

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

constexpr double kTol = 1e-12;

std::uint32_t vertex_lca(const OrderedTree& s, std::uint32_t x, std::uint32_t y) {
  while (x != y) {
    if (s.depth(x) < s.depth(y)) std::swap(x, y);
    x = s.parent(x);
  }
  return x;
}

// Sequential leaf insertion over any tree metric given by point heights and
// pairwise meeting heights.
struct Builder {
  std::vector<std::uint32_t> parent{OrderedTree::kNoParent};
  std::vector<double> height{0.0};
  std::vector<std::vector<std::uint32_t>> kids{{}};
  std::vector<std::uint32_t> leaf_vertex;
  std::size_t merged = 0;

  std::uint32_t make_vertex(std::uint32_t par, double h) {
    parent.push_back(par);
    height.push_back(h);
    kids.emplace_back();
    return static_cast<std::uint32_t>(parent.size() - 1);
  }

  // Vertex at height h on the root path of v; splits an edge when h falls
  // strictly inside one. The split vertex takes over the child slot, so the
  // planted order only ever refines.
  std::uint32_t locate(std::uint32_t v, double h) {
    while (parent[v] != OrderedTree::kNoParent && height[parent[v]] > h + kTol)
      v = parent[v];
    if (std::abs(height[v] - h) <= kTol) return v;
    const std::uint32_t p = parent[v];
    if (std::abs(height[p] - h) <= kTol) return p;
    const std::uint32_t mid = make_vertex(p, h);
    *std::find(kids[p].begin(), kids[p].end(), v) = mid;
    parent[v] = mid;
    kids[mid].push_back(v);
    return mid;
  }

  template <class MeetFn>
  void insert(double h_new, MeetFn&& meet) {
    const std::size_t j = leaf_vertex.size();
    double best = 0.0;
    std::size_t best_i = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < j; ++i) {
      const double m = meet(i);
      if (best_i == std::numeric_limits<std::size_t>::max() || m > best) {
        best = m;
        best_i = i;
      }
    }
    std::uint32_t anchor = 0;
    if (best_i != std::numeric_limits<std::size_t>::max()) {
      anchor = leaf_vertex[best_i];
      const double d = h_new + height[anchor] - 2.0 * best;
      if (d <= kTol) {  // duplicate point, collapse onto the earlier leaf
        leaf_vertex.push_back(anchor);
        ++merged;
        return;
      }
    } else {
      best = 0.0;
    }
    const std::size_t before = parent.size();
    const std::uint32_t at = locate(anchor, best);
    if (h_new - best <= kTol) {
      // the new point sits on an existing root path (possibly at a fresh
      // split vertex, which then carries the label)
      leaf_vertex.push_back(at);
      if (at < before) ++merged;
      return;
    }
    const std::uint32_t leaf = make_vertex(at, h_new);
    kids[at].push_back(leaf);
    leaf_vertex.push_back(leaf);
  }

  MetricTree finish() const {
    const std::size_t n = parent.size();
    std::vector<std::uint32_t> order(n, 0);
    std::vector<int> new_parent(n, -1);
    std::vector<std::pair<std::uint32_t, std::size_t>> st;
    st.emplace_back(0u, 0);
    std::uint32_t next = 1;
    while (!st.empty()) {
      auto& [v, it] = st.back();
      if (it == kids[v].size()) {
        st.pop_back();
        continue;
      }
      const std::uint32_t c = kids[v][it++];
      order[c] = next;
      new_parent[next] = static_cast<int>(order[v]);
      ++next;
      st.emplace_back(c, 0);
    }
    MetricTree t;
    t.shape = OrderedTree::from_parents(new_parent);
    t.height.assign(n, 0.0);
    for (std::uint32_t v = 0; v < n; ++v) t.height[order[v]] = height[v];
    t.edge_len.assign(n, 0.0);
    t.total_len = 0.0;
    for (std::uint32_t v = 1; v < n; ++v) {
      t.edge_len[v] = t.height[v] - t.height[t.shape.parent(v)];
      t.total_len += t.edge_len[v];
    }
    t.leaves.reserve(leaf_vertex.size());
    for (std::uint32_t lv : leaf_vertex) t.leaves.push_back(order[lv]);
    t.merged_count = merged;
    return t;
  }
};

double piece_abs_integral(double g_lo, double g_hi, double width) {
  if (width <= 0.0) return 0.0;
  if (g_lo >= 0.0 && g_hi >= 0.0) return 0.5 * (g_lo + g_hi) * width;
  if (g_lo <= 0.0 && g_hi <= 0.0) return -0.5 * (g_lo + g_hi) * width;
  const double a = std::abs(g_lo), b = std::abs(g_hi);
  return 0.5 * width * (a * a + b * b) / (a + b);
}

void sort_and_merge_atoms(EdgeMeasure& m) {
  for (auto& edge : m.atoms) {
    std::sort(edge.begin(), edge.end());
    std::vector<std::pair<double, double>> out;
    for (const auto& [off, mass] : edge) {
      if (!out.empty() && off - out.back().first <= kTol)
        out.back().second += mass;
      else
        out.emplace_back(off, mass);
    }
    edge = std::move(out);
  }
}

}  // namespace

TreePoint vertex_point(const MetricTree& t, std::uint32_t v) {
  if (v == 0) return {0, 0.0};
  return {v, t.edge_len[v]};
}

TreePoint normalize_point(const MetricTree& t, TreePoint p) {
  if (p.edge >= t.shape.size())
    throw std::out_of_range("tree point on a nonexistent edge");
  if (p.edge == 0) {
    if (std::abs(p.offset) > kTol)
      throw std::invalid_argument("the root carries no edge to stand on");
    return {0, 0.0};
  }
  const double len = t.edge_len[p.edge];
  if (p.offset < -kTol || p.offset > len + kTol)
    throw std::invalid_argument("tree point offset outside its edge");
  if (p.offset >= len - kTol) return vertex_point(t, p.edge);
  if (p.offset <= kTol) return vertex_point(t, t.shape.parent(p.edge));
  return p;
}

double point_height(const MetricTree& t, TreePoint p) {
  if (p.edge == 0) return 0.0;
  return t.height[t.shape.parent(p.edge)] + p.offset;
}

double point_distance(const MetricTree& t, TreePoint p, TreePoint q) {
  if (p.edge == q.edge) return std::abs(p.offset - q.offset);
  const double hp = point_height(t, p);
  const double hq = point_height(t, q);
  const std::uint32_t l = vertex_lca(t.shape, p.edge, q.edge);
  if (l == p.edge) return hq - hp;
  if (l == q.edge) return hp - hq;
  return hp + hq - 2.0 * t.height[l];
}

bool same_shape(const MetricTree& a, const MetricTree& b) {
  return a.shape == b.shape && a.leaves == b.leaves;
}

std::vector<std::uint32_t> interior_degrees(const MetricTree& t) {
  std::vector<bool> labeled(t.shape.size(), false);
  for (std::uint32_t v : t.leaves) labeled[v] = true;
  std::vector<std::uint32_t> out;
  for (std::uint32_t v = 1; v < t.shape.size(); ++v)
    if (!labeled[v]) out.push_back(static_cast<std::uint32_t>(t.shape.degree(v)));
  return out;
}

ExcursionReduction reduced_tree_from_excursion(const Excursion& w,
                                               const std::vector<double>& u) {
  std::vector<std::size_t> idx(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) idx[i] = w.index_of(u[i]);

  Builder b;
  for (std::size_t j = 0; j < u.size(); ++j)
    b.insert(w.value(idx[j]),
             [&](std::size_t i) { return w.grid_min(idx[j], idx[i]); });

  ExcursionReduction r{b.finish(), w, u, {}};
  r.order.emplace_back(0.0, 0);
  r.order.emplace_back(1.0, 0);
  for (std::size_t i = 0; i < u.size(); ++i)
    r.order.emplace_back(u[i], r.tree.leaves[i]);
  std::sort(r.order.begin(), r.order.end());
  r.order.erase(std::unique(r.order.begin(), r.order.end(),
                            [](const auto& a, const auto& b) {
                              return a.first == b.first;
                            }),
                r.order.end());
  return r;
}

MetricTree reduced_tree_from_vertices(const OrderedTree& host,
                                      const std::vector<std::uint32_t>& picks,
                                      double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("edge scale must be positive");
  Builder b;
  for (std::uint32_t v : picks) {
    if (v >= host.size()) throw std::out_of_range("picked vertex outside the host tree");
    b.insert(scale * host.depth(v), [&](std::size_t i) {
      return scale * host.depth(vertex_lca(host, picks[i], v));
    });
  }
  return b.finish();
}

namespace {

// Height of the projection plus the vertex whose root path carries it.
std::pair<double, std::uint32_t> projection_target(const ExcursionReduction& r,
                                                   double t) {
  const auto& ord = r.order;
  auto it = std::lower_bound(
      ord.begin(), ord.end(), t,
      [](const auto& a, double val) { return a.first < val; });
  if (it != ord.end() && it->first == t)
    return {r.tree.height[it->second], it->second};
  if (it == ord.begin() || it == ord.end())
    throw std::out_of_range("projection time outside [0,1]");
  const auto& right = *it;
  const auto& left = *(it - 1);
  const double hl = r.w.pl_minimum(left.first, t);
  const double hr = r.w.pl_minimum(t, right.first);
  if (hl >= hr) return {hl, left.second};
  return {hr, right.second};
}

}  // namespace

TreePoint project_time(const ExcursionReduction& r, double t) {
  const auto [h, side] = projection_target(r, t);
  std::uint32_t v = side;
  while (r.tree.shape.parent(v) != OrderedTree::kNoParent &&
         r.tree.height[r.tree.shape.parent(v)] > h + kTol)
    v = r.tree.shape.parent(v);
  if (std::abs(r.tree.height[v] - h) <= kTol) return vertex_point(r.tree, v);
  const std::uint32_t p = r.tree.shape.parent(v);
  if (std::abs(r.tree.height[p] - h) <= kTol) return vertex_point(r.tree, p);
  return {v, h - r.tree.height[p]};
}

double projection_height(const ExcursionReduction& r, double t) {
  return projection_target(r, t).first;
}

double projection_gap(const ExcursionReduction& r) {
  const std::size_t n = r.w.grid_size();
  double worst = 0.0;
  for (std::size_t g = 0; g <= n; ++g) {
    const double t = static_cast<double>(g) / static_cast<double>(n);
    const double gap = r.w.value(g) - projection_height(r, t);
    worst = std::max(worst, gap);
  }
  return worst;
}

double EdgeMeasure::total(const MetricTree& t) const {
  double s = 0.0;
  for (std::size_t v = 1; v < density.size(); ++v) s += density[v] * t.edge_len[v];
  for (const auto& edge : atoms)
    for (const auto& [off, mass] : edge) s += mass;
  return s;
}

EdgeMeasure empty_measure(const MetricTree& t) {
  EdgeMeasure m;
  m.density.assign(t.shape.size(), 0.0);
  m.atoms.resize(t.shape.size());
  return m;
}

void add_atom(const MetricTree& t, EdgeMeasure& m, TreePoint p, double mass) {
  const TreePoint q = normalize_point(t, p);
  m.atoms[q.edge].emplace_back(q.offset, mass);
}

EdgeMeasure grid_pushforward_measure(const ExcursionReduction& r, std::size_t M) {
  if (M == 0) throw std::invalid_argument("pushforward grid must be nonempty");
  EdgeMeasure m = empty_measure(r.tree);
  const double mass = 1.0 / static_cast<double>(M);
  for (std::size_t g = 0; g < M; ++g) {
    const double t = (static_cast<double>(g) + 0.5) / static_cast<double>(M);
    add_atom(r.tree, m, project_time(r, t), mass);
  }
  sort_and_merge_atoms(m);
  return m;
}

EdgeMeasure length_measure(const MetricTree& t) {
  if (!(t.total_len > 0.0))
    throw std::invalid_argument("length measure needs positive total length");
  EdgeMeasure m = empty_measure(t);
  for (std::size_t v = 1; v < m.density.size(); ++v) m.density[v] = 1.0 / t.total_len;
  return m;
}

double segment_mass_to_root(const MetricTree& t, const EdgeMeasure& m, TreePoint p) {
  const TreePoint q = normalize_point(t, p);
  double acc = 0.0;
  for (const auto& [off, mass] : m.atoms[0]) acc += mass;
  if (q.edge == 0) return acc;
  acc += m.density[q.edge] * q.offset;
  for (const auto& [off, mass] : m.atoms[q.edge])
    if (off <= q.offset + kTol) acc += mass;
  for (std::uint32_t v = t.shape.parent(q.edge); v != 0; v = t.shape.parent(v)) {
    acc += m.density[v] * t.edge_len[v];
    for (const auto& [off, mass] : m.atoms[v]) acc += mass;
  }
  return acc;
}

double tree_w1(const MetricTree& t, const EdgeMeasure& a, const EdgeMeasure& b) {
  if (std::abs(a.total(t) - b.total(t)) > 1e-9)
    throw std::invalid_argument("transport distance needs equal total masses");
  const std::size_t n = t.shape.size();

  // signed atom lists and per-edge totals
  std::vector<std::vector<std::pair<double, double>>> diff(n);
  std::vector<double> edge_total(n, 0.0);
  for (std::size_t v = 1; v < n; ++v) {
    for (const auto& [off, mass] : a.atoms[v]) diff[v].emplace_back(off, mass);
    for (const auto& [off, mass] : b.atoms[v]) diff[v].emplace_back(off, -mass);
    std::sort(diff[v].begin(), diff[v].end());
    edge_total[v] = (a.density[v] - b.density[v]) * t.edge_len[v];
    for (const auto& [off, mass] : diff[v]) edge_total[v] += mass;
  }

  // net signed mass strictly below each vertex (preorder ids: children after
  // parents, so a reverse sweep is a post-order accumulation)
  std::vector<double> below(n, 0.0);
  for (std::uint32_t v = static_cast<std::uint32_t>(n) - 1; v >= 1; --v)
    below[t.shape.parent(v)] += below[v] + edge_total[v];

  double cost = 0.0;
  for (std::size_t v = 1; v < n; ++v) {
    const double len = t.edge_len[v];
    const double dens = a.density[v] - b.density[v];
    double carried = below[v];  // net mass below the cross-section at x = len
    double hi = len;
    auto flow = [&](double x) { return carried + dens * (len - x); };
    for (auto it = diff[v].rbegin(); it != diff[v].rend(); ++it) {
      const double lo = std::min(std::max(it->first, 0.0), len);
      cost += piece_abs_integral(flow(lo), flow(hi), hi - lo);
      carried += it->second;
      hi = lo;
    }
    cost += piece_abs_integral(flow(0.0), flow(hi), hi);
  }
  return cost;
}

TreePoint upsilon_map(const MetricTree& from, const MetricTree& to, TreePoint p) {
  if (!same_shape(from, to))
    throw std::invalid_argument("edge rescaling needs identical ordered shapes");
  const TreePoint q = normalize_point(from, p);
  if (q.edge == 0) return {0, 0.0};
  if (q.offset == from.edge_len[q.edge]) return vertex_point(to, q.edge);
  return {q.edge, q.offset * to.edge_len[q.edge] / from.edge_len[q.edge]};
}

EdgeMeasure transport_measure(const MetricTree& from, const MetricTree& to,
                              const EdgeMeasure& m) {
  if (!same_shape(from, to))
    throw std::invalid_argument("measure transport needs identical ordered shapes");
  EdgeMeasure out = empty_measure(to);
  for (const auto& [off, mass] : m.atoms[0]) out.atoms[0].emplace_back(off, mass);
  for (std::size_t v = 1; v < m.density.size(); ++v) {
    out.density[v] = m.density[v] * from.edge_len[v] / to.edge_len[v];
    for (const auto& [off, mass] : m.atoms[v]) {
      const double img = off == from.edge_len[v]
                             ? to.edge_len[v]
                             : off * to.edge_len[v] / from.edge_len[v];
      out.atoms[v].emplace_back(img, mass);
    }
  }
  sort_and_merge_atoms(out);
  return out;
}

double tuple_distance(const TreeTuple& a, const TreeTuple& b) {
  if (!same_shape(a.tree, b.tree)) return 1.0;
  if (std::abs(a.horizon - b.horizon) > kTol)
    throw std::invalid_argument("tuple comparison needs a common time horizon");
  if (a.path.size() != b.path.size())
    throw std::invalid_argument("tuple paths must share their time grid");
  if (a.probes.size() != b.probes.size() || a.field.size() != b.field.size())
    throw std::invalid_argument("tuple fields must share probes and time grid");

  for (std::size_t j = 0; j < a.probes.size(); ++j) {
    const TreePoint img = upsilon_map(a.tree, b.tree, a.probes[j]);
    if (point_distance(b.tree, img, b.probes[j]) > 1e-9)
      throw std::invalid_argument("tuple probes do not correspond under rescaling");
  }

  double d1 = 0.0;
  for (std::size_t v = 1; v < a.tree.edge_len.size(); ++v)
    d1 = std::max(d1, std::abs(a.tree.edge_len[v] - b.tree.edge_len[v]));

  const double d2 = tree_w1(a.tree, a.mu, transport_measure(b.tree, a.tree, b.mu)) +
                    tree_w1(b.tree, transport_measure(a.tree, b.tree, a.mu), b.mu);

  double d3 = 0.0;
  for (std::size_t i = 0; i < a.path.size(); ++i) {
    const double here =
        point_distance(a.tree, a.path[i], upsilon_map(b.tree, a.tree, b.path[i])) +
        point_distance(b.tree, upsilon_map(a.tree, b.tree, a.path[i]), b.path[i]);
    d3 = std::max(d3, here);
  }

  double d4 = 0.0;
  for (std::size_t i = 0; i < a.field.size(); ++i) {
    if (a.field[i].size() != a.probes.size() || b.field[i].size() != b.probes.size())
      throw std::invalid_argument("tuple field rows must match the probe count");
    for (std::size_t j = 0; j < a.field[i].size(); ++j)
      d4 = std::max(d4, std::abs(a.field[i][j] - b.field[i][j]));
  }

  return std::min(1.0, d1 + d2 + d3 + d4);
}

void write_metric_tree_json(const MetricTree& t, const std::string& path) {
  nlohmann::json j;
  j["parent"] = t.shape.to_parents();
  j["edge_len"] = t.edge_len;
  j["leaves"] = t.leaves;
  j["merged_count"] = t.merged_count;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

MetricTree read_metric_tree_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  MetricTree t;
  t.shape = OrderedTree::from_parents(j.at("parent").get<std::vector<int>>());
  t.edge_len = j.at("edge_len").get<std::vector<double>>();
  t.leaves = j.at("leaves").get<std::vector<std::uint32_t>>();
  t.merged_count = j.value("merged_count", std::size_t{0});
  if (t.edge_len.size() != t.shape.size())
    throw std::runtime_error("edge lengths do not match the tree in " + path);
  for (std::size_t v = 1; v < t.edge_len.size(); ++v)
    if (!(t.edge_len[v] > 0.0))
      throw std::runtime_error("nonpositive edge length in " + path);
  for (std::uint32_t v : t.leaves)
    if (v >= t.shape.size()) throw std::runtime_error("leaf label out of range in " + path);
  t.height.assign(t.shape.size(), 0.0);
  t.total_len = 0.0;
  for (std::uint32_t v = 1; v < t.shape.size(); ++v) {
    t.height[v] = t.height[t.shape.parent(v)] + t.edge_len[v];
    t.total_len += t.edge_len[v];
  }
  return t;
}

void write_measure_csv(const EdgeMeasure& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "edge,kind,position,value\n";
  char buf[128];
  for (std::size_t v = 0; v < m.density.size(); ++v) {
    if (m.density[v] != 0.0) {
      std::snprintf(buf, sizeof buf, "%zu,density,0,%.17g\n", v, m.density[v]);
      out << buf;
    }
    for (const auto& [off, mass] : m.atoms[v]) {
      std::snprintf(buf, sizeof buf, "%zu,atom,%.17g,%.17g\n", v, off, mass);
      out << buf;
    }
  }
}

EdgeMeasure read_measure_csv(const std::string& path, std::size_t n_vertices) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  EdgeMeasure m;
  m.density.assign(n_vertices, 0.0);
  m.atoms.resize(n_vertices);
  std::string line;
  std::getline(in, line);
  if (line != "edge,kind,position,value")
    throw std::runtime_error("unexpected measure header in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string edge_s, kind, pos_s, val_s;
    if (!std::getline(ss, edge_s, ',') || !std::getline(ss, kind, ',') ||
        !std::getline(ss, pos_s, ',') || !std::getline(ss, val_s))
      throw std::runtime_error("malformed measure row in " + path);
    const std::size_t v = std::stoul(edge_s);
    if (v >= n_vertices) throw std::runtime_error("edge id out of range in " + path);
    if (kind == "density")
      m.density[v] = std::stod(val_s);
    else if (kind == "atom")
      m.atoms[v].emplace_back(std::stod(pos_s), std::stod(val_s));
    else
      throw std::runtime_error("unknown measure row kind in " + path);
  }
  return m;
}

}  // namespace treelab
