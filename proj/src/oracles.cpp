#include "treelab/oracles.hpp"

#include <algorithm>
#include <stdexcept>

namespace treelab::oracle {

namespace {

// Exact dense solve of A x = b by Gaussian elimination with a nonzero pivot.
std::vector<Rat> solve_dense(std::vector<std::vector<Rat>> a,
                             std::vector<Rat> b) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && a[piv][col] == 0) ++piv;
    if (piv == n) throw std::runtime_error("solve_dense: singular system");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    const Rat inv = a[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      if (a[r][col] == 0) continue;
      const Rat f = a[r][col] / inv;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<Rat> x(n);
  for (std::size_t i = n; i-- > 0;) {
    Rat acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

struct TransientIndex {
  std::vector<std::size_t> states;          // transient state ids
  std::vector<std::size_t> position;        // state id -> row, npos if absorbed
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

TransientIndex transient_index(std::size_t n,
                               const std::vector<std::size_t>& absorbed) {
  TransientIndex t;
  t.position.assign(n, TransientIndex::npos);
  std::vector<bool> absorb(n, false);
  for (auto s : absorbed) {
    if (s >= n) throw std::out_of_range("ChainOracle: bad state id");
    absorb[s] = true;
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!absorb[s]) {
      t.position[s] = t.states.size();
      t.states.push_back(s);
    }
  }
  return t;
}

}  // namespace

ChainOracle::ChainOracle(std::vector<std::vector<Rat>> rows)
    : p_(std::move(rows)) {
  for (const auto& row : p_) {
    if (row.size() != p_.size())
      throw std::invalid_argument("ChainOracle: matrix not square");
    Rat s = 0;
    for (const auto& v : row) {
      if (v < 0) throw std::invalid_argument("ChainOracle: negative entry");
      s += v;
    }
    if (s != 1) throw std::invalid_argument("ChainOracle: row sum != 1");
  }
}

Rat ChainOracle::expected_hitting_time(
    std::size_t start, const std::vector<std::size_t>& targets) const {
  const auto idx = transient_index(size(), targets);
  if (idx.position[start] == TransientIndex::npos) return 0;
  const std::size_t m = idx.states.size();
  std::vector<std::vector<Rat>> a(m, std::vector<Rat>(m, 0));
  std::vector<Rat> b(m, 1);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t s = idx.states[r];
    a[r][r] = 1;
    for (std::size_t c = 0; c < m; ++c)
      a[r][c] -= p_[s][idx.states[c]];
  }
  return solve_dense(std::move(a), std::move(b))[idx.position[start]];
}

Rat ChainOracle::hitting_time_second_moment(
    std::size_t start, const std::vector<std::size_t>& targets) const {
  const auto idx = transient_index(size(), targets);
  if (idx.position[start] == TransientIndex::npos) return 0;
  const std::size_t m = idx.states.size();
  std::vector<std::vector<Rat>> a(m, std::vector<Rat>(m, 0));
  std::vector<Rat> ones(m, 1);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t s = idx.states[r];
    a[r][r] = 1;
    for (std::size_t c = 0; c < m; ++c) a[r][c] -= p_[s][idx.states[c]];
  }
  const auto mean = solve_dense(a, ones);
  // (I - Q) s = 1 + 2 Q mean
  std::vector<Rat> rhs(m, 1);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t s = idx.states[r];
    Rat acc = 0;
    for (std::size_t c = 0; c < m; ++c) acc += p_[s][idx.states[c]] * mean[c];
    rhs[r] += 2 * acc;
  }
  return solve_dense(std::move(a), std::move(rhs))[idx.position[start]];
}

Rat ChainOracle::hitting_probability(std::size_t start,
                                     const std::vector<std::size_t>& a,
                                     const std::vector<std::size_t>& b) const {
  for (auto s : a)
    if (s == start) return 1;
  for (auto s : b)
    if (s == start) return 0;
  std::vector<std::size_t> absorbed(a);
  absorbed.insert(absorbed.end(), b.begin(), b.end());
  const auto idx = transient_index(size(), absorbed);
  const std::size_t m = idx.states.size();
  std::vector<std::vector<Rat>> mat(m, std::vector<Rat>(m, 0));
  std::vector<Rat> rhs(m, 0);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t s = idx.states[r];
    mat[r][r] = 1;
    for (std::size_t c = 0; c < m; ++c) mat[r][c] -= p_[s][idx.states[c]];
    for (auto t : a) rhs[r] += p_[s][t];
  }
  return solve_dense(std::move(mat), std::move(rhs))[idx.position[start]];
}

ChainOracle srw_chain(const Adjacency& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<Rat>> rows(n, std::vector<Rat>(n, 0));
  for (std::size_t v = 0; v < n; ++v) {
    if (adj[v].empty())
      throw std::invalid_argument("srw_chain: isolated vertex");
    const Rat step(1, static_cast<long>(adj[v].size()));
    for (auto w : adj[v]) rows[v][w] += step;
  }
  return ChainOracle(std::move(rows));
}

namespace {

void enumerate_rec(std::size_t edges_left, std::size_t open,
                   std::vector<int>& parent, std::vector<std::size_t>& stack,
                   std::vector<std::vector<int>>& out) {
  if (edges_left == 0 && open == 0) {
    out.push_back(parent);
    return;
  }
  if (edges_left > 0) {  // descend: new child of the current stack top
    parent.push_back(static_cast<int>(stack.back()));
    stack.push_back(parent.size() - 1);
    enumerate_rec(edges_left - 1, open + 1, parent, stack, out);
    stack.pop_back();
    parent.pop_back();
  }
  if (open > 0 && stack.size() > 1) {  // ascend
    const std::size_t saved = stack.back();
    stack.pop_back();
    enumerate_rec(edges_left, open - 1, parent, stack, out);
    stack.push_back(saved);
  }
}

}  // namespace

std::vector<std::vector<int>> enumerate_parent_trees(std::size_t n) {
  if (n == 0) throw std::invalid_argument("enumerate_parent_trees: n >= 1");
  std::vector<std::vector<int>> out;
  std::vector<int> parent{-1};
  std::vector<std::size_t> stack{0};
  enumerate_rec(n - 1, 0, parent, stack, out);
  return out;
}

Adjacency tree_adjacency(const std::vector<int>& parent) {
  Adjacency adj(parent.size());
  for (std::size_t v = 1; v < parent.size(); ++v) {
    const auto p = static_cast<std::size_t>(parent[v]);
    adj[v].push_back(p);
    adj[p].push_back(v);
  }
  return adj;
}

int tree_height(const std::vector<int>& parent) {
  int h = 0;
  std::vector<int> depth(parent.size(), 0);
  for (std::size_t v = 1; v < parent.size(); ++v) {
    depth[v] = depth[static_cast<std::size_t>(parent[v])] + 1;
    h = std::max(h, depth[v]);
  }
  return h;
}

Adjacency attach_pendants(Adjacency adj, std::size_t at, std::size_t d) {
  if (at >= adj.size()) throw std::out_of_range("attach_pendants: bad vertex");
  for (std::size_t i = 0; i < d; ++i) {
    adj.push_back({at});
    adj[at].push_back(adj.size() - 1);
  }
  return adj;
}

Rat alpha_closed_form(std::size_t tree_size, std::size_t d) {
  return Rat(2 * static_cast<long>(tree_size) - 2 + static_cast<long>(d),
             static_cast<long>(d));
}

Rat beta_closed_form_bound(std::size_t tree_size, std::size_t d, int height) {
  const long t = static_cast<long>(tree_size);
  return Rat(36 * (static_cast<long>(d) + height) * t * t,
             static_cast<long>(d));
}

Gadget crossing_gadget(std::size_t l, std::size_t d1, std::size_t d2) {
  if (l < 1 || d1 < 1 || d2 < 1)
    throw std::invalid_argument("crossing_gadget: need l, d1, d2 >= 1");
  Gadget g;
  g.adj.resize(l + 1);
  for (std::size_t i = 0; i < l; ++i) {
    g.adj[i].push_back(i + 1);
    g.adj[i + 1].push_back(i);
  }
  g.x = 0;
  g.y = l;
  g.adj = attach_pendants(std::move(g.adj), g.x, d1 - 1);
  g.adj = attach_pendants(std::move(g.adj), g.y, d2 - 1);
  return g;
}

VisitLaw visit_law_closed_form(std::size_t l, std::size_t d1, std::size_t d2,
                               std::size_t kmax) {
  const long ll = static_cast<long>(l);
  const long e1 = static_cast<long>(d1);
  const long e2 = static_cast<long>(d2);
  VisitLaw law;
  law.p0 = 1 - Rat(1, ll * e1);
  const Rat base = Rat(1, ll * ll * e1 * e2);
  const Rat ratio = 1 - Rat(1, ll * e2);
  Rat cur = base;
  for (std::size_t k = 1; k <= kmax; ++k) {
    law.pk.push_back(cur);
    cur *= ratio;
  }
  law.mean = Rat(e2, e1);
  return law;
}

VisitLaw visit_law_from_chain(std::size_t l, std::size_t d1, std::size_t d2,
                              std::size_t kmax) {
  const Gadget g = crossing_gadget(l, d1, d2);
  const ChainOracle chain = srw_chain(g.adj);
  const std::vector<std::size_t> hit_x{g.x};
  const std::vector<std::size_t> hit_y{g.y};
  // First-step analysis from x: reach y before coming back to x.
  Rat reach = 0;
  for (auto nb : g.adj[g.x])
    reach += Rat(1, static_cast<long>(g.adj[g.x].size())) *
             chain.hitting_probability(nb, hit_y, hit_x);
  // From y: return to y before hitting x.
  Rat comeback = 0;
  for (auto nb : g.adj[g.y])
    comeback += Rat(1, static_cast<long>(g.adj[g.y].size())) *
                chain.hitting_probability(nb, hit_y, hit_x);
  VisitLaw law;
  law.p0 = 1 - reach;
  Rat cur = reach * (1 - comeback);
  for (std::size_t k = 1; k <= kmax; ++k) {
    law.pk.push_back(cur);
    cur *= comeback;
  }
  law.mean = reach / (1 - comeback);
  return law;
}

std::vector<std::pair<std::vector<int>, Rat>> conditioned_gw_law(
    const std::vector<Rat>& weights, std::size_t n) {
  auto shapes = enumerate_parent_trees(n);
  std::vector<std::pair<std::vector<int>, Rat>> law;
  Rat total = 0;
  for (auto& shape : shapes) {
    std::vector<std::size_t> kids(n, 0);
    for (std::size_t v = 1; v < n; ++v)
      ++kids[static_cast<std::size_t>(shape[v])];
    Rat w = 1;
    for (std::size_t v = 0; v < n; ++v) {
      if (kids[v] >= weights.size() || weights[kids[v]] == 0) {
        w = 0;
        break;
      }
      w *= weights[kids[v]];
    }
    total += w;
    law.emplace_back(std::move(shape), std::move(w));
  }
  if (total == 0)
    throw std::invalid_argument("conditioned_gw_law: law has no support at n");
  for (auto& [shape, w] : law) w /= total;
  return law;
}

std::vector<Rat> geometric_weights(const Rat& q, std::size_t kmax) {
  if (q <= 0 || q >= 1)
    throw std::invalid_argument("geometric_weights: q in (0,1)");
  std::vector<Rat> w;
  Rat cur = 1 - q;
  for (std::size_t k = 0; k <= kmax; ++k) {
    w.push_back(cur);
    cur *= q;
  }
  return w;
}

std::vector<Rat> poisson_weights(std::size_t kmax) {
  std::vector<Rat> w;
  Rat fact = 1;
  for (std::size_t k = 0; k <= kmax; ++k) {
    if (k > 0) fact *= static_cast<long>(k);
    w.push_back(Rat(1) / fact);
  }
  return w;
}

std::vector<Rat> depth_selection_vertex_law(const std::vector<int>& depth,
                                            const std::vector<int>& vertex,
                                            std::size_t n_vertices) {
  if (depth.size() != vertex.size() || depth.size() < 3 ||
      depth.size() % 2 != 1)
    throw std::invalid_argument("depth_selection_vertex_law: bad contour");
  const std::size_t two_n = depth.size() - 1;
  std::vector<Rat> mass(n_vertices, 0);
  const Rat cell(1, static_cast<long>(two_n));
  for (std::size_t j = 0; j < two_n; ++j) {
    const std::size_t pick = (depth[j] >= depth[j + 1]) ? j : j + 1;
    const auto v = static_cast<std::size_t>(vertex[pick]);
    if (v >= n_vertices)
      throw std::out_of_range("depth_selection_vertex_law: bad vertex id");
    mass[v] += cell;
  }
  return mass;
}

}  // namespace treelab::oracle
