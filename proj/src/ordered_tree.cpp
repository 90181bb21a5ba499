#include "treelab/ordered_tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace treelab {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void OrderedTree::build_index() {
  const std::size_t n = parent_.size();
  child_begin_.assign(n + 1, 0);
  for (std::uint32_t v = 1; v < n; ++v) ++child_begin_[parent_[v] + 1];
  std::partial_sum(child_begin_.begin(), child_begin_.end(), child_begin_.begin());
  children_flat_.resize(n == 0 ? 0 : n - 1);
  std::vector<std::uint32_t> cursor(child_begin_.begin(), child_begin_.end() - 1);
  for (std::uint32_t v = 1; v < n; ++v) children_flat_[cursor[parent_[v]]++] = v;

  depth_.assign(n, 0);
  for (std::uint32_t v = 1; v < n; ++v) depth_[v] = depth_[parent_[v]] + 1;
}

OrderedTree OrderedTree::from_parents(const std::vector<int>& parent) {
  const std::size_t n = parent.size();
  check(n >= 1, "tree needs at least one vertex");
  int root = -1;
  for (std::size_t v = 0; v < n; ++v) {
    if (parent[v] < 0) {
      check(root < 0, "tree has more than one root");
      root = static_cast<int>(v);
    } else {
      check(static_cast<std::size_t>(parent[v]) < n, "parent id out of range");
      check(parent[v] != static_cast<int>(v), "vertex is its own parent");
    }
  }
  check(root >= 0, "tree has no root");

  // Children ordered by original id, then relabel by preorder.
  std::vector<std::vector<std::uint32_t>> kids(n);
  for (std::size_t v = 0; v < n; ++v)
    if (parent[v] >= 0) kids[parent[v]].push_back(static_cast<std::uint32_t>(v));

  OrderedTree t;
  t.parent_.assign(n, kNoParent);
  std::vector<std::uint32_t> order(n, kNoParent);
  std::vector<std::pair<std::uint32_t, std::size_t>> stack;
  stack.emplace_back(static_cast<std::uint32_t>(root), 0);
  std::uint32_t next_id = 0;
  order[root] = next_id++;
  while (!stack.empty()) {
    auto& [v, it] = stack.back();
    if (it == kids[v].size()) {
      stack.pop_back();
      continue;
    }
    std::uint32_t c = kids[v][it++];
    check(order[c] == kNoParent, "parent array contains a cycle");
    order[c] = next_id;
    t.parent_[next_id] = order[v];
    ++next_id;
    stack.emplace_back(c, 0);
  }
  check(next_id == n, "parent array is not connected");
  t.build_index();
  return t;
}

OrderedTree OrderedTree::single_vertex() {
  return from_parents({-1});
}

std::vector<int> OrderedTree::to_parents() const {
  std::vector<int> out(size());
  out[0] = -1;
  for (std::uint32_t v = 1; v < size(); ++v) out[v] = static_cast<int>(parent_[v]);
  return out;
}

Contour contour_and_depth(const OrderedTree& tree) {
  const std::size_t n = tree.size();
  Contour c;
  c.vertex.reserve(2 * n + 1);
  c.depth.reserve(2 * n + 1);
  // Depth-first tour: each edge contributes one descent and one ascent,
  // giving slots 0..2(n-1); the tail keeps the tour at the root.
  std::vector<std::size_t> next_child(n, 0);
  std::uint32_t v = 0;
  c.vertex.push_back(0);
  c.depth.push_back(0);
  for (;;) {
    auto kids = tree.children(v);
    if (next_child[v] < kids.size()) {
      v = kids[next_child[v]++];
    } else if (v != 0) {
      v = tree.parent(v);
    } else {
      break;
    }
    c.vertex.push_back(v);
    c.depth.push_back(tree.depth(v));
  }
  while (c.vertex.size() < 2 * n + 1) {
    c.vertex.push_back(0);
    c.depth.push_back(0);
  }
  return c;
}

OrderedTree tree_from_depth(const std::vector<std::uint32_t>& depth) {
  check(!depth.empty() && depth.size() % 2 == 1, "depth array must have length 2n+1");
  const std::size_t n = depth.size() / 2;
  check(n >= 1, "depth array too short");
  const std::size_t tour = 2 * (n - 1);
  check(depth[0] == 0, "contour must start at the root");
  for (std::size_t i = tour; i <= 2 * n; ++i)
    check(depth[i] == 0, "contour padding must stay at the root");
  for (std::size_t i = 0; i < tour; ++i) {
    const long long step = static_cast<long long>(depth[i + 1]) -
                           static_cast<long long>(depth[i]);
    check(step == 1 || step == -1, "contour must move by unit steps");
  }

  std::vector<int> parent(n);
  parent[0] = -1;
  std::vector<std::uint32_t> path{0};  // current root path
  std::uint32_t next_id = 1;
  for (std::size_t i = 0; i < tour; ++i) {
    if (depth[i + 1] > depth[i]) {
      check(next_id < n, "contour encodes too many vertices");
      parent[next_id] = static_cast<int>(path.back());
      path.push_back(next_id++);
    } else {
      path.pop_back();
      check(!path.empty(), "contour drops below the root");
    }
  }
  check(next_id == n, "contour encodes too few vertices");
  return OrderedTree::from_parents(parent);
}

std::vector<OrderedTree> enumerate_ordered_trees(std::size_t n) {
  check(n >= 1, "need at least one vertex");
  // trees[m] as parent arrays; decomposition by the size of the first
  // root subtree keeps everything in preorder.
  std::vector<std::vector<std::vector<int>>> trees(n + 1);
  trees[1] = {{-1}};
  for (std::size_t m = 2; m <= n; ++m) {
    for (std::size_t k = 1; k < m; ++k) {
      for (const auto& first : trees[k]) {
        for (const auto& rest : trees[m - k]) {
          std::vector<int> p(m);
          p[0] = -1;
          for (std::size_t v = 0; v < k; ++v)
            p[1 + v] = first[v] < 0 ? 0 : 1 + first[v];
          for (std::size_t v = 1; v < m - k; ++v)
            p[k + v] = rest[v] == 0 ? 0 : static_cast<int>(k) + rest[v];
          trees[m].push_back(std::move(p));
        }
      }
    }
  }
  std::vector<OrderedTree> out;
  out.reserve(trees[n].size());
  for (const auto& p : trees[n]) out.push_back(OrderedTree::from_parents(p));
  return out;
}

std::size_t depth_selection_index(const Contour& c, double u) {
  check(u >= 0.0 && u <= 1.0, "selection time must lie in [0,1]");
  const std::size_t slots = c.vertex.size() - 1;  // 2n
  const double x = u * static_cast<double>(slots);
  auto lo = static_cast<std::size_t>(std::floor(x));
  if (lo > slots) lo = slots;
  std::size_t hi = lo < slots && static_cast<double>(lo) < x ? lo + 1 : lo;
  if (lo == hi) return lo;
  return c.depth[lo] >= c.depth[hi] ? lo : hi;
}

std::uint32_t select_vertex(const Contour& c, double u) {
  return c.vertex[depth_selection_index(c, u)];
}

DiscreteSubtree reduced_subtree(const OrderedTree& tree,
                                const std::vector<std::uint32_t>& leaves) {
  const std::size_t n = tree.size();
  DiscreteSubtree sub;
  sub.leaves = leaves;
  sub.member.assign(n, 0);
  sub.member[0] = 1;
  for (std::uint32_t leaf : leaves) {
    check(leaf < n, "subtree leaf out of range");
    for (std::uint32_t v = leaf; !sub.member[v]; v = tree.parent(v))
      sub.member[v] = 1;
  }
  for (std::uint32_t v = 0; v < n; ++v)
    if (sub.member[v]) sub.vertices.push_back(v);
  sub.edge_count = sub.vertices.size() - 1;

  // Preorder ids make a single forward sweep enough for the projection.
  sub.phi.assign(n, 0);
  sub.delta = 0;
  for (std::uint32_t v = 1; v < n; ++v) {
    sub.phi[v] = sub.member[v] ? v : sub.phi[tree.parent(v)];
    sub.delta = std::max(sub.delta, tree.depth(v) - tree.depth(sub.phi[v]));
  }

  sub.degree.assign(n, 0);
  for (std::uint32_t v : sub.vertices) {
    if (v == 0) continue;
    ++sub.degree[v];
    ++sub.degree[tree.parent(v)];
  }
  return sub;
}

double AtomicMeasure::total() const {
  double s = 0.0;
  for (double m : mass) s += m;
  return s;
}

AtomicMeasure uniform_vertex_measure(const OrderedTree& tree) {
  AtomicMeasure mu;
  const std::size_t n = tree.size();
  mu.support.resize(n);
  std::iota(mu.support.begin(), mu.support.end(), 0u);
  mu.mass.assign(n, 1.0 / static_cast<double>(n));
  return mu;
}

AtomicMeasure stationary_measure(const DiscreteSubtree& sub) {
  AtomicMeasure nu;
  nu.support = sub.vertices;
  nu.mass.reserve(nu.support.size());
  for (std::uint32_t v : nu.support)
    nu.mass.push_back(static_cast<double>(sub.degree[v]) / 2.0);
  return nu;
}

AtomicMeasure pushforward_measure(const AtomicMeasure& mu,
                                  const DiscreteSubtree& sub) {
  std::vector<double> acc(sub.phi.size(), 0.0);
  for (std::size_t i = 0; i < mu.support.size(); ++i) {
    check(mu.support[i] < sub.phi.size(), "measure support outside the host tree");
    acc[sub.phi[mu.support[i]]] += mu.mass[i];
  }
  AtomicMeasure out;
  out.support = sub.vertices;
  out.mass.reserve(out.support.size());
  for (std::uint32_t v : out.support) out.mass.push_back(acc[v]);
  return out;
}

std::vector<std::uint32_t> pushforward_counts(const OrderedTree& tree,
                                              const DiscreteSubtree& sub) {
  std::vector<std::uint32_t> counts(tree.size(), 0);
  for (std::uint32_t v = 0; v < tree.size(); ++v) ++counts[sub.phi[v]];
  return counts;
}

void write_tree_json(const OrderedTree& tree, const std::string& path) {
  nlohmann::json j;
  j["n"] = tree.size();
  j["parent"] = tree.to_parents();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

OrderedTree read_tree_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  std::vector<int> parent = j.at("parent").get<std::vector<int>>();
  if (j.contains("n") && j["n"].get<std::size_t>() != parent.size())
    throw std::runtime_error("tree size does not match parent array in " + path);
  return OrderedTree::from_parents(parent);
}

}  // namespace treelab
