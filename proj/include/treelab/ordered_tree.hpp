#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace treelab {

// Rooted ordered tree. Vertex ids are canonical depth-first preorder (so a
// parent's id is always smaller than its children's), the root is 0, and
// children keep their planted order. Two trees are equal iff their parent
// arrays coincide.
class OrderedTree {
 public:
  static constexpr std::uint32_t kNoParent = 0xffffffffu;

  // parent[v] = -1 for the root; children of a vertex are ordered by id.
  // Ids are relabeled to canonical preorder if they are not already.
  static OrderedTree from_parents(const std::vector<int>& parent);

  static OrderedTree single_vertex();

  std::size_t size() const { return parent_.size(); }
  std::uint32_t parent(std::uint32_t v) const { return parent_[v]; }
  std::uint32_t depth(std::uint32_t v) const { return depth_[v]; }
  std::span<const std::uint32_t> children(std::uint32_t v) const {
    return {children_flat_.data() + child_begin_[v],
            child_begin_[v + 1] - child_begin_[v]};
  }
  std::size_t degree(std::uint32_t v) const {
    return children(v).size() + (v == 0 ? 0 : 1);
  }
  std::vector<int> to_parents() const;

  bool operator==(const OrderedTree& o) const { return parent_ == o.parent_; }

 private:
  OrderedTree() = default;
  void build_index();
  std::vector<std::uint32_t> parent_;  // kNoParent at the root
  std::vector<std::uint32_t> depth_;
  std::vector<std::uint32_t> children_flat_;
  std::vector<std::uint32_t> child_begin_;
};

// Contour (depth-first) encoding. Index i runs over 0..2n: the tour proper
// occupies 0..2(n-1), the remaining slots repeat the root at depth zero so
// that the depth-selection rule sees exactly one flat cell per vertex-law
// unit at the root.
struct Contour {
  std::vector<std::uint32_t> vertex;
  std::vector<std::uint32_t> depth;
  std::size_t tree_size() const { return vertex.empty() ? 0 : vertex.size() / 2; }
};

Contour contour_and_depth(const OrderedTree& tree);

// Inverse of contour_and_depth on depth arrays; rejects arrays that are not
// the padded contour of some ordered tree.
OrderedTree tree_from_depth(const std::vector<std::uint32_t>& depth);

// All ordered trees on n vertices, generated independently of the contour
// machinery (direct recursive planting).
std::vector<OrderedTree> enumerate_ordered_trees(std::size_t n);

// Depth-selection rule: maps u in [0,1] to a contour grid index; the floor
// index wins ties and descents, the ceiling index wins ascents.
std::size_t depth_selection_index(const Contour& c, double u);
std::uint32_t select_vertex(const Contour& c, double u);

// Reduced subtree: union of root paths to the chosen leaves. Vertex set is
// parent-closed; degrees and the projection map live on the host ids.
struct DiscreteSubtree {
  std::vector<std::uint32_t> vertices;    // sorted host ids
  std::vector<std::uint8_t> member;       // host-sized membership flags
  std::vector<std::uint32_t> phi;         // host id -> nearest subtree id on the root path
  std::vector<std::uint32_t> degree;      // host-sized; degree within the subtree
  std::vector<std::uint32_t> leaves;      // defining vertices, in given order
  std::uint32_t delta = 0;                // max_v d(v, phi(v))
  std::size_t edge_count = 0;             // total length in unit edges
};

DiscreteSubtree reduced_subtree(const OrderedTree& tree,
                                const std::vector<std::uint32_t>& leaves);

// Atomic measure on vertex ids.
struct AtomicMeasure {
  std::vector<std::uint32_t> support;  // sorted, unique
  std::vector<double> mass;
  double total() const;
};

AtomicMeasure uniform_vertex_measure(const OrderedTree& tree);

// nu: mass deg(x)/2 at each subtree vertex; total equals edge_count.
AtomicMeasure stationary_measure(const DiscreteSubtree& sub);

// Pushforward through the projection map. The integer-count variant feeds
// the exact clock arithmetic in the walk module.
AtomicMeasure pushforward_measure(const AtomicMeasure& mu,
                                  const DiscreteSubtree& sub);
std::vector<std::uint32_t> pushforward_counts(const OrderedTree& tree,
                                              const DiscreteSubtree& sub);

void write_tree_json(const OrderedTree& tree, const std::string& path);
OrderedTree read_tree_json(const std::string& path);

}  // namespace treelab
