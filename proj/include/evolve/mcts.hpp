#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "evolve/domain.hpp"
#include "json.hpp"

namespace evolve::mcts {

// Search-tree entry wrapping one evaluated candidate. `visit_count` and
// `quality_sum` track backpropagated statistics; the node's own score lives
// in node.score and is not folded into quality_sum until a descendant (or
// this node itself) routes an evaluation through it.
struct TreeNode {
  Node node;
  int visit_count = 0;
  double quality_sum = 0.0;
  std::vector<std::size_t> children;  // indices, insertion order
  std::size_t parent = kNoParent;
  int depth = 0;

  static constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);
};

// UCT selection score; +infinity for unvisited children.
double uct_score(const TreeNode& parent, const TreeNode& child, double c);

class Tree {
 public:
  Tree(Node root, int expansion_rate, double exploration_c);

  // Descends from the root by argmax UCT until reaching a node with spare
  // child capacity (fewer children than the expansion rate) or no children.
  // Ties break toward the earliest-inserted child.
  std::size_t select_leaf() const;

  // Inserts `new_node` under `leaf_index` and adds (+1, +score) to every
  // node on the path leaf..root.
  std::size_t expand_and_backprop(std::size_t leaf_index, Node new_node);

  const TreeNode& at(std::size_t index) const { return nodes_.at(index); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t root_index() const { return 0; }
  int expansion_rate() const { return expansion_rate_; }
  double exploration_c() const { return exploration_c_; }

  // Finds the tree index holding the given node id; size() when absent.
  std::size_t index_of(NodeId id) const;

  nlohmann::json snapshot() const;

 private:
  std::vector<TreeNode> nodes_;
  int expansion_rate_;
  double exploration_c_;
};

}  // namespace evolve::mcts
