#include "evolve/mcts.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace evolve::mcts {

double uct_score(const TreeNode& parent, const TreeNode& child, double c) {
  if (child.visit_count == 0) {
    return std::numeric_limits<double>::infinity();
  }
  double exploit = child.quality_sum / child.visit_count;
  double explore = c * std::sqrt(std::max(1, parent.visit_count)) /
                   (1.0 + child.visit_count);
  return exploit + explore;
}

Tree::Tree(Node root, int expansion_rate, double exploration_c)
    : expansion_rate_(expansion_rate), exploration_c_(exploration_c) {
  if (expansion_rate < 1) {
    throw std::invalid_argument("expansion_rate must be >= 1");
  }
  TreeNode tn;
  tn.node = std::move(root);
  tn.depth = 0;
  nodes_.push_back(std::move(tn));
}

std::size_t Tree::select_leaf() const {
  std::size_t cur = root_index();
  while (true) {
    const TreeNode& n = nodes_[cur];
    if (n.children.empty() ||
        n.children.size() < static_cast<std::size_t>(expansion_rate_)) {
      return cur;
    }
    std::size_t best = n.children.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t child_idx : n.children) {
      double s = uct_score(n, nodes_[child_idx], exploration_c_);
      if (s > best_score) {
        best_score = s;
        best = child_idx;
      }
    }
    cur = best;
  }
}

std::size_t Tree::expand_and_backprop(std::size_t leaf_index, Node new_node) {
  if (leaf_index >= nodes_.size()) {
    throw std::out_of_range("expand_and_backprop: bad leaf index");
  }
  if (nodes_[leaf_index].children.size() >=
      static_cast<std::size_t>(expansion_rate_)) {
    throw std::logic_error("expand_and_backprop: leaf already at capacity");
  }
  double score = new_node.score;
  TreeNode child;
  child.node = std::move(new_node);
  child.parent = leaf_index;
  child.depth = nodes_[leaf_index].depth + 1;
  child.node.depth = child.depth;
  child.node.parent_id = nodes_[leaf_index].node.id;
  std::size_t child_index = nodes_.size();
  nodes_.push_back(std::move(child));
  nodes_[leaf_index].children.push_back(child_index);

  for (std::size_t cur = leaf_index; cur != TreeNode::kNoParent;
       cur = nodes_[cur].parent) {
    nodes_[cur].visit_count += 1;
    nodes_[cur].quality_sum += score;
  }
  return child_index;
}

std::size_t Tree::index_of(NodeId id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].node.id == id) return i;
  }
  return nodes_.size();
}

nlohmann::json Tree::snapshot() const {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    nlohmann::json entry;
    entry["id"] = n.node.id;
    if (n.parent == TreeNode::kNoParent) {
      entry["parent"] = nullptr;
    } else {
      entry["parent"] = nodes_[n.parent].node.id;
    }
    entry["visit_count"] = n.visit_count;
    entry["quality_sum"] = n.quality_sum;
    entry["score"] = n.node.score;
    entry["depth"] = n.depth;
    arr.push_back(std::move(entry));
  }
  return arr;
}

}  // namespace evolve::mcts
