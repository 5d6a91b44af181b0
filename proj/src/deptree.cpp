#include "treesrl/deptree.hpp"

#include <deque>

namespace treesrl {

const char* to_string(SyntaxSource s) {
  return s == SyntaxSource::gold ? "gold" : "predicted";
}

SyntaxSource syntax_source_from_string(const std::string& s) {
  if (s == "gold") return SyntaxSource::gold;
  if (s == "pred" || s == "predicted") return SyntaxSource::predicted;
  throw usage_error("unknown syntax source '" + s + "' (expected gold|predicted)");
}

DepTree DepTree::from_sentence(const Sentence& sent, SyntaxSource source) {
  std::vector<int> parent(static_cast<std::size_t>(sent.size()) + 1, 0);
  for (const Token& t : sent.tokens)
    parent[static_cast<std::size_t>(t.id)] =
        source == SyntaxSource::gold ? t.head : t.phead;
  return from_parents(std::move(parent));
}

DepTree DepTree::from_parents(std::vector<int> parent) {
  DepTree tree;
  const int n = static_cast<int>(parent.size()) - 1;
  parent[0] = 0;
  for (int i = 1; i <= n; ++i) {
    int p = parent[static_cast<std::size_t>(i)];
    if (p < 0 || p > n)
      throw data_error("token " + std::to_string(i) + ": head " + std::to_string(p) +
                       " out of range");
    if (p == i) throw data_error("token " + std::to_string(i) + " is its own head");
  }
  tree.parent_ = std::move(parent);
  tree.children_.assign(static_cast<std::size_t>(n) + 1, {});
  for (int i = 1; i <= n; ++i)
    tree.children_[static_cast<std::size_t>(tree.parent_[static_cast<std::size_t>(i)])]
        .push_back(i);
  tree.depth_.assign(static_cast<std::size_t>(n) + 1, -1);
  tree.depth_[0] = 0;
  std::deque<int> queue{0};
  while (!queue.empty()) {
    int node = queue.front();
    queue.pop_front();
    for (int c : tree.children_[static_cast<std::size_t>(node)]) {
      tree.depth_[static_cast<std::size_t>(c)] = tree.depth_[static_cast<std::size_t>(node)] + 1;
      queue.push_back(c);
    }
  }
  for (int i = 1; i <= n; ++i)
    if (tree.depth_[static_cast<std::size_t>(i)] < 0)
      throw data_error("cycle detected at token " + std::to_string(i));
  return tree;
}

DistanceTuple DepTree::distance(int pred, int arg) const {
  int p = pred, a = arg;
  int dp = 0, da = 0;
  while (depth(p) > depth(a)) {
    p = parent(p);
    ++dp;
  }
  while (depth(a) > depth(p)) {
    a = parent(a);
    ++da;
  }
  while (p != a) {
    p = parent(p);
    a = parent(a);
    ++dp;
    ++da;
  }
  return {dp, da};
}

bool DepTree::in_subtree(int node, int root) const {
  while (true) {
    if (node == root) return true;
    if (node == 0) return false;
    node = parent(node);
  }
}

}  // namespace treesrl
