#ifndef TREESRL_DEPTREE_HPP
#define TREESRL_DEPTREE_HPP

#include <vector>

#include "treesrl/conll.hpp"

namespace treesrl {

enum class SyntaxSource { gold, predicted };

const char* to_string(SyntaxSource s);
SyntaxSource syntax_source_from_string(const std::string& s);

// Relative position of a candidate argument w.r.t. a predicate: hop counts
// from each to their nearest common ancestor. (0,1) means the predicate is
// the candidate's parent; (0,0) means predicate == candidate.
struct DistanceTuple {
  int pred_hops = 0;
  int arg_hops = 0;

  bool operator==(const DistanceTuple&) const = default;
  bool operator<(const DistanceTuple& o) const {
    return pred_hops != o.pred_hops ? pred_hops < o.pred_hops : arg_hops < o.arg_hops;
  }
};

// Dependency tree over one sentence. Token id 0 is the artificial root (depth
// 0); sentences whose syntax attaches several tokens to 0 are handled by
// treating 0 as a shared super-root, so every pair has a finite tuple.
class DepTree {
public:
  // Builds from the chosen syntax columns (HEAD or PHEAD) and validates:
  // out-of-range heads and cycles are reported with the offending token.
  static DepTree from_sentence(const Sentence& sent, SyntaxSource source);
  static DepTree from_parents(std::vector<int> parent);  // parent[0] ignored

  int size() const { return static_cast<int>(parent_.size()) - 1; }
  int parent(int id) const { return parent_[static_cast<std::size_t>(id)]; }
  int depth(int id) const { return depth_[static_cast<std::size_t>(id)]; }
  const std::vector<int>& children(int id) const {
    return children_[static_cast<std::size_t>(id)];
  }

  // Nearest-common-ancestor walk by depth equalization; ancestor-or-self
  // semantics, so distance(p, p) == (0,0).
  DistanceTuple distance(int pred, int arg) const;

  // True if `node` lies in the subtree rooted at `root` (inclusive).
  bool in_subtree(int node, int root) const;

private:
  std::vector<int> parent_;                 // index 0 unused (root)
  std::vector<int> depth_;                  // depth_[0] == 0
  std::vector<std::vector<int>> children_;  // children_[0] = top-level tokens
};

}  // namespace treesrl

#endif
