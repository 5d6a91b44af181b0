#ifndef TREESRL_PRUNER_HPP
#define TREESRL_PRUNER_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "treesrl/conll.hpp"
#include "treesrl/deptree.hpp"

namespace treesrl {

class RuleSet;

// Candidate set for one predicate after pruning. The predicate itself is
// always retained, whatever the rule says.
struct PruneMask {
  int predicate = 0;
  std::vector<int> retained;  // ascending token ids

  bool is_retained(int id) const;
};

// Keeps the predicate plus every token whose distance tuple is in the active
// rule prefix.
PruneMask prune(const DepTree& tree, int predicate, const RuleSet& rules);

// Baseline: keeps the predicate plus every token within `order` hops of its
// nearest common ancestor with the predicate (arg_hops <= order).
PruneMask prune_korder(const DepTree& tree, int predicate, int order);

enum class PruneMode { rule, korder, none };

struct PruneReport {
  std::int64_t pairs_total = 0;
  std::int64_t pairs_retained = 0;
  std::int64_t gold_args_total = 0;
  std::int64_t gold_args_retained = 0;
  std::map<std::pair<int, int>, std::int64_t> lost_by_tuple;

  double reduction() const {
    return pairs_total == 0 ? 0.0 : 1.0 - double(pairs_retained) / double(pairs_total);
  }
  double recall() const {
    return gold_args_total == 0 ? 0.0 : double(gold_args_retained) / double(gold_args_total);
  }
  // Fraction of candidate pairs that are gold arguments (before pruning).
  double positive_rate() const {
    return pairs_total == 0 ? 0.0 : double(gold_args_total) / double(pairs_total);
  }

  PruneReport& operator+=(const PruneReport& o);
};

// Aggregate retained/total pair counts and gold-argument recall over a
// corpus. mode=none reports the unpruned candidate space (positives rate).
PruneReport prune_stats(const Corpus& corpus, PruneMode mode, const RuleSet* rules,
                        int korder, SyntaxSource source, int threads = 1);

}  // namespace treesrl

#endif
