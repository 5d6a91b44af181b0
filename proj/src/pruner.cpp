#include "treesrl/pruner.hpp"

#include <algorithm>

#include "treesrl/ruleset.hpp"

namespace treesrl {

bool PruneMask::is_retained(int id) const {
  return std::binary_search(retained.begin(), retained.end(), id);
}

PruneMask prune(const DepTree& tree, int predicate, const RuleSet& rules) {
  rules.active_k();
  PruneMask mask;
  mask.predicate = predicate;
  for (int a = 1; a <= tree.size(); ++a)
    if (a == predicate || rules.contains(tree.distance(predicate, a)))
      mask.retained.push_back(a);
  return mask;
}

PruneMask prune_korder(const DepTree& tree, int predicate, int order) {
  if (order < 0) throw usage_error("k-order pruning needs order >= 0");
  PruneMask mask;
  mask.predicate = predicate;
  for (int a = 1; a <= tree.size(); ++a)
    if (a == predicate || tree.distance(predicate, a).arg_hops <= order)
      mask.retained.push_back(a);
  return mask;
}

PruneReport& PruneReport::operator+=(const PruneReport& o) {
  pairs_total += o.pairs_total;
  pairs_retained += o.pairs_retained;
  gold_args_total += o.gold_args_total;
  gold_args_retained += o.gold_args_retained;
  for (const auto& [t, n] : o.lost_by_tuple) lost_by_tuple[t] += n;
  return *this;
}

PruneReport prune_stats(const Corpus& corpus, PruneMode mode, const RuleSet* rules, int korder,
                        SyntaxSource source, int threads) {
  if (mode == PruneMode::rule) {
    if (!rules) throw usage_error("prune_stats: rule mode needs a rule set");
    rules->active_k();
  }
  return parallel_chunks<PruneReport>(
      corpus.size(), threads,
      [&](std::size_t lo, std::size_t hi) {
        PruneReport rep;
        for (std::size_t i = lo; i < hi; ++i) {
          const Sentence& sent = corpus[i];
          if (sent.predicates.empty()) continue;
          DepTree tree = DepTree::from_sentence(sent, source);
          for (std::size_t j = 0; j < sent.predicates.size(); ++j) {
            int p = sent.predicates[j];
            PruneMask mask;
            switch (mode) {
              case PruneMode::rule:
                mask = prune(tree, p, *rules);
                break;
              case PruneMode::korder:
                mask = prune_korder(tree, p, korder);
                break;
              case PruneMode::none:
                for (int a = 1; a <= sent.size(); ++a) mask.retained.push_back(a);
                mask.predicate = p;
                break;
            }
            rep.pairs_total += sent.size();
            rep.pairs_retained += static_cast<std::int64_t>(mask.retained.size());
            for (const Token& t : sent.tokens)
              if (t.is_argument_of(j)) {
                ++rep.gold_args_total;
                if (mask.is_retained(t.id)) {
                  ++rep.gold_args_retained;
                } else {
                  DistanceTuple d = tree.distance(p, t.id);
                  ++rep.lost_by_tuple[{d.pred_hops, d.arg_hops}];
                }
              }
          }
        }
        return rep;
      },
      [](PruneReport& a, const PruneReport& b) { a += b; });
}

}  // namespace treesrl
