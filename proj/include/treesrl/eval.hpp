#ifndef TREESRL_EVAL_HPP
#define TREESRL_EVAL_HPP

#include <cstdint>
#include <string>

#include "treesrl/conll.hpp"

namespace treesrl {

// Labeled precision/recall/F1 over semantic arcs, CoNLL-2009 convention: an
// item is one (predicate, argument, role) arc, plus one (predicate, sense)
// item per predicate when senses are included. Matching is exact string
// comparison, case-sensitive.
struct ScoreReport {
  std::int64_t correct = 0;
  std::int64_t predicted = 0;
  std::int64_t gold = 0;
  std::int64_t pd_correct = 0;
  std::int64_t pd_total = 0;
  std::int64_t pd_skipped = 0;  // predicates with empty gold sense (diagnostic)

  double precision() const { return predicted == 0 ? 0.0 : double(correct) / double(predicted); }
  double recall() const { return gold == 0 ? 0.0 : double(correct) / double(gold); }
  double f1() const {
    double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  double pd_accuracy() const { return pd_total == 0 ? 0.0 : double(pd_correct) / double(pd_total); }

  // Machine-readable line: P<TAB>R<TAB>F1<TAB>PD
  std::string machine_line() const;

  ScoreReport& operator+=(const ScoreReport& o);
};

// Scores `pred` against `gold`. The corpora must be sentence-aligned with
// identical token counts and predicate positions; misalignment is reported
// with the (1-based) sentence index. Predicates whose gold sense is empty are
// skipped from the sense items and tallied in pd_skipped.
ScoreReport score(const Corpus& gold, const Corpus& pred, bool include_senses, int threads = 1);

// Fraction of predicates whose predicted sense exactly matches gold.
double pd_accuracy(const Corpus& gold, const Corpus& pred);

// Overwrites `into`'s PRED column from an aligned sense source corpus (the
// "combine the predicate sense output of previous work" workflow).
void merge_senses(Corpus& into, const Corpus& senses);

std::string human_report(const ScoreReport& r);

}  // namespace treesrl

#endif
