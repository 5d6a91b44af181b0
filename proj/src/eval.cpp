#include "treesrl/eval.hpp"

#include <sstream>

namespace treesrl {

std::string ScoreReport::machine_line() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << precision() << '\t' << recall() << '\t' << f1() << '\t' << pd_accuracy();
  return os.str();
}

ScoreReport& ScoreReport::operator+=(const ScoreReport& o) {
  correct += o.correct;
  predicted += o.predicted;
  gold += o.gold;
  pd_correct += o.pd_correct;
  pd_total += o.pd_total;
  pd_skipped += o.pd_skipped;
  return *this;
}

namespace {

void check_aligned(const Corpus& gold, const Corpus& pred) {
  if (gold.size() != pred.size())
    throw data_error("corpora differ in sentence count: gold " + std::to_string(gold.size()) +
                     " vs predicted " + std::to_string(pred.size()));
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const std::string at = "sentence " + std::to_string(s + 1);
    if (gold[s].size() != pred[s].size())
      throw data_error(at + ": token count mismatch (gold " + std::to_string(gold[s].size()) +
                       " vs predicted " + std::to_string(pred[s].size()) + ")");
    if (gold[s].predicates != pred[s].predicates)
      throw data_error(at + ": predicate positions differ between gold and predicted");
  }
}

// Arc and sense items for one sentence pair.
ScoreReport score_sentence(const Sentence& g, const Sentence& p, bool include_senses) {
  ScoreReport r;
  for (std::size_t slot = 0; slot < g.predicates.size(); ++slot) {
    for (int id = 1; id <= g.size(); ++id) {
      const bool ga = g.token(id).is_argument_of(slot);
      const bool pa = p.token(id).is_argument_of(slot);
      if (ga) ++r.gold;
      if (pa) ++r.predicted;
      if (ga && pa && g.token(id).apreds[slot] == p.token(id).apreds[slot]) ++r.correct;
    }
    if (include_senses) {
      const std::string& gs = g.token(g.predicates[slot]).pred_sense;
      const std::string& ps = p.token(p.predicates[slot]).pred_sense;
      if (gs.empty()) {
        ++r.pd_skipped;
        continue;
      }
      ++r.gold;
      ++r.pd_total;
      if (!ps.empty()) ++r.predicted;
      if (ps == gs) {
        ++r.correct;
        ++r.pd_correct;
      }
    }
  }
  return r;
}

}  // namespace

ScoreReport score(const Corpus& gold, const Corpus& pred, bool include_senses, int threads) {
  check_aligned(gold, pred);
  return parallel_chunks<ScoreReport>(
      gold.size(), threads,
      [&](std::size_t lo, std::size_t hi) {
        ScoreReport acc;
        for (std::size_t s = lo; s < hi; ++s)
          acc += score_sentence(gold[s], pred[s], include_senses);
        return acc;
      },
      [](ScoreReport& a, const ScoreReport& b) { a += b; });
}

double pd_accuracy(const Corpus& gold, const Corpus& pred) {
  check_aligned(gold, pred);
  ScoreReport r;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const Sentence& g = gold[s];
    const Sentence& p = pred[s];
    for (std::size_t slot = 0; slot < g.predicates.size(); ++slot) {
      const std::string& gs = g.token(g.predicates[slot]).pred_sense;
      if (gs.empty()) {
        ++r.pd_skipped;
        continue;
      }
      ++r.pd_total;
      if (p.token(p.predicates[slot]).pred_sense == gs) ++r.pd_correct;
    }
  }
  return r.pd_accuracy();
}

void merge_senses(Corpus& into, const Corpus& senses) {
  check_aligned(senses, into);
  for (std::size_t s = 0; s < into.size(); ++s)
    for (int pid : into[s].predicates)
      into[s].token(pid).pred_sense = senses[s].token(pid).pred_sense;
}

std::string human_report(const ScoreReport& r) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  os << "labeled precision: " << r.precision() << " (" << r.correct << "/" << r.predicted
     << ")\n";
  os << "labeled recall:    " << r.recall() << " (" << r.correct << "/" << r.gold << ")\n";
  os << "labeled F1:        " << r.f1() << "\n";
  if (r.pd_total > 0)
    os << "predicate disambiguation: " << r.pd_accuracy() << " (" << r.pd_correct << "/"
       << r.pd_total << ")\n";
  if (r.pd_skipped > 0)
    os << "predicates skipped (empty gold sense): " << r.pd_skipped << "\n";
  return os.str();
}

}  // namespace treesrl
