#ifndef TREESRL_SYNTH_HPP
#define TREESRL_SYNTH_HPP

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "treesrl/conll.hpp"
#include "treesrl/deptree.hpp"

namespace treesrl {

// Generator settings. Roles are assigned as a fixed function of the argument
// POS tag and the distance tuple, and predicate senses as a fixed function of
// the predicate lemma, so generated corpora are learnable rather than pure
// noise. Gold and predicted syntax columns are identical unless pred_noise
// rewires a fraction of PHEAD links.
struct SynthConfig {
  std::uint64_t seed = 1;
  int n_sentences = 100;
  int min_len = 2;
  int max_len = 12;
  std::vector<std::string> roles = {"A0", "A1", "A2", "AM"};
  std::vector<std::pair<DistanceTuple, double>> tuple_distribution = {{{0, 1}, 1.0}};
  double predicate_rate = 0.25;  // per-token predicate probability (min one per sentence)
  int min_args = 1;
  int max_args = 2;
  double pred_noise = 0.0;  // fraction of PHEAD links rewired away from HEAD
  int vocab_words = 60;
  int n_senses = 3;
  int max_retries = 64;
};

// Ground truth recorded during generation; tuple_counts refers to the gold
// syntax the arguments were placed on.
struct SynthTruth {
  CorpusStats stats;
  std::map<std::pair<int, int>, std::int64_t> tuple_counts;
};

// Deterministic in cfg.seed. Trees are random single-rooted attachment trees
// (projective or not); arguments are placed at positions whose distance tuple
// is drawn from cfg.tuple_distribution. A drawn tuple with no free slot is
// redrawn; a sentence that cannot host the distribution at all is resampled,
// and after cfg.max_retries failed sentences generation stops with an error.
std::pair<Corpus, SynthTruth> synth_corpus(const SynthConfig& cfg);

}  // namespace treesrl

#endif
