#ifndef TREESRL_MODEL_HPP
#define TREESRL_MODEL_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "treesrl/checkpoint.hpp"
#include "treesrl/config.hpp"
#include "treesrl/conll.hpp"
#include "treesrl/nn.hpp"
#include "treesrl/pruner.hpp"
#include "treesrl/ruleset.hpp"

namespace treesrl {

// Vocabulary with reserved rows: word/lemma/POS id 0 = <UNK>, id 1 = <VR>.
// Labels are one contiguous space: role labels (with <NONE> at index 0) in
// [0, n_roles), sense labels in [n_roles, n_labels). Softmax at scoring time
// is restricted to the partition the pair belongs to.
struct Vocab {
  static constexpr const char* kUnk = "<UNK>";
  static constexpr const char* kVr = "<VR>";
  static constexpr const char* kNone = "<NONE>";

  std::map<std::string, int> word, lemma, pos;
  std::vector<std::string> labels;
  std::size_t n_roles = 0;
  std::map<std::string, std::size_t> label_id;

  // Training-corpus counts, used only for singleton UNK replacement; not
  // serialized into checkpoints.
  std::map<std::string, std::int64_t> word_freq, lemma_freq;

  int word_id(const std::string& s) const;
  int lemma_id(const std::string& s) const;
  int pos_id(const std::string& s) const;
  std::size_t n_words() const { return word.size() + 2; }
  std::size_t n_lemmas() const { return lemma.size() + 2; }
  std::size_t n_pos() const { return pos.size() + 2; }
  std::size_t n_labels() const { return labels.size(); }
  std::size_t n_senses() const { return labels.size() - n_roles; }

  // Role label -> id in [0, n_roles); unknown roles map to <NONE>.
  std::size_t role_id(const std::string& role) const;
  // Sense suffix -> absolute id in [n_roles, n_labels); npos when unknown.
  static constexpr std::size_t npos = std::size_t(-1);
  std::size_t sense_id(const std::string& suffix) const;

  // Senses are collected only in end-to-end mode.
  static Vocab build(const Corpus& corpus, TaskMode mode);

  std::string serialize() const;
  static Vocab deserialize(const std::string& text);
};

// Feature columns: predicted lemma/POS when present, falling back to the gold
// column when the predicted one is "_".
const std::string& feature_lemma(const Token& t);
const std::string& feature_pos(const Token& t);

// "verb.01" -> "01"; a PRED value without '.' is its own suffix.
std::string sense_suffix(const std::string& pred);

// Languages with one-to-one predicate-sense mapping; end-to-end mode refuses
// them (the <VR> pair would have a degenerate label space).
bool sense_degenerate_language(const std::string& language);

// ---- virtual root ----------------------------------------------------------

// Appends a <VR> token (head 0) for end-to-end mode; apred slots stay empty.
Sentence to_virtual_root(const Sentence& sent);
// Drops the trailing <VR> token; exact inverse of to_virtual_root.
Sentence strip_virtual_root(const Sentence& sent);

// ---- instances -------------------------------------------------------------

// One (sentence, predicate) classification problem: the pruned candidate list
// with gold role ids, plus the (<VR>, predicate) sense pair in end-to-end
// mode. Gold arguments pruned away are simply absent (excluded from loss).
struct Instance {
  int sent = 0;  // corpus index
  int pred_slot = 0;
  int predicate = 0;           // token id, in the (possibly augmented) sentence
  int vr = 0;                  // <VR> token id; 0 when role-only
  std::vector<int> candidates; // ascending token ids, <VR> excluded
  std::vector<std::size_t> gold;  // per candidate: role id (or <NONE>)
  std::size_t gold_sense = 0;     // absolute label id; valid when vr > 0
};

// corpus must already be augmented when cfg.mode is end_to_end.
std::vector<Instance> build_instances(const Corpus& corpus, const RunConfig& cfg,
                                      const Vocab& vocab, const RuleSet* rules);

// ---- external contextual embeddings ----------------------------------------

struct ExternalEmbeddings {
  int dim = 0;
  std::vector<std::vector<Vec>> sent;  // [sentence][token]
};

// File format: "#dim=D #sentences=S", then per sentence "#sent i n_tokens"
// followed by n_tokens lines of D floats. Token counts must match the corpus
// exactly; mismatches name the sentence/token.
ExternalEmbeddings load_external_embeddings(const std::string& path, const Corpus& corpus);
void write_external_embeddings(const ExternalEmbeddings& ext, std::ostream& out);

// ---- model -----------------------------------------------------------------

int rep_dim(const RunConfig& cfg);

// All parameter tensors for the configured architecture, freshly initialized:
// embeddings U(-0.1, 0.1), LSTM/affine weights Xavier-uniform, biases zero
// except the LSTM forget gate (1.0). The pretrained table is frozen unless
// cfg.finetune_pretrained.
ModelParams init_params(const RunConfig& cfg, const Vocab& vocab, Rng& rng);

struct InstanceScores {
  std::vector<Vec> cand;  // per candidate, n_labels wide (role range used)
  Vec vr;                 // sense scores for the (<VR>, predicate) pair; empty if none
};

struct ForwardCache {
  std::vector<Vec> inputs;
  std::vector<int> wid, lid, pid;  // embedding rows used per token (after UNK dropout)
  BiLstmCache lstm;
  std::vector<Vec> h;
  Vec hp_pre, hp, hp_mask;
  std::vector<Vec> ha_pre, ha, ha_mask;
  Vec vrp_pre, vrp, vrp_mask;  // head MLP applied to the <VR> state
  InstanceScores scores;
};

// ctx: per-token contextual vectors of the ORIGINAL sentence (the <VR> token
// gets zeros); required iff cfg.contextual_dim > 0.
InstanceScores forward_instance(const RunConfig& cfg, const Vocab& vocab,
                                const ModelParams& params, const Sentence& sent,
                                const Instance& inst, const std::vector<Vec>* ctx, bool train,
                                Rng* rng, ForwardCache* cache);

// Summed cross-entropy over candidates (+ the sense pair in end-to-end mode).
// With grads != nullptr runs the full backward pass and accumulates.
double instance_loss(const RunConfig& cfg, const Vocab& vocab, const ModelParams& params,
                     const Sentence& sent, const Instance& inst, const std::vector<Vec>* ctx,
                     bool train, Rng* rng, GradMap* grads,
                     std::size_t* n_items = nullptr);

struct Arc {
  int arg = 0;
  std::string role;
};

struct Frame {
  int predicate = 0;
  std::vector<Arc> arcs;   // <NONE> suppressed
  std::string sense;       // sense suffix; empty when not predicted
};

// Per-candidate argmax over the role partition, ties to the lowest label id;
// sense argmax over the sense partition when present.
Frame decode_instance(const Vocab& vocab, const Instance& inst, const InstanceScores& scores);

// ---- training and prediction -----------------------------------------------

struct TrainLogRow {
  int epoch = 0;
  double loss = 0.0;        // mean per scored item
  std::int64_t items = 0;   // scored (pair, label) items this epoch
  bool has_dev = false;
  double dev_f1 = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // best dev F1; final parameters when no dev set
  double best_f1 = -1.0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::vector<TrainLogRow> log;
};

// Seeded, deterministic (for a fixed config) training loop: shuffled batches,
// Adam, periodic dev evaluation, best-dev checkpoint. Per-instance dropout
// RNG is derived from (seed, epoch, instance), so results do not depend on
// --threads. Throws numeric_error with epoch/batch context on divergence.
TrainResult train_model(const RunConfig& cfg, Corpus train, const Corpus* dev,
                        const RuleSet* rules, const ExternalEmbeddings* train_ctx,
                        const ExternalEmbeddings* dev_ctx, std::ostream* log);

// Fills the APRED block (and in end-to-end mode the PRED column, reconstructed
// as feature-lemma + "." + sense suffix) of a copy of `input`.
Corpus predict_corpus(const RunConfig& cfg, const Vocab& vocab, const ModelParams& params,
                      const Corpus& input, const RuleSet* rules, const ExternalEmbeddings* ctx,
                      int threads = 1);

// Checkpoint plumbing: config + "vocab" + "rules" sections.
Checkpoint make_checkpoint(const RunConfig& cfg, const Vocab& vocab, const ModelParams& params,
                           const RuleSet* rules);
void unpack_checkpoint(const Checkpoint& ckpt, RunConfig& cfg, Vocab& vocab,
                       ModelParams& params, RuleSet* rules, bool* has_rules);

// Worst relative error of the analytic gradient vs central finite differences
// on a synthetic instance built from cfg (dropout off).
double pipeline_grad_check(const RunConfig& cfg, int n_sentences, int samples, double step);

}  // namespace treesrl

#endif
