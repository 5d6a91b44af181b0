#ifndef TREESRL_CONFIG_HPP
#define TREESRL_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "treesrl/deptree.hpp"
#include "treesrl/pruner.hpp"

namespace treesrl {

enum class TaskMode { role_only, end_to_end };

const char* to_string(TaskMode m);
TaskMode task_mode_from_string(const std::string& s);
const char* to_string(PruneMode m);
PruneMode prune_mode_from_string(const std::string& s);

// Every knob of the model and the training loop. Serialized into rule files,
// checkpoints and score reports so each artifact records how it was made.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string language = "xx";
  SyntaxSource syntax = SyntaxSource::predicted;
  TaskMode mode = TaskMode::role_only;
  PruneMode prune = PruneMode::rule;
  int korder = 10;

  // word representation
  int word_dim = 100;
  int lemma_dim = 100;
  int pos_dim = 100;
  int pretrained_dim = 100;
  int indicator_dim = 16;
  int contextual_dim = 0;  // 0 = contextual feature off
  bool use_pos = true;     // --no-pos drops the POS block
  bool use_lemma = true;   // --no-lemma drops the lemma block
  bool finetune_pretrained = false;

  // encoder and scorer
  int lstm_layers = 3;
  int lstm_hidden = 400;
  int mlp_dim = 300;
  double lstm_keep = 0.8;  // dropout keep probability, time-steps and layers
  double mlp_keep = 0.8;

  // training
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 500;
  int batch_size = 64;
  int eval_every = 10;        // dev evaluation cadence, in epochs
  double early_stop_f1 = 0.0; // stop once dev F1 reaches this; 0 disables
  double unk_prob = 0.1;      // singleton replacement probability

  // Serialization is "key = value" per line, sorted by key.
  std::string serialize() const;
  static RunConfig deserialize(const std::string& text);

  // Reads a config file of "key = value" lines ('#' comments allowed);
  // unknown keys are rejected. Applied on top of the current values.
  void apply_file(const std::string& path);
  void apply_line(const std::string& key, const std::string& value);

  // Keys that must match between a checkpoint and the flags at predict time.
  static const std::vector<std::string>& architecture_keys();
};

}  // namespace treesrl

#endif
