// treesrl: one binary, subcommand per pipeline stage. Every run is seeded and
// config-driven; reports and rule files embed the producing config as
// "#config:" lines so artifacts are self-describing.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "treesrl/checkpoint.hpp"
#include "treesrl/config.hpp"
#include "treesrl/conll.hpp"
#include "treesrl/deptree.hpp"
#include "treesrl/eval.hpp"
#include "treesrl/model.hpp"
#include "treesrl/pruner.hpp"
#include "treesrl/ruleset.hpp"
#include "treesrl/synth.hpp"

namespace {

using namespace treesrl;

// Common config plumbing: --config file first, then --set pairs, then typed
// flags (typed flags win).
struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> language, syntax, mode, prune;
  std::optional<int> korder, epochs, batch_size, eval_every;
  std::optional<int> lstm_hidden, lstm_layers, mlp_dim;
  std::optional<double> lr, early_stop_f1;
  bool no_pos = false, no_lemma = false, finetune_pretrained = false;
};

void add_config_options(CLI::App* sub, ConfigArgs& a, bool training_flags) {
  sub->add_option("--config", a.config_file, "config file of 'key = value' lines");
  sub->add_option("--set", a.sets, "override any config key, e.g. --set lr=1e-3")
      ->type_name("KEY=VALUE");
  sub->add_option("--seed", a.seed, "RNG seed");
  sub->add_option("--threads", a.threads, "worker threads (default 1, bit-reproducible)");
  sub->add_option("--language", a.language, "language code recorded in artifacts");
  sub->add_option("--syntax", a.syntax, "syntax columns: gold|predicted");
  if (training_flags) {
    sub->add_option("--mode", a.mode, "role-only|end-to-end");
    sub->add_option("--prune", a.prune, "rule|korder|none");
    sub->add_option("--korder", a.korder, "order for korder pruning");
    sub->add_option("--epochs", a.epochs);
    sub->add_option("--batch-size", a.batch_size);
    sub->add_option("--eval-every", a.eval_every, "dev evaluation cadence (epochs)");
    sub->add_option("--hidden", a.lstm_hidden, "LSTM hidden size per direction");
    sub->add_option("--layers", a.lstm_layers, "BiLSTM layers");
    sub->add_option("--mlp-dim", a.mlp_dim, "ReLU head width");
    sub->add_option("--lr", a.lr, "Adam learning rate");
    sub->add_option("--early-stop-f1", a.early_stop_f1, "stop once dev F1 reaches this");
    sub->add_flag("--no-pos", a.no_pos, "drop the POS embedding block");
    sub->add_flag("--no-lemma", a.no_lemma, "drop the lemma embedding block");
    sub->add_flag("--finetune-pretrained", a.finetune_pretrained,
                  "update the pretrained table during training");
  }
}

RunConfig resolve_config(const ConfigArgs& a) {
  RunConfig cfg;
  if (!a.config_file.empty()) cfg.apply_file(a.config_file);
  for (const std::string& kv : a.sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw usage_error("--set expects KEY=VALUE, got '" + kv + "'");
    cfg.apply_line(strip(kv.substr(0, eq)), strip(kv.substr(eq + 1)));
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  if (a.language) cfg.language = *a.language;
  if (a.syntax) cfg.syntax = syntax_source_from_string(*a.syntax);
  if (a.mode) cfg.mode = task_mode_from_string(*a.mode);
  if (a.prune) cfg.prune = prune_mode_from_string(*a.prune);
  if (a.korder) cfg.korder = *a.korder;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.eval_every) cfg.eval_every = *a.eval_every;
  if (a.lstm_hidden) cfg.lstm_hidden = *a.lstm_hidden;
  if (a.lstm_layers) cfg.lstm_layers = *a.lstm_layers;
  if (a.mlp_dim) cfg.mlp_dim = *a.mlp_dim;
  if (a.lr) cfg.lr = *a.lr;
  if (a.early_stop_f1) cfg.early_stop_f1 = *a.early_stop_f1;
  if (a.no_pos) cfg.use_pos = false;
  if (a.no_lemma) cfg.use_lemma = false;
  if (a.finetune_pretrained) cfg.finetune_pretrained = true;
  return cfg;
}

std::vector<std::string> config_lines(const RunConfig& cfg) {
  std::vector<std::string> out;
  std::istringstream in(cfg.serialize());
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::string config_banner(const RunConfig& cfg) {
  std::string out;
  for (const std::string& line : config_lines(cfg)) out += "#config:" + line + "\n";
  return out;
}

void emit_report(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw data_error("cannot write file: " + out_path);
  out << text;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

// ---- subcommand bodies -----------------------------------------------------

void run_validate(const std::string& path) {
  Corpus corpus = parse_conll09_file(path);
  CorpusStats st = corpus_stats(corpus);
  std::cout << "ok sentences=" << st.n_sentences << " tokens=" << st.n_tokens
            << " predicates=" << st.n_predicates << " arguments=" << st.n_arguments << "\n";
}

void run_stats(const std::string& path, const ConfigArgs& args, const std::string& out_path) {
  RunConfig cfg = resolve_config(args);
  Corpus corpus = parse_conll09_file(path);
  CorpusStats st = corpus_stats(corpus, cfg.threads);
  std::ostringstream os;
  os << config_banner(cfg);
  os << "sentences=" << st.n_sentences << "\ntokens=" << st.n_tokens
     << "\npredicates=" << st.n_predicates << "\narguments=" << st.n_arguments << "\n";
  emit_report(os.str(), out_path);
}

struct SynthArgs {
  std::string out, truth;
  SynthConfig cfg;
  std::string roles = "A0,A1,A2,AM";
  std::string tuples = "0:1=0.5,1:2=0.3,0:2=0.2";
};

void run_synth(SynthArgs& a) {
  a.cfg.roles = split(a.roles, ',');
  for (std::string& r : a.cfg.roles) r = strip(r);
  a.cfg.tuple_distribution.clear();
  for (const std::string& part : split(a.tuples, ',')) {
    std::size_t colon = part.find(':'), eq = part.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon)
      throw usage_error("--tuples expects DP:DA=WEIGHT list, got '" + part + "'");
    try {
      DistanceTuple t{std::stoi(part.substr(0, colon)),
                      std::stoi(part.substr(colon + 1, eq - colon - 1))};
      a.cfg.tuple_distribution.emplace_back(t, std::stod(part.substr(eq + 1)));
    } catch (const std::exception&) {
      throw usage_error("--tuples: malformed entry '" + part + "'");
    }
  }
  auto [corpus, truth] = synth_corpus(a.cfg);
  write_conll09_file(corpus, a.out);
  std::cout << "ok sentences=" << truth.stats.n_sentences << " tokens=" << truth.stats.n_tokens
            << " predicates=" << truth.stats.n_predicates
            << " arguments=" << truth.stats.n_arguments << "\n";
  if (!a.truth.empty()) {
    std::ofstream t(a.truth, std::ios::binary);
    if (!t) throw data_error("cannot write file: " + a.truth);
    t << "#stats sentences=" << truth.stats.n_sentences << " tokens=" << truth.stats.n_tokens
      << " predicates=" << truth.stats.n_predicates
      << " arguments=" << truth.stats.n_arguments << "\n#tuples\n";
    for (const auto& [tuple, count] : truth.tuple_counts)
      t << tuple.first << '\t' << tuple.second << '\t' << count << '\n';
  }
}

void run_extract_rules(const std::string& corpus_path, const ConfigArgs& args,
                       const std::string& out_path, std::optional<std::size_t> k,
                       std::optional<double> coverage) {
  RunConfig cfg = resolve_config(args);
  if (k && coverage) throw usage_error("--k and --coverage are mutually exclusive");
  Corpus corpus = parse_conll09_file(corpus_path);
  RuleSet rules = mine_rules(corpus, cfg.syntax, cfg.language, cfg.threads);
  if (k)
    rules = select_top_k(std::move(rules), *k);
  else
    rules = select_by_coverage(std::move(rules), coverage.value_or(0.99));
  write_rules_file(rules, out_path, config_lines(cfg));
  std::cout << "ok k=" << rules.active_k() << " tuples=" << rules.entries.size()
            << " total_count=" << rules.total_count() << "\n";
}

void run_coverage(const std::string& corpus_path, const ConfigArgs& args,
                  const std::string& rules_path, std::optional<std::size_t> k,
                  const std::string& out_path) {
  RunConfig cfg = resolve_config(args);
  Corpus corpus = parse_conll09_file(corpus_path);
  RuleSet rules = read_rules_file(rules_path);
  if (k) rules.set_k(*k);
  SyntaxSource syntax = args.syntax ? cfg.syntax : rules.syntax;
  cfg.syntax = syntax;
  CoverageReport rep = rule_coverage(rules, corpus, syntax, cfg.threads);
  std::ostringstream os;
  os << config_banner(cfg);
  os << "k=" << rules.active_k() << "\ncoverage=" << fmt(rep.coverage())
     << "\nreduction=" << fmt(rep.reduction()) << "\nargs_covered=" << rep.args_covered
     << "\nargs_total=" << rep.args_total << "\npairs_retained=" << rep.pairs_retained
     << "\npairs_total=" << rep.pairs_total << "\n";
  emit_report(os.str(), out_path);
}

void run_prune_stats(const std::string& corpus_path, const ConfigArgs& args,
                     const std::string& rules_path, const std::string& out_path, int top) {
  RunConfig cfg = resolve_config(args);
  Corpus corpus = parse_conll09_file(corpus_path);
  RuleSet rules;
  bool have_rules = false;
  if (!rules_path.empty()) {
    rules = read_rules_file(rules_path);
    have_rules = true;
    if (!args.prune) cfg.prune = PruneMode::rule;
    if (!args.syntax) cfg.syntax = rules.syntax;
  }
  if (cfg.prune == PruneMode::rule && !have_rules)
    throw usage_error("prune mode 'rule' requires --rules");
  PruneReport rep = prune_stats(corpus, cfg.prune, have_rules ? &rules : nullptr, cfg.korder,
                                cfg.syntax, cfg.threads);
  std::ostringstream os;
  os << config_banner(cfg);
  os << "pairs_total=" << rep.pairs_total << "\npairs_retained=" << rep.pairs_retained
     << "\nreduction=" << fmt(rep.reduction()) << "\ngold_args_total=" << rep.gold_args_total
     << "\ngold_args_retained=" << rep.gold_args_retained << "\nrecall=" << fmt(rep.recall())
     << "\npositive_rate=" << fmt(rep.positive_rate()) << "\n";
  int shown = 0;
  for (const auto& [tuple, count] : rep.lost_by_tuple) {
    if (shown++ >= top) break;
    os << "lost dp=" << tuple.first << " da=" << tuple.second << " count=" << count << "\n";
  }
  emit_report(os.str(), out_path);
}

struct TrainArgs {
  std::string train, dev, rules, model, contextual, dev_contextual;
};

void run_train(const ConfigArgs& args, const TrainArgs& t) {
  RunConfig cfg = resolve_config(args);
  Corpus train = parse_conll09_file(t.train);
  Corpus dev;
  const bool have_dev = !t.dev.empty();
  if (have_dev) dev = parse_conll09_file(t.dev);

  RuleSet rules;
  bool have_rules = false;
  if (!t.rules.empty()) {
    rules = read_rules_file(t.rules);
    have_rules = true;
  }
  if (cfg.prune == PruneMode::rule && !have_rules)
    throw usage_error("train: prune mode 'rule' requires --rules");

  ExternalEmbeddings train_ctx, dev_ctx;
  bool have_ctx = !t.contextual.empty();
  if (have_ctx) {
    train_ctx = load_external_embeddings(t.contextual, train);
    if (cfg.contextual_dim == 0)
      cfg.contextual_dim = train_ctx.dim;
    else if (cfg.contextual_dim != train_ctx.dim)
      throw usage_error("contextual_dim=" + std::to_string(cfg.contextual_dim) +
                        " but embedding file has dim " + std::to_string(train_ctx.dim));
    if (have_dev) {
      if (t.dev_contextual.empty())
        throw usage_error("train: --dev requires --dev-contextual when --contextual is set");
      dev_ctx = load_external_embeddings(t.dev_contextual, dev);
      if (dev_ctx.dim != train_ctx.dim)
        throw usage_error("train/dev contextual dimensions differ");
    }
  } else if (cfg.contextual_dim > 0) {
    throw usage_error("contextual_dim > 0 requires --contextual FILE");
  }

  TrainResult res = train_model(cfg, std::move(train), have_dev ? &dev : nullptr,
                                have_rules ? &rules : nullptr, have_ctx ? &train_ctx : nullptr,
                                have_ctx && have_dev ? &dev_ctx : nullptr, &std::cout);
  save_checkpoint_file(res.checkpoint, t.model);
  std::cout << "model=" << t.model << " epochs_run=" << res.epochs_run;
  if (res.best_epoch >= 0)
    std::cout << " best_epoch=" << res.best_epoch << " best_f1=" << fmt(res.best_f1);
  std::cout << std::endl;
}

struct PredictArgs {
  std::string model, input, out, contextual, rules;
};

void run_predict(const ConfigArgs& args, const PredictArgs& p) {
  Checkpoint ckpt = load_checkpoint_file(p.model);
  RunConfig cfg;
  Vocab vocab;
  ModelParams params;
  RuleSet rules;
  bool ckpt_rules = false;
  unpack_checkpoint(ckpt, cfg, vocab, params, &rules, &ckpt_rules);

  // Flags are applied on top of the checkpoint config, then the architecture
  // keys are verified unchanged: predict refuses a conflicting checkpoint.
  RunConfig merged = cfg;
  if (!args.config_file.empty()) merged.apply_file(args.config_file);
  for (const std::string& kv : args.sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw usage_error("--set expects KEY=VALUE, got '" + kv + "'");
    merged.apply_line(strip(kv.substr(0, eq)), strip(kv.substr(eq + 1)));
  }
  if (args.mode) merged.mode = task_mode_from_string(*args.mode);
  if (args.prune) merged.prune = prune_mode_from_string(*args.prune);
  if (args.korder) merged.korder = *args.korder;
  if (args.threads) merged.threads = *args.threads;
  if (args.seed) merged.seed = *args.seed;
  if (args.syntax) merged.syntax = syntax_source_from_string(*args.syntax);
  {
    auto values = [](const RunConfig& c) {
      std::map<std::string, std::string> m;
      std::istringstream in(c.serialize());
      std::string line;
      while (std::getline(in, line)) {
        std::size_t eq2 = line.find('=');
        m[strip(line.substr(0, eq2))] = strip(line.substr(eq2 + 1));
      }
      return m;
    };
    auto a = values(cfg), b = values(merged);
    for (const std::string& key : RunConfig::architecture_keys())
      if (a.at(key) != b.at(key))
        throw usage_error("predict: flag conflicts with checkpoint architecture: " + key +
                          " (checkpoint " + a.at(key) + ", flags " + b.at(key) + ")");
  }

  Corpus input = parse_conll09_file(p.input);

  RuleSet file_rules;
  const RuleSet* active_rules = nullptr;
  if (!p.rules.empty()) {
    file_rules = read_rules_file(p.rules);
    active_rules = &file_rules;
  } else if (ckpt_rules) {
    active_rules = &rules;
  }
  if (merged.prune == PruneMode::rule && active_rules == nullptr)
    throw usage_error("predict: prune mode 'rule' but neither checkpoint nor --rules has rules");

  ExternalEmbeddings ctx;
  const ExternalEmbeddings* ctx_ptr = nullptr;
  if (merged.contextual_dim > 0) {
    if (p.contextual.empty())
      throw usage_error("predict: model expects external embeddings (--contextual FILE)");
    ctx = load_external_embeddings(p.contextual, input);
    if (ctx.dim != merged.contextual_dim)
      throw usage_error("predict: embedding file dim " + std::to_string(ctx.dim) +
                        " != model contextual_dim " + std::to_string(merged.contextual_dim));
    ctx_ptr = &ctx;
  }

  Corpus out = predict_corpus(merged, vocab, params, input, active_rules, ctx_ptr,
                              merged.threads);
  write_conll09_file(out, p.out);
  std::cout << "ok sentences=" << out.size() << " out=" << p.out << "\n";
}

void run_evaluate(const ConfigArgs& args, const std::string& gold_path,
                  const std::string& pred_path, bool senses, const std::string& sense_file,
                  const std::string& out_path) {
  RunConfig cfg = resolve_config(args);
  Corpus gold = parse_conll09_file(gold_path);
  Corpus pred = parse_conll09_file(pred_path);
  if (!sense_file.empty()) merge_senses(pred, parse_conll09_file(sense_file));
  ScoreReport rep = score(gold, pred, senses, cfg.threads);
  std::ostringstream os;
  os << config_banner(cfg) << human_report(rep) << rep.machine_line() << "\n";
  emit_report(os.str(), out_path);
}

void run_gradcheck(const ConfigArgs& args, int sentences, int samples, double step,
                   double threshold) {
  RunConfig cfg;
  // Desk-scale defaults: small dims keep the finite-difference sweep fast while
  // still exercising every module (3-layer BiLSTM, both heads, biaffine).
  cfg.word_dim = 10;
  cfg.lemma_dim = 7;
  cfg.pos_dim = 5;
  cfg.pretrained_dim = 6;
  cfg.indicator_dim = 4;
  cfg.lstm_hidden = 9;
  cfg.mlp_dim = 8;
  for (const std::string& kv : args.sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw usage_error("--set expects KEY=VALUE, got '" + kv + "'");
    cfg.apply_line(strip(kv.substr(0, eq)), strip(kv.substr(eq + 1)));
  }
  if (args.seed) cfg.seed = *args.seed;
  if (args.mode) cfg.mode = task_mode_from_string(*args.mode);
  double worst = pipeline_grad_check(cfg, sentences, samples, step);
  std::cout << "max_rel_err=" << worst << " threshold=" << threshold << "\n";
  if (!(worst < threshold))
    throw numeric_error("gradient check failed: max_rel_err=" + std::to_string(worst));
}

void run_sweep(const std::string& corpus_path, const ConfigArgs& args,
               const std::string& rules_path, const std::string& ks,
               const std::string& out_path) {
  RunConfig cfg = resolve_config(args);
  Corpus corpus = parse_conll09_file(corpus_path);
  RuleSet rules = read_rules_file(rules_path);
  if (!args.syntax) cfg.syntax = rules.syntax;
  std::vector<std::size_t> k_values;
  for (const std::string& part : split(ks, ',')) {
    try {
      k_values.push_back(std::stoul(strip(part)));
    } catch (const std::exception&) {
      throw usage_error("--ks: malformed entry '" + part + "'");
    }
  }
  if (k_values.empty()) throw usage_error("--ks requires at least one value");
  std::vector<SweepRow> rows = sweep(rules, corpus, cfg.syntax, k_values, cfg.threads);
  std::ostringstream os;
  os << config_banner(cfg);
  os << "k\tcoverage\treduction\n";
  for (const SweepRow& r : rows)
    os << r.k << '\t' << fmt(r.coverage) << '\t' << fmt(r.reduction) << '\n';
  emit_report(os.str(), out_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multilingual dependency SRL with syntactic-rule argument pruning"};
  app.require_subcommand(1);

  // validate
  std::string v_path;
  CLI::App* v = app.add_subcommand("validate", "parse a CoNLL-2009 file and check invariants");
  v->add_option("file", v_path, "CoNLL-2009 file")->required();

  // stats
  std::string st_path, st_out;
  ConfigArgs st_args;
  CLI::App* st = app.add_subcommand("stats", "corpus statistics (Table-1 style row)");
  st->add_option("file", st_path)->required();
  st->add_option("--out", st_out, "write the report here instead of stdout");
  add_config_options(st, st_args, false);

  // synth
  SynthArgs sy;
  CLI::App* syc = app.add_subcommand("synth", "generate a synthetic CoNLL-2009 corpus");
  syc->add_option("--out", sy.out)->required();
  syc->add_option("--truth", sy.truth, "write generator ground truth (stats + tuple tallies)");
  syc->add_option("--seed", sy.cfg.seed);
  syc->add_option("--sentences", sy.cfg.n_sentences);
  syc->add_option("--min-len", sy.cfg.min_len);
  syc->add_option("--max-len", sy.cfg.max_len);
  syc->add_option("--roles", sy.roles, "comma-separated role labels");
  syc->add_option("--tuples", sy.tuples, "tuple distribution, e.g. 0:1=0.5,1:2=0.3");
  syc->add_option("--pred-rate", sy.cfg.predicate_rate);
  syc->add_option("--min-args", sy.cfg.min_args);
  syc->add_option("--max-args", sy.cfg.max_args);
  syc->add_option("--pred-noise", sy.cfg.pred_noise, "fraction of PHEAD links rewired");
  syc->add_option("--vocab-words", sy.cfg.vocab_words);
  syc->add_option("--senses", sy.cfg.n_senses);

  // extract-rules
  std::string er_corpus, er_out;
  std::optional<std::size_t> er_k;
  std::optional<double> er_cov;
  ConfigArgs er_args;
  CLI::App* er = app.add_subcommand("extract-rules", "mine distance tuples and select a rule");
  er->add_option("corpus", er_corpus)->required();
  er->add_option("--out", er_out)->required();
  er->add_option("--k", er_k, "keep the top-k tuples");
  er->add_option("--coverage", er_cov, "smallest k reaching this coverage (default 0.99)");
  add_config_options(er, er_args, false);

  // coverage
  std::string cv_corpus, cv_rules, cv_out;
  std::optional<std::size_t> cv_k;
  ConfigArgs cv_args;
  CLI::App* cv = app.add_subcommand("coverage", "coverage/reduction of a rule on a corpus");
  cv->add_option("corpus", cv_corpus)->required();
  cv->add_option("--rules", cv_rules)->required();
  cv->add_option("--k", cv_k, "override the rule file's k");
  cv->add_option("--out", cv_out);
  add_config_options(cv, cv_args, false);

  // prune-stats
  std::string ps_corpus, ps_rules, ps_out;
  int ps_top = 10;
  ConfigArgs ps_args;
  CLI::App* ps = app.add_subcommand("prune-stats", "candidate reduction and gold-arg recall");
  ps->add_option("corpus", ps_corpus)->required();
  ps->add_option("--rules", ps_rules, "rule file (implies --prune rule)");
  ps->add_option("--top", ps_top, "lost-tuple rows to print");
  ps->add_option("--out", ps_out);
  add_config_options(ps, ps_args, true);

  // train
  TrainArgs tr;
  ConfigArgs tr_args;
  CLI::App* trc = app.add_subcommand("train", "train an SRL model");
  trc->add_option("--train", tr.train)->required();
  trc->add_option("--dev", tr.dev);
  trc->add_option("--rules", tr.rules);
  trc->add_option("--model", tr.model, "checkpoint output path")->required();
  trc->add_option("--contextual", tr.contextual, "external contextual embeddings (train)");
  trc->add_option("--dev-contextual", tr.dev_contextual);
  add_config_options(trc, tr_args, true);

  // predict
  PredictArgs pr;
  ConfigArgs pr_args;
  CLI::App* prc = app.add_subcommand("predict", "label a corpus with a trained model");
  prc->add_option("--model", pr.model)->required();
  prc->add_option("--input", pr.input)->required();
  prc->add_option("--out", pr.out)->required();
  prc->add_option("--rules", pr.rules, "override the checkpoint's rules");
  prc->add_option("--contextual", pr.contextual);
  add_config_options(prc, pr_args, true);

  // evaluate
  std::string ev_gold, ev_pred, ev_senses_file, ev_out;
  bool ev_senses = false;
  ConfigArgs ev_args;
  CLI::App* ev = app.add_subcommand("evaluate", "score predictions (CoNLL-2009 convention)");
  ev->add_option("--gold", ev_gold)->required();
  ev->add_option("--pred", ev_pred)->required();
  ev->add_flag("--senses", ev_senses, "include predicate-sense items in P/R/F1");
  ev->add_option("--sense-file", ev_senses_file,
                 "merge this corpus's PRED column into predictions first");
  ev->add_option("--out", ev_out);
  add_config_options(ev, ev_args, false);

  // gradcheck
  int gc_sentences = 3, gc_samples = 3;
  double gc_step = 1e-5, gc_threshold = 1e-4;
  ConfigArgs gc_args;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of the full pipeline");
  gc->add_option("--sentences", gc_sentences);
  gc->add_option("--samples", gc_samples, "checked coordinates per tensor");
  gc->add_option("--step", gc_step);
  gc->add_option("--threshold", gc_threshold);
  gc->add_option("--mode", gc_args.mode, "role-only|end-to-end");
  gc->add_option("--seed", gc_args.seed);
  gc->add_option("--set", gc_args.sets, "override config keys (e.g. lstm_hidden=6)");

  // sweep
  std::string sw_corpus, sw_rules, sw_ks = "1,2,3,5,10,20", sw_out;
  ConfigArgs sw_args;
  CLI::App* sw = app.add_subcommand("sweep", "coverage/reduction across k values");
  sw->add_option("corpus", sw_corpus)->required();
  sw->add_option("--rules", sw_rules)->required();
  sw->add_option("--ks", sw_ks, "comma-separated k values");
  sw->add_option("--out", sw_out);
  add_config_options(sw, sw_args, false);

  try {
    app.parse(argc, argv);
    if (v->parsed()) run_validate(v_path);
    if (st->parsed()) run_stats(st_path, st_args, st_out);
    if (syc->parsed()) run_synth(sy);
    if (er->parsed()) run_extract_rules(er_corpus, er_args, er_out, er_k, er_cov);
    if (cv->parsed()) run_coverage(cv_corpus, cv_args, cv_rules, cv_k, cv_out);
    if (ps->parsed()) run_prune_stats(ps_corpus, ps_args, ps_rules, ps_out, ps_top);
    if (trc->parsed()) run_train(tr_args, tr);
    if (prc->parsed()) run_predict(pr_args, pr);
    if (ev->parsed()) run_evaluate(ev_args, ev_gold, ev_pred, ev_senses, ev_senses_file, ev_out);
    if (gc->parsed()) run_gradcheck(gc_args, gc_sentences, gc_samples, gc_step, gc_threshold);
    if (sw->parsed()) run_sweep(sw_corpus, sw_args, sw_rules, sw_ks, sw_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const data_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
