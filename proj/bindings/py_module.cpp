// Python bindings for the main operations. The interface is string-oriented
// (CoNLL text in, CoNLL text out; rule files and checkpoints as bytes) so the
// Python side needs no mirror of the C++ data model.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "treesrl/config.hpp"
#include "treesrl/conll.hpp"
#include "treesrl/deptree.hpp"
#include "treesrl/eval.hpp"
#include "treesrl/model.hpp"
#include "treesrl/pruner.hpp"
#include "treesrl/ruleset.hpp"
#include "treesrl/synth.hpp"

namespace py = pybind11;
using namespace treesrl;

namespace {

RunConfig config_from_dict(const py::dict& d) {
  RunConfig cfg;
  for (auto item : d)
    cfg.apply_line(py::cast<std::string>(item.first),
                   py::cast<std::string>(py::str(item.second)));
  return cfg;
}

RuleSet rules_from_text(const std::string& text) {
  std::istringstream in(text);
  return read_rules(in);
}

std::string rules_to_text(const RuleSet& rules) {
  std::ostringstream os;
  write_rules(rules, os);
  return os.str();
}

py::dict stats_dict(const CorpusStats& st) {
  py::dict d;
  d["sentences"] = st.n_sentences;
  d["tokens"] = st.n_tokens;
  d["predicates"] = st.n_predicates;
  d["arguments"] = st.n_arguments;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "dependency SRL toolkit with syntactic-rule argument pruning";

  py::register_exception<usage_error>(m, "UsageError", PyExc_ValueError);
  py::register_exception<data_error>(m, "DataError", PyExc_ValueError);
  py::register_exception<numeric_error>(m, "NumericError", PyExc_ArithmeticError);

  m.def("validate", [](const std::string& text) {
    Corpus c = parse_conll09(text);
    return static_cast<std::int64_t>(c.size());
  }, py::arg("conll_text"), "Parse and validate CoNLL-2009 text; returns the sentence count.");

  m.def("stats", [](const std::string& text) {
    return stats_dict(corpus_stats(parse_conll09(text)));
  }, py::arg("conll_text"));

  m.def("round_trip", [](const std::string& text) {
    return write_conll09(parse_conll09(text));
  }, py::arg("conll_text"), "Parse then re-serialize (byte-identity check helper).");

  m.def("synth", [](std::uint64_t seed, int sentences, int min_len, int max_len,
                    const std::string& tuples, double pred_rate) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_sentences = sentences;
    cfg.min_len = min_len;
    cfg.max_len = max_len;
    cfg.predicate_rate = pred_rate;
    if (!tuples.empty()) {
      cfg.tuple_distribution.clear();
      for (const std::string& part : split(tuples, ',')) {
        std::size_t colon = part.find(':'), eq = part.find('=');
        if (colon == std::string::npos || eq == std::string::npos)
          throw usage_error("tuples expects DP:DA=W list");
        cfg.tuple_distribution.push_back(
            {{std::stoi(part.substr(0, colon)), std::stoi(part.substr(colon + 1, eq - colon - 1))},
             std::stod(part.substr(eq + 1))});
      }
    }
    return write_conll09(synth_corpus(cfg).first);
  }, py::arg("seed") = 1, py::arg("sentences") = 50, py::arg("min_len") = 3,
     py::arg("max_len") = 10, py::arg("tuples") = "", py::arg("pred_rate") = 0.25);

  m.def("distance_tuple", [](const std::vector<int>& parents, int pred, int arg) {
    DepTree tree = DepTree::from_parents(parents);
    DistanceTuple d = tree.distance(pred, arg);
    return py::make_tuple(d.pred_hops, d.arg_hops);
  }, py::arg("parents"), py::arg("pred"), py::arg("arg"),
     "parents[0] is ignored; parents[i] is the head of token i (0 = root).");

  m.def("mine_rules", [](const std::string& conll_text, const std::string& syntax,
                         const std::string& language) {
    Corpus c = parse_conll09(conll_text);
    RuleSet r = mine_rules(c, syntax_source_from_string(syntax), language);
    r.set_k(r.entries.size());
    return rules_to_text(r);
  }, py::arg("conll_text"), py::arg("syntax") = "predicted", py::arg("language") = "xx");

  m.def("select_rules", [](const std::string& rules_text, py::object k, py::object coverage) {
    RuleSet r = rules_from_text(rules_text);
    if (!k.is_none())
      r = select_top_k(std::move(r), py::cast<std::size_t>(k));
    else if (!coverage.is_none())
      r = select_by_coverage(std::move(r), py::cast<double>(coverage));
    else
      throw usage_error("select_rules: pass k or coverage");
    return rules_to_text(r);
  }, py::arg("rules_text"), py::arg("k") = py::none(), py::arg("coverage") = py::none());

  m.def("coverage", [](const std::string& rules_text, const std::string& conll_text) {
    RuleSet r = rules_from_text(rules_text);
    Corpus c = parse_conll09(conll_text);
    CoverageReport rep = rule_coverage(r, c, r.syntax);
    py::dict d;
    d["k"] = r.active_k();
    d["coverage"] = rep.coverage();
    d["reduction"] = rep.reduction();
    d["args_covered"] = rep.args_covered;
    d["args_total"] = rep.args_total;
    d["pairs_retained"] = rep.pairs_retained;
    d["pairs_total"] = rep.pairs_total;
    return d;
  }, py::arg("rules_text"), py::arg("conll_text"));

  m.def("prune_stats", [](const std::string& conll_text, const std::string& mode,
                          const std::string& rules_text, int korder, const std::string& syntax) {
    Corpus c = parse_conll09(conll_text);
    PruneMode pm = prune_mode_from_string(mode);
    RuleSet r;
    if (pm == PruneMode::rule) r = rules_from_text(rules_text);
    PruneReport rep = prune_stats(c, pm, pm == PruneMode::rule ? &r : nullptr, korder,
                                  syntax_source_from_string(syntax));
    py::dict d;
    d["pairs_total"] = rep.pairs_total;
    d["pairs_retained"] = rep.pairs_retained;
    d["reduction"] = rep.reduction();
    d["gold_args_total"] = rep.gold_args_total;
    d["gold_args_retained"] = rep.gold_args_retained;
    d["recall"] = rep.recall();
    d["positive_rate"] = rep.positive_rate();
    return d;
  }, py::arg("conll_text"), py::arg("mode") = "rule", py::arg("rules_text") = "",
     py::arg("korder") = 10, py::arg("syntax") = "predicted");

  m.def("train", [](const py::dict& config, const std::string& train_text, py::object dev_text,
                    py::object rules_text) {
    RunConfig cfg = config_from_dict(config);
    Corpus train = parse_conll09(train_text);
    Corpus dev;
    bool have_dev = !dev_text.is_none();
    if (have_dev) dev = parse_conll09(py::cast<std::string>(dev_text));
    RuleSet rules;
    bool have_rules = !rules_text.is_none();
    if (have_rules) rules = rules_from_text(py::cast<std::string>(rules_text));
    std::ostringstream log;
    TrainResult res = train_model(cfg, std::move(train), have_dev ? &dev : nullptr,
                                  have_rules ? &rules : nullptr, nullptr, nullptr, &log);
    py::dict d;
    d["checkpoint"] = py::bytes(checkpoint_bytes(res.checkpoint));
    d["best_f1"] = res.best_f1;
    d["best_epoch"] = res.best_epoch;
    d["epochs_run"] = res.epochs_run;
    d["log"] = log.str();
    return d;
  }, py::arg("config"), py::arg("train_text"), py::arg("dev_text") = py::none(),
     py::arg("rules_text") = py::none());

  m.def("predict", [](const py::bytes& checkpoint, const std::string& conll_text) {
    std::istringstream in(static_cast<std::string>(checkpoint));
    Checkpoint ckpt = load_checkpoint(in);
    RunConfig cfg;
    Vocab vocab;
    ModelParams params;
    RuleSet rules;
    bool have_rules = false;
    unpack_checkpoint(ckpt, cfg, vocab, params, &rules, &have_rules);
    Corpus input = parse_conll09(conll_text);
    Corpus out = predict_corpus(cfg, vocab, params, input, have_rules ? &rules : nullptr,
                                nullptr, cfg.threads);
    return write_conll09(out);
  }, py::arg("checkpoint"), py::arg("conll_text"));

  m.def("evaluate", [](const std::string& gold_text, const std::string& pred_text,
                       bool include_senses) {
    ScoreReport rep = score(parse_conll09(gold_text), parse_conll09(pred_text), include_senses);
    py::dict d;
    d["precision"] = rep.precision();
    d["recall"] = rep.recall();
    d["f1"] = rep.f1();
    d["pd_accuracy"] = rep.pd_accuracy();
    d["correct"] = rep.correct;
    d["predicted"] = rep.predicted;
    d["gold"] = rep.gold;
    return d;
  }, py::arg("gold_text"), py::arg("pred_text"), py::arg("include_senses") = false);

  m.def("grad_check", [](std::uint64_t seed, int sentences, int samples, double step,
                         const std::string& mode) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.mode = task_mode_from_string(mode);
    cfg.word_dim = 10;
    cfg.lemma_dim = 7;
    cfg.pos_dim = 5;
    cfg.pretrained_dim = 6;
    cfg.indicator_dim = 4;
    cfg.lstm_hidden = 9;
    cfg.mlp_dim = 8;
    return pipeline_grad_check(cfg, sentences, samples, step);
  }, py::arg("seed") = 1, py::arg("sentences") = 2, py::arg("samples") = 2,
     py::arg("step") = 1e-5, py::arg("mode") = "role-only");
}
