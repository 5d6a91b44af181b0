#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "treesrl/checkpoint.hpp"
#include "treesrl/eval.hpp"
#include "treesrl/model.hpp"
#include "treesrl/synth.hpp"

using namespace treesrl;

namespace {

// Two sentences with deliberate predicted/gold column splits so the feature
// fallbacks are exercised while building the vocabulary.
Corpus vocab_corpus() {
  auto tok = [](int id, const std::string& form, const std::string& lemma,
                const std::string& plemma, const std::string& pos, const std::string& ppos,
                int head) {
    Token t;
    t.id = id;
    t.form = form;
    t.lemma = lemma;
    t.plemma = plemma;
    t.pos = pos;
    t.ppos = ppos;
    t.head = t.phead = head;
    return t;
  };
  Corpus c;
  {
    Sentence s;
    s.tokens = {tok(1, "ships", "ship", "ship", "_", "NN", 2),
                tok(2, "dock", "dock", "_", "VB", "VB", 0),   // plemma falls back to gold
                tok(3, "slowly", "_", "slowly", "RB", "_", 2)};
    s.token(2).fillpred = true;
    s.token(2).pred_sense = "dock.01";
    s.predicates = {2};
    for (Token& t : s.tokens) t.apreds.assign(1, "");
    s.token(1).apreds[0] = "A1";
    s.token(3).apreds[0] = "AM-MNR";
    c.push_back(std::move(s));
  }
  {
    Sentence s;
    s.tokens = {tok(1, "they", "they", "they", "PRP", "PRP", 2),
                tok(2, "sail", "sail", "sail", "VB", "VB", 0),
                tok(3, "ships", "ship", "ship", "NN", "NN", 2)};
    s.token(2).fillpred = true;
    s.token(2).pred_sense = "sail.02";
    s.predicates = {2};
    for (Token& t : s.tokens) t.apreds.assign(1, "");
    s.token(1).apreds[0] = "A0";
    s.token(3).apreds[0] = "A1";
    c.push_back(std::move(s));
  }
  return c;
}

// Sentence over the handworked tree used throughout the pruner tests:
//        3
//       / \
//      1   5
//     /   / \
//    2   4   6
Sentence instance_sentence() {
  const std::vector<int> parent = {0, 3, 1, 0, 5, 3, 5};
  Sentence s;
  for (int i = 1; i <= 6; ++i) {
    Token t;
    t.id = i;
    t.form = "w" + std::to_string(i);
    t.lemma = t.plemma = "l" + std::to_string(i);
    t.pos = t.ppos = "P" + std::to_string(i % 2);
    t.head = t.phead = parent[static_cast<std::size_t>(i)];
    t.apreds.assign(1, "");
    s.tokens.push_back(std::move(t));
  }
  s.token(3).fillpred = true;
  s.token(3).pred_sense = "l3.01";
  s.predicates = {3};
  s.token(1).apreds[0] = "A0";
  s.token(2).apreds[0] = "A2";
  s.token(4).apreds[0] = "A1";
  s.token(6).apreds[0] = "AM";
  return s;
}

// Small but complete architecture; dropout and UNK replacement off so eval
// and train forwards agree unless a test opts back in.
RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.threads = 1;
  cfg.language = "en";
  cfg.syntax = SyntaxSource::gold;
  cfg.mode = TaskMode::role_only;
  cfg.prune = PruneMode::none;
  cfg.word_dim = 6;
  cfg.lemma_dim = 4;
  cfg.pos_dim = 3;
  cfg.pretrained_dim = 5;
  cfg.indicator_dim = 2;
  cfg.contextual_dim = 0;
  cfg.lstm_layers = 1;
  cfg.lstm_hidden = 7;
  cfg.mlp_dim = 6;
  cfg.lstm_keep = 1.0;
  cfg.mlp_keep = 1.0;
  cfg.unk_prob = 0.0;
  cfg.lr = 0.02;
  cfg.epochs = 8;
  cfg.batch_size = 4;
  cfg.eval_every = 2;
  return cfg;
}

Corpus synth_training_corpus(std::uint64_t seed, int n) {
  SynthConfig sc;
  sc.seed = seed;
  sc.n_sentences = n;
  sc.min_len = 4;
  sc.max_len = 7;
  sc.vocab_words = 12;
  sc.predicate_rate = 0.6;
  sc.min_args = 1;
  sc.max_args = 2;
  sc.tuple_distribution = {{{0, 1}, 0.6}, {{1, 1}, 0.4}};
  return synth_corpus(sc).first;
}

}  // namespace

TEST_CASE("feature columns prefer the predicted value with gold fallback") {
  Token t;
  t.lemma = "jog";
  t.plemma = "run";
  t.pos = "NN";
  t.ppos = "VB";
  CHECK(feature_lemma(t) == "run");
  CHECK(feature_pos(t) == "VB");
  t.plemma = "_";
  t.ppos = "_";
  CHECK(feature_lemma(t) == "jog");
  CHECK(feature_pos(t) == "NN");
  t.lemma = "_";
  t.pos = "_";
  CHECK(feature_lemma(t) == "_");
  CHECK(feature_pos(t) == "_");
}

TEST_CASE("sense_suffix takes the text after the last dot") {
  CHECK(sense_suffix("verb.01") == "01");
  CHECK(sense_suffix("a.b.c") == "c");
  CHECK(sense_suffix("nodot") == "nodot");
  CHECK(sense_suffix("trailing.") == "");
}

TEST_CASE("sense-degenerate languages are matched case-insensitively") {
  for (const char* l : {"cs", "CZ", "cze", "Czech", "ja", "JP", "jpn", "Japanese"})
    CHECK(sense_degenerate_language(l));
  for (const char* l : {"en", "de", "es", "ca", "zh", ""})
    CHECK_FALSE(sense_degenerate_language(l));
}

TEST_CASE("vocab assigns sorted ids from 2 with reserved UNK/VR rows") {
  Corpus c = vocab_corpus();
  Vocab v = Vocab::build(c, TaskMode::role_only);

  // Unique forms sorted: dock, sail, ships, slowly, they.
  CHECK(v.word.size() == 5);
  CHECK(v.word_id("dock") == 2);
  CHECK(v.word_id("sail") == 3);
  CHECK(v.word_id("ships") == 4);
  CHECK(v.word_id("slowly") == 5);
  CHECK(v.word_id("they") == 6);
  CHECK(v.word_id("<UNK>") == 0);
  CHECK(v.word_id("<VR>") == 1);
  CHECK(v.word_id("submarine") == 0);
  CHECK(v.n_words() == 7);

  // Lemma features: "dock" via gold fallback, "slowly" via plemma.
  CHECK(v.lemma.size() == 5);  // dock, sail, ship, slowly, they
  CHECK(v.lemma_id("dock") == 2);
  CHECK(v.lemma_id("ship") == 4);
  CHECK(v.lemma_id("jog") == 0);

  // POS features: NN via ppos on token 1, RB via gold fallback on token 3.
  CHECK(v.pos.size() == 4);  // NN, PRP, RB, VB
  CHECK(v.pos_id("NN") == 2);
  CHECK(v.pos_id("RB") == 4);

  // Frequencies count every occurrence (ships appears twice).
  CHECK(v.word_freq.at("ships") == 2);
  CHECK(v.word_freq.at("dock") == 1);
  CHECK(v.lemma_freq.at("ship") == 2);

  // Role-only label space: <NONE> then sorted roles, no senses.
  REQUIRE(v.labels == std::vector<std::string>{"<NONE>", "A0", "A1", "AM-MNR"});
  CHECK(v.n_roles == 4);
  CHECK(v.n_senses() == 0);
  CHECK(v.role_id("A0") == 1);
  CHECK(v.role_id("AM-MNR") == 3);
  CHECK(v.role_id("A9") == 0);           // unknown role -> <NONE>
  CHECK(v.sense_id("01") == Vocab::npos);  // no sense partition in role-only

  Vocab ve = Vocab::build(c, TaskMode::end_to_end);
  REQUIRE(ve.labels == std::vector<std::string>{"<NONE>", "A0", "A1", "AM-MNR", "01", "02"});
  CHECK(ve.n_roles == 4);
  CHECK(ve.n_senses() == 2);
  CHECK(ve.sense_id("01") == 4);
  CHECK(ve.sense_id("02") == 5);
  CHECK(ve.sense_id("07") == Vocab::npos);
  CHECK(ve.sense_id("A0") == Vocab::npos);  // role ids are not sense ids
}

TEST_CASE("vocab ignores literal UNK/VR forms when collecting entries") {
  Corpus c = vocab_corpus();
  c[0].token(1).form = "<UNK>";
  c[0].token(3).form = "<VR>";
  Vocab v = Vocab::build(c, TaskMode::role_only);
  CHECK(v.word.count("<UNK>") == 0);
  CHECK(v.word.count("<VR>") == 0);
  CHECK(v.word_freq.at("<UNK>") == 1);  // frequency still tracks the surface form
}

TEST_CASE("vocab serializes and deserializes losslessly") {
  Vocab v = Vocab::build(vocab_corpus(), TaskMode::end_to_end);
  std::string text = v.serialize();
  Vocab back = Vocab::deserialize(text);
  CHECK(back.word == v.word);
  CHECK(back.lemma == v.lemma);
  CHECK(back.pos == v.pos);
  CHECK(back.labels == v.labels);
  CHECK(back.n_roles == v.n_roles);
  CHECK(back.label_id == v.label_id);
  // Frequencies are a training-time convenience and are not persisted.
  CHECK(back.word_freq.empty());
  CHECK(back.lemma_freq.empty());
  CHECK(back.serialize() == text);
}

TEST_CASE("vocab deserialize rejects malformed sections") {
  CHECK_THROWS_WITH_AS(Vocab::deserialize(""), doctest::Contains("missing #n_roles"),
                       data_error);
  CHECK_THROWS_WITH_AS(Vocab::deserialize("#n_roles x\n"),
                       doctest::Contains("expected '#n_roles N'"), data_error);
  CHECK_THROWS_WITH_AS(Vocab::deserialize("#n_roles 1\n#labels 3\n<NONE>\nA0\n"),
                       doctest::Contains("truncated"), data_error);
  // n_roles == 0 breaks the label partition invariant.
  CHECK_THROWS_WITH_AS(Vocab::deserialize("#n_roles 0\n#labels 1\n<NONE>\n"),
                       doctest::Contains("malformed label partition"), data_error);
  // Label 0 must be <NONE>.
  CHECK_THROWS_WITH_AS(
      Vocab::deserialize("#n_roles 1\n#labels 1\nA0\n#words 0\n#lemmas 0\n#pos 0\n"),
      doctest::Contains("malformed label partition"), data_error);
  CHECK_THROWS_WITH_AS(
      Vocab::deserialize(
          "#n_roles 1\n#labels 1\n<NONE>\n#words 2\ndup\ndup\n#lemmas 0\n#pos 0\n"),
      doctest::Contains("duplicate entry under #words"), data_error);
}

TEST_CASE("virtual root is appended with head 0 and stripped exactly") {
  Sentence s = instance_sentence();
  Sentence aug = to_virtual_root(s);
  REQUIRE(aug.size() == 7);
  const Token& vr = aug.token(7);
  CHECK(vr.id == 7);
  CHECK(vr.form == "<VR>");
  CHECK(vr.lemma == "<VR>");
  CHECK(vr.plemma == "<VR>");
  CHECK(vr.pos == "<VR>");
  CHECK(vr.ppos == "<VR>");
  CHECK(vr.head == 0);
  CHECK(vr.phead == 0);
  CHECK_FALSE(vr.fillpred);
  CHECK(vr.pred_sense.empty());
  CHECK(vr.apreds == std::vector<std::string>{""});
  CHECK(aug.predicates == s.predicates);

  Sentence back = strip_virtual_root(aug);
  CHECK(write_conll09({back}) == write_conll09({s}));
  CHECK_THROWS_WITH_AS(strip_virtual_root(s), doctest::Contains("no trailing <VR>"),
                       usage_error);
}

TEST_CASE("build_instances follows the configured prune mode") {
  Corpus corpus = {instance_sentence()};
  Vocab v = Vocab::build(corpus, TaskMode::role_only);
  // labels: <NONE>, A0, A1, A2, AM
  RunConfig cfg = tiny_cfg();

  SUBCASE("prune none keeps every token as a candidate") {
    std::vector<Instance> insts = build_instances(corpus, cfg, v, nullptr);
    REQUIRE(insts.size() == 1);
    const Instance& inst = insts[0];
    CHECK(inst.sent == 0);
    CHECK(inst.pred_slot == 0);
    CHECK(inst.predicate == 3);
    CHECK(inst.vr == 0);
    CHECK(inst.candidates == std::vector<int>{1, 2, 3, 4, 5, 6});
    CHECK(inst.gold == std::vector<std::size_t>{v.role_id("A0"), v.role_id("A2"), 0,
                                                v.role_id("A1"), 0, v.role_id("AM")});
  }

  SUBCASE("rule prune drops gold arguments outside the rule set") {
    RuleSet rules;
    rules.language = "en";
    rules.syntax = SyntaxSource::gold;
    rules.entries = {{{0, 1}, 4}};  // predicate's children only
    rules.set_k(1);
    cfg.prune = PruneMode::rule;
    std::vector<Instance> insts = build_instances(corpus, cfg, v, &rules);
    REQUIRE(insts.size() == 1);
    // Children of 3 are {1, 5}; the predicate always survives. Gold arguments
    // at 2, 4 and 6 are pruned away and silently leave the loss.
    CHECK(insts[0].candidates == std::vector<int>{1, 3, 5});
    CHECK(insts[0].gold == std::vector<std::size_t>{v.role_id("A0"), 0, 0});
  }

  SUBCASE("korder prune retains ancestors up to the order") {
    cfg.prune = PruneMode::korder;
    cfg.korder = 0;  // only ancestors-or-self of the predicate
    std::vector<Instance> i0 = build_instances(corpus, cfg, v, nullptr);
    CHECK(i0[0].candidates == std::vector<int>{3});
    cfg.korder = 1;
    std::vector<Instance> i1 = build_instances(corpus, cfg, v, nullptr);
    CHECK(i1[0].candidates == std::vector<int>{1, 3, 5});
  }

  SUBCASE("rule prune without a rule set is a usage error") {
    cfg.prune = PruneMode::rule;
    CHECK_THROWS_AS(build_instances(corpus, cfg, v, nullptr), usage_error);
  }

  SUBCASE("end-to-end instances carry the virtual root and gold sense") {
    Corpus aug;
    for (const Sentence& s : corpus) aug.push_back(to_virtual_root(s));
    Vocab ve = Vocab::build(aug, TaskMode::end_to_end);
    cfg.mode = TaskMode::end_to_end;
    std::vector<Instance> insts = build_instances(aug, cfg, ve, nullptr);
    REQUIRE(insts.size() == 1);
    CHECK(insts[0].vr == 7);
    // The <VR> token itself is never a role candidate.
    CHECK(insts[0].candidates == std::vector<int>{1, 2, 3, 4, 5, 6});
    CHECK(insts[0].gold_sense == ve.sense_id("01"));

    aug[0].token(3).pred_sense.clear();
    std::vector<Instance> no_sense = build_instances(aug, cfg, ve, nullptr);
    CHECK(no_sense[0].gold_sense == Vocab::npos);
  }
}

TEST_CASE("rep_dim sums exactly the enabled feature blocks") {
  RunConfig cfg = tiny_cfg();
  CHECK(rep_dim(cfg) == 6 + 4 + 3 + 5 + 2);
  cfg.use_lemma = false;
  CHECK(rep_dim(cfg) == 6 + 3 + 5 + 2);
  cfg.use_pos = false;
  CHECK(rep_dim(cfg) == 6 + 5 + 2);
  cfg.contextual_dim = 9;
  CHECK(rep_dim(cfg) == 6 + 5 + 2 + 9);
  RunConfig defaults;
  CHECK(rep_dim(defaults) == 100 + 100 + 100 + 100 + 16);
}

TEST_CASE("init_params creates the documented tensor inventory") {
  RunConfig cfg = tiny_cfg();
  cfg.lstm_layers = 2;
  Corpus corpus = vocab_corpus();
  Vocab v = Vocab::build(corpus, TaskMode::role_only);
  Rng rng(3);
  ModelParams p = init_params(cfg, v, rng);

  const std::size_t H = 7, M = 6, L = v.n_labels();
  auto shape_is = [&](const std::string& name, std::vector<std::size_t> want) {
    REQUIRE(p.t.count(name) == 1);
    CHECK(p.at(name).shape == want);
  };
  shape_is("emb.word", {v.n_words(), 6});
  shape_is("emb.lemma", {v.n_lemmas(), 4});
  shape_is("emb.pos", {v.n_pos(), 3});
  shape_is("emb.pre", {v.n_words(), 5});
  shape_is("emb.ind", {2, 2});
  shape_is("lstm.l0.fw.Wih", {4 * H, static_cast<std::size_t>(rep_dim(cfg))});
  shape_is("lstm.l0.fw.Whh", {4 * H, H});
  shape_is("lstm.l0.fw.b", {4 * H});
  shape_is("lstm.l0.bw.Wih", {4 * H, static_cast<std::size_t>(rep_dim(cfg))});
  shape_is("lstm.l1.fw.Wih", {4 * H, 2 * H});  // layer 1 consumes the biLSTM state
  shape_is("lstm.l1.bw.Whh", {4 * H, H});
  shape_is("head.p.W", {M, 2 * H});
  shape_is("head.p.b", {M});
  shape_is("head.a.W", {M, 2 * H});
  shape_is("head.a.b", {M});
  shape_is("scorer.W1", {L, M, M});
  shape_is("scorer.W2", {L, 2 * M});
  shape_is("scorer.b", {L});
  CHECK(p.t.size() == 5 + 2 * 2 * 3 + 4 + 3);

  // Pretrained table frozen by default, trainable under finetuning.
  CHECK(p.frozen.count("emb.pre") == 1);
  CHECK(p.frozen.size() == 1);
  RunConfig ft = cfg;
  ft.finetune_pretrained = true;
  Rng rng2(3);
  ModelParams pf = init_params(ft, v, rng2);
  CHECK(pf.frozen.empty());

  // Embeddings live in [-0.1, 0.1]; LSTM biases are zero except the forget
  // gate rows, which start at exactly 1.0.
  for (double x : p.at("emb.word").v) CHECK(std::abs(x) <= 0.1);
  const Tensor& b = p.at("lstm.l0.fw.b");
  for (std::size_t j = 0; j < 4 * H; ++j) {
    if (j >= H && j < 2 * H)
      CHECK(b.v[j] == 1.0);
    else
      CHECK(b.v[j] == 0.0);
  }
  for (double x : p.at("head.p.b").v) CHECK(x == 0.0);
  for (double x : p.at("scorer.b").v) CHECK(x == 0.0);

  // Xavier radius for the argument head: sqrt(6 / (2H + M)).
  const double r = std::sqrt(6.0 / (2.0 * H + M));
  for (double x : p.at("head.a.W").v) CHECK(std::abs(x) <= r);

  RunConfig bad = cfg;
  bad.lstm_hidden = 0;
  Rng rng3(3);
  CHECK_THROWS_AS(init_params(bad, v, rng3), usage_error);

  SUBCASE("end-to-end widens only the scorer label dimension") {
    Vocab ve = Vocab::build(corpus, TaskMode::end_to_end);
    RunConfig ce = cfg;
    ce.mode = TaskMode::end_to_end;
    Rng rng4(3);
    ModelParams pe = init_params(ce, ve, rng4);
    CHECK(pe.at("scorer.W1").shape == std::vector<std::size_t>{ve.n_labels(), M, M});
    CHECK(pe.at("scorer.b").shape == std::vector<std::size_t>{ve.n_labels()});
  }
}

TEST_CASE("zero parameters produce zero scores and uniform cross-entropy") {
  RunConfig cfg = tiny_cfg();
  Corpus corpus = {instance_sentence()};
  Vocab v = Vocab::build(corpus, TaskMode::role_only);
  Rng rng(1);
  ModelParams p = init_params(cfg, v, rng);
  for (auto& [name, t] : p.t) t.fill(0.0);

  std::vector<Instance> insts = build_instances(corpus, cfg, v, nullptr);
  InstanceScores scores =
      forward_instance(cfg, v, p, corpus[0], insts[0], nullptr, false, nullptr, nullptr);
  REQUIRE(scores.cand.size() == 6);
  for (const Vec& s : scores.cand)
    for (double x : s) CHECK(x == 0.0);
  CHECK(scores.vr.empty());

  std::size_t items = 0;
  double loss = instance_loss(cfg, v, p, corpus[0], insts[0], nullptr, false, nullptr, nullptr,
                              &items);
  CHECK(items == 6);
  // Labels are <NONE>, A0, A1, A2, AM: uniform over 5 roles per candidate.
  CHECK(loss == doctest::Approx(6.0 * std::log(5.0)).epsilon(1e-12));

  SUBCASE("end-to-end adds one uniform sense item") {
    Corpus aug = {to_virtual_root(corpus[0])};
    Vocab ve = Vocab::build(aug, TaskMode::end_to_end);
    RunConfig ce = cfg;
    ce.mode = TaskMode::end_to_end;
    Rng rng2(1);
    ModelParams pe = init_params(ce, ve, rng2);
    for (auto& [name, t] : pe.t) t.fill(0.0);
    std::vector<Instance> ei = build_instances(aug, ce, ve, nullptr);
    std::size_t eitems = 0;
    double eloss = instance_loss(ce, ve, pe, aug[0], ei[0], nullptr, false, nullptr, nullptr,
                                 &eitems);
    CHECK(eitems == 7);
    // Six uniform role items plus one sense item over a single sense (ln 1 = 0).
    CHECK(eloss == doctest::Approx(6.0 * std::log(5.0)).epsilon(1e-12));
  }
}

TEST_CASE("train-mode forward without an RNG is a usage error") {
  RunConfig cfg = tiny_cfg();
  Corpus corpus = {instance_sentence()};
  Vocab v = Vocab::build(corpus, TaskMode::role_only);
  Rng rng(1);
  ModelParams p = init_params(cfg, v, rng);
  std::vector<Instance> insts = build_instances(corpus, cfg, v, nullptr);
  CHECK_THROWS_AS(
      forward_instance(cfg, v, p, corpus[0], insts[0], nullptr, true, nullptr, nullptr),
      usage_error);
  // contextual_dim > 0 demands external vectors.
  RunConfig cc = cfg;
  cc.contextual_dim = 3;
  CHECK_THROWS_AS(
      forward_instance(cc, v, p, corpus[0], insts[0], nullptr, false, nullptr, nullptr),
      usage_error);
}

TEST_CASE("whole-pipeline analytic gradients match finite differences") {
  RunConfig cfg = tiny_cfg();
  cfg.lstm_layers = 2;
  SUBCASE("role-only") {
    CHECK(pipeline_grad_check(cfg, 2, 40, 1e-5) < 1e-5);
  }
  SUBCASE("end-to-end") {
    cfg.mode = TaskMode::end_to_end;
    CHECK(pipeline_grad_check(cfg, 2, 40, 1e-5) < 1e-5);
  }
  SUBCASE("with contextual column and ablations") {
    cfg.use_lemma = false;
    cfg.seed = 11;
    CHECK(pipeline_grad_check(cfg, 2, 40, 1e-5) < 1e-5);
  }
}

TEST_CASE("decode takes per-candidate argmax and suppresses <NONE>") {
  Corpus corpus = {instance_sentence()};
  Vocab v = Vocab::build(corpus, TaskMode::role_only);  // <NONE>, A0, A1, A2, AM
  Instance inst;
  inst.predicate = 3;
  inst.candidates = {1, 2, 4};

  InstanceScores s;
  s.cand = {Vec{0.0, 0.0, 0.0, 0.0, 0.0},   // all tied -> <NONE> wins
            Vec{0.1, 0.9, 0.2, 0.9, 0.0},   // A0/A2 tied -> lowest label id
            Vec{-1.0, -0.5, 0.5, -2.0, 0.4}};
  Frame f = decode_instance(v, inst, s);
  CHECK(f.predicate == 3);
  REQUIRE(f.arcs.size() == 2);
  CHECK(f.arcs[0].arg == 2);
  CHECK(f.arcs[0].role == "A0");
  CHECK(f.arcs[1].arg == 4);
  CHECK(f.arcs[1].role == "A1");
  CHECK(f.sense.empty());

  // Adding a constant to one candidate's scores never changes the decode.
  for (double& x : s.cand[2]) x += 100.0;
  Frame g = decode_instance(v, inst, s);
  CHECK(g.arcs[1].role == "A1");

  SUBCASE("sense decode runs over the sense partition only") {
    Corpus aug = {to_virtual_root(corpus[0])};
    aug[0].token(3).pred_sense = "l3.02";
    Corpus two = aug;
    two.push_back(aug[0]);
    two[1].token(3).pred_sense = "l3.01";
    Vocab ve = Vocab::build(two, TaskMode::end_to_end);  // senses 01, 02
    Instance ei = inst;
    ei.vr = 7;
    InstanceScores es = s;
    es.vr = Vec(ve.n_labels(), 0.0);
    es.vr[ve.sense_id("02")] = 1.5;
    es.vr[1] = 99.0;  // huge role score must not leak into the sense argmax
    Frame ef = decode_instance(ve, ei, es);
    CHECK(ef.sense == "02");
    // Tie across the sense partition resolves to the first sense label.
    es.vr[ve.sense_id("02")] = 0.0;
    CHECK(decode_instance(ve, ei, es).sense == "01");
  }
}

TEST_CASE("external embeddings round-trip through their text format") {
  Corpus corpus = vocab_corpus();  // 3 + 3 tokens
  ExternalEmbeddings ext;
  ext.dim = 2;
  ext.sent = {{{0.5, -1.25}, {2.0, 3.5}, {-0.75, 0.0}},
              {{1.0, 1.0}, {0.125, -0.5}, {4.0, -4.0}}};
  std::ostringstream os;
  write_external_embeddings(ext, os);

  const std::string path = "test_ext_emb_tmp.txt";
  {
    std::ofstream f(path);
    f << os.str();
  }
  ExternalEmbeddings back = load_external_embeddings(path, corpus);
  CHECK(back.dim == 2);
  REQUIRE(back.sent.size() == 2);
  CHECK(back.sent[0] == ext.sent[0]);
  CHECK(back.sent[1] == ext.sent[1]);
  std::remove(path.c_str());
}

TEST_CASE("external embeddings loader validates shape against the corpus") {
  Corpus corpus = vocab_corpus();
  const std::string path = "test_ext_emb_bad_tmp.txt";
  auto with_file = [&](const std::string& text) {
    std::ofstream f(path);
    f << text;
    f.close();
  };
  auto expect_error = [&](const std::string& text, const std::string& needle) {
    with_file(text);
    CHECK_THROWS_WITH_AS(load_external_embeddings(path, corpus),
                         doctest::Contains(needle.c_str()), data_error);
  };

  CHECK_THROWS_WITH_AS(load_external_embeddings("no_such_file_xyz", corpus),
                       doctest::Contains("cannot open"), data_error);
  expect_error("", "empty file");
  expect_error("#dimension=2 #sentences=2\n", "expected '#dim=D #sentences=S'");
  expect_error("#dim=x #sentences=2\n", "bad header numbers");
  expect_error("#dim=0 #sentences=2\n", "dim must be positive");
  expect_error("#dim=2 #sentences=5\n", "file has 5 sentences, corpus has 2");
  expect_error("#dim=2 #sentences=2\n#sent 1 3\n", "expected '#sent 0 N'");
  expect_error("#dim=2 #sentences=2\n#sent 0 4\n", "sentence 0 has 4 tokens, corpus has 3");
  expect_error("#dim=2 #sentences=2\n#sent 0 3\n1 2\n3 4\n", "token 2: missing vector line");
  expect_error("#dim=2 #sentences=2\n#sent 0 3\n1 2 3\n", "expected 2 values, got 3");
  expect_error(
      "#dim=1 #sentences=2\n#sent 0 3\n1\n2\n3\n#sent 1 3\n4\n5\n6\nextra\n",
      "trailing content");
  std::remove(path.c_str());
}

TEST_CASE("training is seeded-deterministic and reduces the loss") {
  Corpus train = synth_training_corpus(41, 14);
  RunConfig cfg = tiny_cfg();
  cfg.lstm_keep = 0.9;  // exercise the per-instance dropout path
  cfg.mlp_keep = 0.9;
  cfg.unk_prob = 0.1;
  cfg.epochs = 6;
  cfg.lr = 0.05;

  std::ostringstream log;
  TrainResult a = train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, &log);
  REQUIRE(a.log.size() == 6);
  CHECK(a.epochs_run == 6);
  CHECK(a.log.front().items > 0);
  CHECK(a.log.back().loss < a.log.front().loss);
  CHECK(log.str().find("epoch=1 loss=") != std::string::npos);

  TrainResult b = train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr);
  CHECK(checkpoint_bytes(a.checkpoint) == checkpoint_bytes(b.checkpoint));
  REQUIRE(b.log.size() == a.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);  // bitwise: same seed, same schedule
    CHECK(a.log[i].items == b.log[i].items);
  }
}

TEST_CASE("training does not depend on the thread count") {
  Corpus train = synth_training_corpus(42, 10);
  RunConfig cfg = tiny_cfg();
  cfg.epochs = 3;
  cfg.lr = 0.05;

  SUBCASE("single-instance batches are bitwise thread-invariant") {
    // The checkpoint's config echo records --threads, so whole-file bytes
    // legitimately differ; the learned parameters and losses must not.
    cfg.batch_size = 1;
    cfg.threads = 1;
    TrainResult t1 = train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr);
    cfg.threads = 4;
    TrainResult t4 = train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr);
    REQUIRE(t4.checkpoint.params.t.size() == t1.checkpoint.params.t.size());
    for (const auto& [name, tensor] : t1.checkpoint.params.t) {
      REQUIRE(t4.checkpoint.params.t.count(name) == 1);
      CHECK(t4.checkpoint.params.at(name).v == tensor.v);
    }
    for (std::size_t i = 0; i < t1.log.size(); ++i) CHECK(t1.log[i].loss == t4.log[i].loss);
  }

  SUBCASE("larger batches agree up to floating-point regrouping") {
    cfg.batch_size = 5;
    cfg.threads = 1;
    TrainResult t1 = train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr);
    cfg.threads = 3;
    TrainResult t3 = train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr);
    REQUIRE(t3.log.size() == t1.log.size());
    for (std::size_t i = 0; i < t1.log.size(); ++i)
      CHECK(t3.log[i].loss == doctest::Approx(t1.log[i].loss).epsilon(1e-9));
  }
}

TEST_CASE("training tracks dev F1 and keeps the best checkpoint") {
  Corpus train = synth_training_corpus(43, 12);
  RunConfig cfg = tiny_cfg();
  cfg.epochs = 6;
  cfg.eval_every = 2;
  cfg.lr = 0.05;
  TrainResult r = train_model(cfg, train, &train, nullptr, nullptr, nullptr, nullptr);
  REQUIRE(r.log.size() == 6);
  for (const TrainLogRow& row : r.log) CHECK(row.has_dev == (row.epoch % 2 == 0));
  CHECK(r.best_epoch % 2 == 0);
  CHECK(r.best_f1 >= 0.0);
  CHECK(r.best_f1 <= 1.0);
  for (const TrainLogRow& row : r.log)
    if (row.has_dev) CHECK(row.dev_f1 <= r.best_f1);

  SUBCASE("early stop ends the run once the dev target is reached") {
    cfg.early_stop_f1 = 1e-9;  // any dev evaluation meets it
    TrainResult s = train_model(cfg, train, &train, nullptr, nullptr, nullptr, nullptr);
    CHECK(s.epochs_run <= 6);
    if (s.epochs_run < 6) CHECK(s.log.back().has_dev);
  }
}

TEST_CASE("train rejects inconsistent setups") {
  Corpus train = synth_training_corpus(44, 6);
  RunConfig cfg = tiny_cfg();

  SUBCASE("no epochs") {
    cfg.epochs = 0;
    CHECK_THROWS_AS(train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr),
                    usage_error);
  }
  SUBCASE("corpus without argument labels") {
    for (Sentence& s : train)
      for (Token& t : s.tokens)
        for (std::string& a : t.apreds) a.clear();
    CHECK_THROWS_WITH_AS(train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr),
                         doctest::Contains("no argument labels"), data_error);
  }
  SUBCASE("corpus without predicates") {
    for (Sentence& s : train) {
      s.predicates.clear();
      for (Token& t : s.tokens) {
        t.fillpred = false;
        t.pred_sense.clear();
        t.apreds.clear();
      }
    }
    // No predicates also means no argument labels; that check fires first.
    CHECK_THROWS_AS(train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr),
                    data_error);
  }
  SUBCASE("end-to-end refuses sense-degenerate languages") {
    cfg.mode = TaskMode::end_to_end;
    cfg.language = "ja";
    CHECK_THROWS_WITH_AS(train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr),
                         doctest::Contains("not supported for language 'ja'"), usage_error);
  }
  SUBCASE("end-to-end needs senses in the training data") {
    cfg.mode = TaskMode::end_to_end;
    for (Sentence& s : train)
      for (Token& t : s.tokens) t.pred_sense.clear();
    CHECK_THROWS_WITH_AS(train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr),
                         doctest::Contains("no predicate senses"), data_error);
  }
  SUBCASE("contextual dims require external embeddings") {
    cfg.contextual_dim = 4;
    CHECK_THROWS_AS(train_model(cfg, train, nullptr, nullptr, nullptr, nullptr, nullptr),
                    usage_error);
  }
}

TEST_CASE("predict fills the apred block deterministically") {
  Corpus corpus = synth_training_corpus(45, 8);
  RunConfig cfg = tiny_cfg();
  Vocab v = Vocab::build(corpus, TaskMode::role_only);
  Rng rng(cfg.seed);
  ModelParams p = init_params(cfg, v, rng);

  Corpus out = predict_corpus(cfg, v, p, corpus, nullptr, nullptr, 1);
  REQUIRE(out.size() == corpus.size());
  for (std::size_t s = 0; s < out.size(); ++s) {
    CHECK(out[s].size() == corpus[s].size());
    CHECK(out[s].predicates == corpus[s].predicates);
    for (const Token& t : out[s].tokens) {
      CHECK(t.apreds.size() == out[s].predicates.size());
      // Input columns other than the APRED block are untouched.
      CHECK(t.form == corpus[s].token(t.id).form);
      CHECK(t.pred_sense == corpus[s].token(t.id).pred_sense);
    }
  }
  // Forward passes are per-instance, so prediction is bitwise thread-invariant.
  Corpus out4 = predict_corpus(cfg, v, p, corpus, nullptr, nullptr, 4);
  CHECK(write_conll09(out4) == write_conll09(out));

  SUBCASE("zero parameters predict no arguments at all") {
    for (auto& [name, t] : p.t) t.fill(0.0);
    Corpus zero = predict_corpus(cfg, v, p, corpus, nullptr, nullptr, 2);
    for (const Sentence& s : zero)
      for (const Token& t : s.tokens)
        for (const std::string& a : t.apreds) CHECK(a.empty());
  }
}

TEST_CASE("end-to-end predict reconstructs the PRED column from the sense") {
  Corpus corpus = synth_training_corpus(46, 6);
  RunConfig cfg = tiny_cfg();
  cfg.mode = TaskMode::end_to_end;
  Corpus aug;
  for (const Sentence& s : corpus) aug.push_back(to_virtual_root(s));
  Vocab v = Vocab::build(aug, TaskMode::end_to_end);
  REQUIRE(v.n_senses() > 0);
  Rng rng(cfg.seed);
  ModelParams p = init_params(cfg, v, rng);
  for (auto& [name, t] : p.t) t.fill(0.0);

  // predict_corpus augments internally; pass the original corpus.
  Corpus out = predict_corpus(cfg, v, p, corpus, nullptr, nullptr, 1);
  const std::string first_sense = v.labels[v.n_roles];  // tie -> first sense label
  for (std::size_t s = 0; s < out.size(); ++s) {
    CHECK(out[s].size() == corpus[s].size());  // the <VR> token never leaks out
    for (int pred : out[s].predicates) {
      const Token& t = out[s].token(pred);
      CHECK(t.pred_sense == feature_lemma(t) + "." + first_sense);
    }
  }
}

TEST_CASE("checkpoints carry config, vocab, rules and parameters") {
  Corpus corpus = vocab_corpus();
  Vocab v = Vocab::build(corpus, TaskMode::role_only);
  RunConfig cfg = tiny_cfg();
  Rng rng(9);
  ModelParams p = init_params(cfg, v, rng);
  RuleSet rules;
  rules.language = "en";
  rules.syntax = SyntaxSource::gold;
  rules.entries = {{{0, 1}, 8}, {{1, 1}, 3}};
  rules.set_k(2);

  Checkpoint ckpt = make_checkpoint(cfg, v, p, &rules);
  std::istringstream in(checkpoint_bytes(ckpt));
  Checkpoint loaded = load_checkpoint(in);

  RunConfig cfg2;
  Vocab v2;
  ModelParams p2;
  RuleSet rules2;
  bool has_rules = false;
  unpack_checkpoint(loaded, cfg2, v2, p2, &rules2, &has_rules);
  CHECK(cfg2.serialize() == cfg.serialize());
  CHECK(v2.serialize() == v.serialize());
  CHECK(has_rules);
  CHECK(rules2.entries.size() == 2);
  CHECK(rules2.k() == 2);
  REQUIRE(p2.t.size() == p.t.size());
  for (const auto& [name, t] : p.t) {
    REQUIRE(p2.t.count(name) == 1);
    CHECK(p2.at(name).shape == t.shape);
    CHECK(p2.at(name).v == t.v);
  }
  CHECK(p2.frozen == p.frozen);

  SUBCASE("rules section is optional") {
    Checkpoint bare = make_checkpoint(cfg, v, p, nullptr);
    std::istringstream in2(checkpoint_bytes(bare));
    Checkpoint loaded2 = load_checkpoint(in2);
    bool has2 = true;
    unpack_checkpoint(loaded2, cfg2, v2, p2, nullptr, &has2);
    CHECK_FALSE(has2);
  }

  SUBCASE("a checkpoint without a vocab section is rejected") {
    Checkpoint broken = ckpt;
    broken.sections.clear();
    CHECK_THROWS_WITH_AS(unpack_checkpoint(broken, cfg2, v2, p2, nullptr, nullptr),
                         doctest::Contains("no vocab section"), data_error);
  }
}

TEST_CASE("run config serializes every field and rejects unknown keys") {
  RunConfig cfg = tiny_cfg();
  cfg.language = "de";
  cfg.mode = TaskMode::end_to_end;
  cfg.prune = PruneMode::korder;
  cfg.korder = 2;
  cfg.syntax = SyntaxSource::predicted;
  cfg.lr = 0.00123;
  cfg.seed = 123456789012345ull;
  cfg.finetune_pretrained = true;
  cfg.use_pos = false;

  RunConfig back = RunConfig::deserialize(cfg.serialize());
  CHECK(back.serialize() == cfg.serialize());
  CHECK(back.language == "de");
  CHECK(back.mode == TaskMode::end_to_end);
  CHECK(back.prune == PruneMode::korder);
  CHECK(back.korder == 2);
  CHECK(back.syntax == SyntaxSource::predicted);
  CHECK(back.lr == cfg.lr);  // doubles survive via max-precision formatting
  CHECK(back.seed == cfg.seed);
  CHECK(back.finetune_pretrained);
  CHECK_FALSE(back.use_pos);

  RunConfig fresh;
  CHECK_THROWS_WITH_AS(fresh.apply_line("warp_speed", "9"),
                       doctest::Contains("unknown config key 'warp_speed'"), usage_error);
  CHECK_THROWS_WITH_AS(fresh.apply_line("epochs", "many"),
                       doctest::Contains("bad integer for epochs"), usage_error);
  CHECK_THROWS_WITH_AS(fresh.apply_line("lr", "fast"), doctest::Contains("bad number for lr"),
                       usage_error);
  CHECK_THROWS_WITH_AS(fresh.apply_line("use_pos", "maybe"),
                       doctest::Contains("bad boolean for use_pos"), usage_error);
  CHECK_THROWS_AS(RunConfig::deserialize("no equals sign here"), usage_error);

  // Comments and blank lines are allowed in config text.
  RunConfig commented = RunConfig::deserialize("# a comment\n\nepochs = 3\n");
  CHECK(commented.epochs == 3);

  const std::vector<std::string>& arch = RunConfig::architecture_keys();
  CHECK_FALSE(arch.empty());
  for (const char* key : {"word_dim", "lstm_hidden", "mlp_dim", "mode"})
    CHECK(std::find(arch.begin(), arch.end(), key) != arch.end());
}
