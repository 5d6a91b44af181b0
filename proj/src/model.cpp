#include "treesrl/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "treesrl/eval.hpp"
#include "treesrl/synth.hpp"

namespace treesrl {

// ---- vocab -----------------------------------------------------------------

namespace {

int lookup_or_unk(const std::map<std::string, int>& m, const std::string& s) {
  if (s == Vocab::kUnk) return 0;
  if (s == Vocab::kVr) return 1;
  auto it = m.find(s);
  return it == m.end() ? 0 : it->second;
}

}  // namespace

int Vocab::word_id(const std::string& s) const { return lookup_or_unk(word, s); }
int Vocab::lemma_id(const std::string& s) const { return lookup_or_unk(lemma, s); }
int Vocab::pos_id(const std::string& s) const { return lookup_or_unk(pos, s); }

std::size_t Vocab::role_id(const std::string& role) const {
  auto it = label_id.find(role);
  if (it == label_id.end() || it->second >= n_roles) return 0;  // <NONE>
  return it->second;
}

std::size_t Vocab::sense_id(const std::string& suffix) const {
  auto it = label_id.find(suffix);
  if (it == label_id.end() || it->second < n_roles) return npos;
  return it->second;
}

const std::string& feature_lemma(const Token& t) {
  return t.plemma != "_" || t.lemma == "_" ? t.plemma : t.lemma;
}

const std::string& feature_pos(const Token& t) {
  return t.ppos != "_" || t.pos == "_" ? t.ppos : t.pos;
}

std::string sense_suffix(const std::string& pred) {
  std::size_t dot = pred.rfind('.');
  return dot == std::string::npos ? pred : pred.substr(dot + 1);
}

bool sense_degenerate_language(const std::string& language) {
  std::string l;
  for (char c : language) l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return l == "cs" || l == "cz" || l == "cze" || l == "czech" || l == "ja" || l == "jp" ||
         l == "jpn" || l == "japanese";
}

Vocab Vocab::build(const Corpus& corpus, TaskMode mode) {
  Vocab v;
  std::set<std::string> words, lemmas, poss, roles, senses;
  for (const Sentence& sent : corpus) {
    for (const Token& t : sent.tokens) {
      if (t.form != kUnk && t.form != kVr) words.insert(t.form);
      const std::string& lm = feature_lemma(t);
      const std::string& ps = feature_pos(t);
      if (lm != kUnk && lm != kVr) lemmas.insert(lm);
      if (ps != kUnk && ps != kVr) poss.insert(ps);
      ++v.word_freq[t.form];
      ++v.lemma_freq[lm];
      for (const std::string& r : t.apreds)
        if (!r.empty() && r != kNone) roles.insert(r);
      if (mode == TaskMode::end_to_end && !t.pred_sense.empty())
        senses.insert(sense_suffix(t.pred_sense));
    }
  }
  int id = 2;
  for (const std::string& w : words) v.word[w] = id++;
  id = 2;
  for (const std::string& l : lemmas) v.lemma[l] = id++;
  id = 2;
  for (const std::string& p : poss) v.pos[p] = id++;
  v.labels.push_back(kNone);
  for (const std::string& r : roles) v.labels.push_back(r);
  v.n_roles = v.labels.size();
  for (const std::string& s : senses) v.labels.push_back(s);
  for (std::size_t i = 0; i < v.labels.size(); ++i) v.label_id[v.labels[i]] = i;
  return v;
}

std::string Vocab::serialize() const {
  std::ostringstream os;
  os << "#n_roles " << n_roles << '\n';
  os << "#labels " << labels.size() << '\n';
  for (const std::string& l : labels) os << l << '\n';
  auto dump = [&os](const char* name, const std::map<std::string, int>& m) {
    os << '#' << name << ' ' << m.size() << '\n';
    std::vector<const std::string*> by_id(m.size());
    for (const auto& [s, id] : m) by_id[static_cast<std::size_t>(id - 2)] = &s;
    for (const std::string* s : by_id) os << *s << '\n';
  };
  dump("words", word);
  dump("lemmas", lemma);
  dump("pos", pos);
  return os.str();
}

Vocab Vocab::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto header = [&](const std::string& name) -> std::size_t {
    if (!std::getline(in, line)) throw data_error("vocab section: missing #" + name + " header");
    std::istringstream ls(line);
    std::string tag;
    long long n = -1;
    if (!(ls >> tag >> n) || tag != "#" + name || n < 0)
      throw data_error("vocab section: expected '#" + name + " N', got '" + line + "'");
    return static_cast<std::size_t>(n);
  };
  auto body_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw data_error("vocab section: truncated");
    return line;
  };
  Vocab v;
  v.n_roles = header("n_roles");
  std::size_t n_labels = header("labels");
  for (std::size_t i = 0; i < n_labels; ++i) v.labels.push_back(body_line());
  if (v.n_roles == 0 || v.n_roles > v.labels.size() || v.labels[0] != kNone)
    throw data_error("vocab section: malformed label partition");
  for (std::size_t i = 0; i < v.labels.size(); ++i) v.label_id[v.labels[i]] = i;
  auto read_map = [&](const char* name, std::map<std::string, int>& m) {
    std::size_t n = header(name);
    for (std::size_t i = 0; i < n; ++i) m[body_line()] = static_cast<int>(2 + i);
    if (m.size() != n) throw data_error("vocab section: duplicate entry under #" + std::string(name));
  };
  read_map("words", v.word);
  read_map("lemmas", v.lemma);
  read_map("pos", v.pos);
  return v;
}

// ---- virtual root ----------------------------------------------------------

Sentence to_virtual_root(const Sentence& sent) {
  Sentence out = sent;
  Token vr;
  vr.id = sent.size() + 1;
  vr.form = vr.lemma = vr.plemma = Vocab::kVr;
  vr.pos = vr.ppos = Vocab::kVr;
  vr.head = vr.phead = 0;
  vr.apreds.assign(sent.predicates.size(), "");
  out.tokens.push_back(std::move(vr));
  return out;
}

Sentence strip_virtual_root(const Sentence& sent) {
  if (sent.tokens.empty() || sent.tokens.back().form != Vocab::kVr)
    throw usage_error("strip_virtual_root: sentence has no trailing <VR> token");
  Sentence out = sent;
  out.tokens.pop_back();
  return out;
}

// ---- instances -------------------------------------------------------------

std::vector<Instance> build_instances(const Corpus& corpus, const RunConfig& cfg,
                                      const Vocab& vocab, const RuleSet* rules) {
  if (cfg.prune == PruneMode::rule && rules == nullptr)
    throw usage_error("prune mode 'rule' requires a mined rule set");
  std::vector<Instance> out;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const Sentence& sent = corpus[s];
    DepTree tree = DepTree::from_sentence(sent, cfg.syntax);
    for (std::size_t slot = 0; slot < sent.predicates.size(); ++slot) {
      Instance inst;
      inst.sent = static_cast<int>(s);
      inst.pred_slot = static_cast<int>(slot);
      inst.predicate = sent.predicates[slot];
      if (cfg.mode == TaskMode::end_to_end) inst.vr = sent.size();

      PruneMask mask;
      switch (cfg.prune) {
        case PruneMode::rule: mask = prune(tree, inst.predicate, *rules); break;
        case PruneMode::korder: mask = prune_korder(tree, inst.predicate, cfg.korder); break;
        case PruneMode::none: {
          mask.predicate = inst.predicate;
          for (int id = 1; id <= sent.size(); ++id) mask.retained.push_back(id);
          break;
        }
      }
      for (int id : mask.retained) {
        if (id == inst.vr) continue;
        inst.candidates.push_back(id);
        const std::string& role =
            slot < sent.token(id).apreds.size() ? sent.token(id).apreds[slot] : std::string();
        inst.gold.push_back(role.empty() ? 0 : vocab.role_id(role));
      }
      if (inst.vr > 0) {
        const std::string& ps = sent.token(inst.predicate).pred_sense;
        inst.gold_sense = ps.empty() ? Vocab::npos : vocab.sense_id(sense_suffix(ps));
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

// ---- external embeddings ---------------------------------------------------

ExternalEmbeddings load_external_embeddings(const std::string& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open external embeddings: " + path);
  std::string line;
  long lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!strip(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw data_error("external embeddings: empty file");
  int dim = -1;
  long long n_sent = -1;
  {
    std::istringstream hs(line);
    std::string a, b;
    hs >> a >> b;
    if (a.rfind("#dim=", 0) != 0 || b.rfind("#sentences=", 0) != 0)
      throw data_error("external embeddings: expected '#dim=D #sentences=S'", lineno);
    try {
      dim = std::stoi(a.substr(5));
      n_sent = std::stoll(b.substr(11));
    } catch (const std::exception&) {
      throw data_error("external embeddings: bad header numbers", lineno);
    }
  }
  if (dim <= 0) throw data_error("external embeddings: dim must be positive", lineno);
  if (static_cast<std::size_t>(n_sent) != corpus.size())
    throw data_error("external embeddings: file has " + std::to_string(n_sent) +
                     " sentences, corpus has " + std::to_string(corpus.size()));
  ExternalEmbeddings ext;
  ext.dim = dim;
  ext.sent.resize(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (!next_line()) throw data_error("external embeddings: missing '#sent' header for sentence " +
                                       std::to_string(s));
    std::istringstream hs(line);
    std::string tag;
    long long idx = -1, n_tok = -1;
    hs >> tag >> idx >> n_tok;
    if (tag != "#sent" || idx != static_cast<long long>(s))
      throw data_error("external embeddings: expected '#sent " + std::to_string(s) + " N'",
                       lineno);
    if (n_tok != corpus[s].size())
      throw data_error("external embeddings: sentence " + std::to_string(s) + " has " +
                       std::to_string(n_tok) + " tokens, corpus has " +
                       std::to_string(corpus[s].size()));
    ext.sent[s].resize(static_cast<std::size_t>(n_tok));
    for (long long t = 0; t < n_tok; ++t) {
      if (!next_line())
        throw data_error("external embeddings: sentence " + std::to_string(s) + " token " +
                         std::to_string(t) + ": missing vector line");
      std::istringstream vs(line);
      Vec v;
      double x;
      while (vs >> x) v.push_back(x);
      if (static_cast<int>(v.size()) != dim)
        throw data_error("external embeddings: sentence " + std::to_string(s) + " token " +
                             std::to_string(t) + ": expected " + std::to_string(dim) +
                             " values, got " + std::to_string(v.size()),
                         lineno);
      check_finite(v, "external embedding vector");
      ext.sent[s][static_cast<std::size_t>(t)] = std::move(v);
    }
  }
  if (next_line())
    throw data_error("external embeddings: trailing content after last sentence", lineno);
  return ext;
}

void write_external_embeddings(const ExternalEmbeddings& ext, std::ostream& out) {
  out << "#dim=" << ext.dim << " #sentences=" << ext.sent.size() << '\n';
  for (std::size_t s = 0; s < ext.sent.size(); ++s) {
    out << "#sent " << s << ' ' << ext.sent[s].size() << '\n';
    for (const Vec& v : ext.sent[s]) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (j) out << ' ';
        out << v[j];
      }
      out << '\n';
    }
  }
}

// ---- parameters ------------------------------------------------------------

int rep_dim(const RunConfig& cfg) {
  int d = cfg.word_dim + cfg.pretrained_dim + cfg.indicator_dim + cfg.contextual_dim;
  if (cfg.use_lemma) d += cfg.lemma_dim;
  if (cfg.use_pos) d += cfg.pos_dim;
  return d;
}

ModelParams init_params(const RunConfig& cfg, const Vocab& vocab, Rng& rng) {
  if (cfg.word_dim <= 0 || cfg.indicator_dim <= 0 || cfg.lstm_hidden <= 0 ||
      cfg.lstm_layers <= 0 || cfg.mlp_dim <= 0)
    throw usage_error("init_params: dimensions must be positive");
  ModelParams p;
  const std::size_t H = static_cast<std::size_t>(cfg.lstm_hidden);
  const std::size_t M = static_cast<std::size_t>(cfg.mlp_dim);
  const std::size_t L = vocab.n_labels();

  init_uniform(p.add("emb.word", {vocab.n_words(), std::size_t(cfg.word_dim)}), rng, 0.1);
  // Ablated feature blocks get no table at all, so checkpoints carry no dead
  // weights and the optimizer never walks parameters the loss cannot reach.
  if (cfg.use_lemma)
    init_uniform(p.add("emb.lemma", {vocab.n_lemmas(), std::size_t(cfg.lemma_dim)}), rng, 0.1);
  if (cfg.use_pos)
    init_uniform(p.add("emb.pos", {vocab.n_pos(), std::size_t(cfg.pos_dim)}), rng, 0.1);
  init_uniform(p.add("emb.pre", {vocab.n_words(), std::size_t(cfg.pretrained_dim)}), rng, 0.1);
  if (!cfg.finetune_pretrained) p.frozen.insert("emb.pre");
  init_uniform(p.add("emb.ind", {2, std::size_t(cfg.indicator_dim)}), rng, 0.1);

  std::size_t in = static_cast<std::size_t>(rep_dim(cfg));
  for (int l = 0; l < cfg.lstm_layers; ++l) {
    for (const char* dir : {"fw", "bw"}) {
      std::string base = "lstm.l" + std::to_string(l) + "." + dir + ".";
      init_xavier(p.add(base + "Wih", {4 * H, in}), rng, in, H);
      init_xavier(p.add(base + "Whh", {4 * H, H}), rng, H, H);
      Tensor& b = p.add(base + "b", {4 * H});
      for (std::size_t j = H; j < 2 * H; ++j) b.v[j] = 1.0;  // forget gate
    }
    in = 2 * H;
  }

  init_xavier(p.add("head.p.W", {M, 2 * H}), rng, 2 * H, M);
  p.add("head.p.b", {M});
  init_xavier(p.add("head.a.W", {M, 2 * H}), rng, 2 * H, M);
  p.add("head.a.b", {M});

  init_xavier(p.add("scorer.W1", {L, M, M}), rng, M, M);
  init_xavier(p.add("scorer.W2", {L, 2 * M}), rng, 2 * M, L);
  p.add("scorer.b", {L});
  return p;
}

// ---- forward / backward ----------------------------------------------------

namespace {

// Concatenated word representation for one token; records the embedding rows
// used so backward can scatter into the same rows.
Vec assemble_rep(const RunConfig& cfg, const Vocab& vocab, const ModelParams& params,
                 const Token& tok, bool is_pred, const Vec* ctx_vec, bool train, Rng* rng,
                 int& wid, int& lid, int& pid) {
  wid = vocab.word_id(tok.form);
  lid = vocab.lemma_id(feature_lemma(tok));
  pid = vocab.pos_id(feature_pos(tok));
  if (train && rng && cfg.unk_prob > 0.0) {
    auto wf = vocab.word_freq.find(tok.form);
    if (wf != vocab.word_freq.end() && wf->second == 1 &&
        uniform(*rng, 0.0, 1.0) < cfg.unk_prob)
      wid = 0;
    auto lf = vocab.lemma_freq.find(feature_lemma(tok));
    if (lf != vocab.lemma_freq.end() && lf->second == 1 &&
        uniform(*rng, 0.0, 1.0) < cfg.unk_prob)
      lid = 0;
  }
  Vec x;
  x.reserve(static_cast<std::size_t>(rep_dim(cfg)));
  auto append_row = [&x](const Tensor& t, int row) {
    const double* r = t.row(static_cast<std::size_t>(row));
    x.insert(x.end(), r, r + t.cols());
  };
  append_row(params.at("emb.word"), wid);
  if (cfg.use_lemma) append_row(params.at("emb.lemma"), lid);
  if (cfg.use_pos) append_row(params.at("emb.pos"), pid);
  append_row(params.at("emb.pre"), wid);
  append_row(params.at("emb.ind"), is_pred ? 1 : 0);
  if (cfg.contextual_dim > 0) {
    if (ctx_vec) {
      if (static_cast<int>(ctx_vec->size()) != cfg.contextual_dim)
        throw data_error("contextual vector dimension mismatch");
      x.insert(x.end(), ctx_vec->begin(), ctx_vec->end());
    } else {
      x.insert(x.end(), static_cast<std::size_t>(cfg.contextual_dim), 0.0);
    }
  }
  return x;
}

void scatter_rep_grads(const RunConfig& cfg, const ModelParams& params, const Vec& dx, int wid,
                       int lid, int pid, bool is_pred, GradMap& grads) {
  std::size_t off = 0;
  auto add_row = [&](const char* name, int row) {
    Tensor& g = grad_of(grads, params, name);
    double* r = g.row(static_cast<std::size_t>(row));
    for (std::size_t j = 0; j < g.cols(); ++j) r[j] += dx[off + j];
    off += g.cols();
  };
  add_row("emb.word", wid);
  if (cfg.use_lemma) add_row("emb.lemma", lid);
  if (cfg.use_pos) add_row("emb.pos", pid);
  add_row("emb.pre", wid);
  add_row("emb.ind", is_pred ? 1 : 0);
  // contextual segment: external input, no parameter to update
}

std::size_t candidate_index(const Instance& inst, int id) {
  auto it = std::lower_bound(inst.candidates.begin(), inst.candidates.end(), id);
  if (it == inst.candidates.end() || *it != id)
    throw usage_error("instance candidates do not contain token " + std::to_string(id));
  return static_cast<std::size_t>(it - inst.candidates.begin());
}

}  // namespace

InstanceScores forward_instance(const RunConfig& cfg, const Vocab& vocab,
                                const ModelParams& params, const Sentence& sent,
                                const Instance& inst, const std::vector<Vec>* ctx, bool train,
                                Rng* rng, ForwardCache* cache) {
  if (cfg.contextual_dim > 0 && ctx == nullptr)
    throw usage_error("contextual_dim > 0 but no external embeddings supplied");
  if (train && rng == nullptr) throw usage_error("train-mode forward requires an RNG");
  const int n = sent.size();
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache();
  c.inputs.resize(static_cast<std::size_t>(n));
  c.wid.resize(static_cast<std::size_t>(n));
  c.lid.resize(static_cast<std::size_t>(n));
  c.pid.resize(static_cast<std::size_t>(n));
  for (int id = 1; id <= n; ++id) {
    const Vec* cv = nullptr;
    if (cfg.contextual_dim > 0 && static_cast<std::size_t>(id - 1) < ctx->size())
      cv = &(*ctx)[static_cast<std::size_t>(id - 1)];
    std::size_t t = static_cast<std::size_t>(id - 1);
    c.inputs[t] = assemble_rep(cfg, vocab, params, sent.token(id), id == inst.predicate, cv,
                               train, rng, c.wid[t], c.lid[t], c.pid[t]);
  }

  c.h = bilstm_forward(params, "lstm", cfg.lstm_layers, c.inputs, cfg.lstm_keep, train, rng,
                       &c.lstm);

  const std::size_t M = static_cast<std::size_t>(cfg.mlp_dim);
  auto head = [&](const char* which, const Vec& in, Vec& pre, Vec& mask) {
    std::string base = std::string("head.") + which + ".";
    Vec out = affine_relu(params.at(base + "W"), params.at(base + "b"), in, &pre);
    if (train && cfg.mlp_keep < 1.0) {
      mask = dropout_mask(M, cfg.mlp_keep, *rng);
      for (std::size_t j = 0; j < M; ++j) out[j] *= mask[j];
    }
    return out;
  };

  c.hp = head("p", c.h[static_cast<std::size_t>(inst.predicate - 1)], c.hp_pre, c.hp_mask);
  const std::size_t nc = inst.candidates.size();
  c.ha.resize(nc);
  c.ha_pre.resize(nc);
  c.ha_mask.resize(nc);
  for (std::size_t ci = 0; ci < nc; ++ci)
    c.ha[ci] = head("a", c.h[static_cast<std::size_t>(inst.candidates[ci] - 1)], c.ha_pre[ci],
                    c.ha_mask[ci]);

  const Tensor& W1 = params.at("scorer.W1");
  const Tensor& W2 = params.at("scorer.W2");
  const Tensor& b = params.at("scorer.b");
  c.scores.cand.resize(nc);
  for (std::size_t ci = 0; ci < nc; ++ci) c.scores.cand[ci] = biaffine(W1, W2, b, c.hp, c.ha[ci]);

  if (inst.vr > 0) {
    c.vrp = head("p", c.h[static_cast<std::size_t>(inst.vr - 1)], c.vrp_pre, c.vrp_mask);
    c.scores.vr = biaffine(W1, W2, b, c.vrp, c.ha[candidate_index(inst, inst.predicate)]);
  }
  return c.scores;
}

double instance_loss(const RunConfig& cfg, const Vocab& vocab, const ModelParams& params,
                     const Sentence& sent, const Instance& inst, const std::vector<Vec>* ctx,
                     bool train, Rng* rng, GradMap* grads, std::size_t* n_items) {
  ForwardCache c;
  forward_instance(cfg, vocab, params, sent, inst, ctx, train, rng, &c);

  const std::size_t R = vocab.n_roles;
  const std::size_t L = vocab.n_labels();
  const std::size_t nc = inst.candidates.size();
  double loss = 0.0;
  std::size_t items = 0;
  std::vector<Vec> dscores(nc);
  for (std::size_t ci = 0; ci < nc; ++ci) {
    XentResult r = softmax_xent(c.scores.cand[ci], inst.gold[ci], 0, R);
    loss += r.loss;
    ++items;
    if (grads) dscores[ci] = std::move(r.grad);
  }
  Vec dvr;
  const bool sense_pair = inst.vr > 0 && inst.gold_sense != Vocab::npos;
  if (sense_pair) {
    XentResult r = softmax_xent(c.scores.vr, inst.gold_sense, R, L);
    loss += r.loss;
    ++items;
    if (grads) dvr = std::move(r.grad);
  }
  if (n_items) *n_items += items;
  if (!grads) return loss;

  const Tensor& W1 = params.at("scorer.W1");
  const Tensor& W2 = params.at("scorer.W2");
  Tensor& dW1 = grad_of(*grads, params, "scorer.W1");
  Tensor& dW2 = grad_of(*grads, params, "scorer.W2");
  Tensor& db = grad_of(*grads, params, "scorer.b");

  const std::size_t M = static_cast<std::size_t>(cfg.mlp_dim);
  Vec dhp(M, 0.0), dvrp(M, 0.0);
  std::vector<Vec> dha(nc, Vec(M, 0.0));
  for (std::size_t ci = 0; ci < nc; ++ci)
    biaffine_backward(W1, W2, c.hp, c.ha[ci], dscores[ci], dhp, dha[ci], dW1, dW2, db);
  if (sense_pair) {
    std::size_t pci = candidate_index(inst, inst.predicate);
    biaffine_backward(W1, W2, c.vrp, c.ha[pci], dvr, dvrp, dha[pci], dW1, dW2, db);
  }

  // Head MLPs (dropout mask, then ReLU/affine backward into encoder grads).
  std::vector<Vec> dh(static_cast<std::size_t>(sent.size()),
                      Vec(2 * static_cast<std::size_t>(cfg.lstm_hidden), 0.0));
  auto head_backward = [&](const char* which, const Vec& in_h, const Vec& pre, const Vec& mask,
                           Vec dy, Vec& dh_tok) {
    if (!mask.empty())
      for (std::size_t j = 0; j < M; ++j) dy[j] *= mask[j];
    std::string base = std::string("head.") + which + ".";
    affine_relu_backward(params.at(base + "W"), in_h, pre, dy, dh_tok,
                         grad_of(*grads, params, base + "W"),
                         grad_of(*grads, params, base + "b"));
  };
  head_backward("p", c.h[static_cast<std::size_t>(inst.predicate - 1)], c.hp_pre, c.hp_mask,
                std::move(dhp), dh[static_cast<std::size_t>(inst.predicate - 1)]);
  for (std::size_t ci = 0; ci < nc; ++ci)
    head_backward("a", c.h[static_cast<std::size_t>(inst.candidates[ci] - 1)], c.ha_pre[ci],
                  c.ha_mask[ci], std::move(dha[ci]),
                  dh[static_cast<std::size_t>(inst.candidates[ci] - 1)]);
  if (sense_pair)
    head_backward("p", c.h[static_cast<std::size_t>(inst.vr - 1)], c.vrp_pre, c.vrp_mask,
                  std::move(dvrp), dh[static_cast<std::size_t>(inst.vr - 1)]);

  std::vector<Vec> dx = bilstm_backward(params, "lstm", cfg.lstm_layers, c.lstm, dh, *grads);
  for (int id = 1; id <= sent.size(); ++id) {
    std::size_t t = static_cast<std::size_t>(id - 1);
    scatter_rep_grads(cfg, params, dx[t], c.wid[t], c.lid[t], c.pid[t], id == inst.predicate,
                      *grads);
  }
  return loss;
}

Frame decode_instance(const Vocab& vocab, const Instance& inst, const InstanceScores& scores) {
  Frame f;
  f.predicate = inst.predicate;
  const std::size_t R = vocab.n_roles;
  for (std::size_t ci = 0; ci < inst.candidates.size(); ++ci) {
    const Vec& s = scores.cand[ci];
    std::size_t best = 0;
    for (std::size_t l = 1; l < R; ++l)
      if (s[l] > s[best]) best = l;
    if (best != 0) f.arcs.push_back({inst.candidates[ci], vocab.labels[best]});
  }
  if (!scores.vr.empty() && vocab.n_senses() > 0) {
    std::size_t best = R;
    for (std::size_t l = R + 1; l < vocab.n_labels(); ++l)
      if (scores.vr[l] > scores.vr[best]) best = l;
    f.sense = vocab.labels[best];
  }
  return f;
}

// ---- training --------------------------------------------------------------

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng instance_rng(std::uint64_t seed, int epoch, std::size_t instance) {
  return Rng(mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(epoch)) ^
                   static_cast<std::uint64_t>(instance)));
}

struct BatchAcc {
  GradMap grads;
  double loss = 0.0;
  std::size_t items = 0;
};

Corpus augment_corpus(const Corpus& corpus) {
  Corpus out;
  out.reserve(corpus.size());
  for (const Sentence& s : corpus) out.push_back(to_virtual_root(s));
  return out;
}

const std::vector<Vec>* ctx_for(const ExternalEmbeddings* ext, std::size_t s) {
  return ext == nullptr ? nullptr : &ext->sent.at(s);
}

Corpus predict_on_instances(const RunConfig& cfg, const Vocab& vocab, const ModelParams& params,
                            const Corpus& original, const Corpus& augmented,
                            const std::vector<Instance>& instances,
                            const ExternalEmbeddings* ctx, int threads) {
  Corpus out = original;
  for (Sentence& sent : out)
    for (Token& t : sent.tokens) t.apreds.assign(sent.predicates.size(), "");

  std::vector<std::vector<std::size_t>> by_sent(original.size());
  for (std::size_t i = 0; i < instances.size(); ++i)
    by_sent[static_cast<std::size_t>(instances[i].sent)].push_back(i);

  parallel_chunks<int>(
      original.size(), threads,
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
          for (std::size_t ii : by_sent[s]) {
            const Instance& inst = instances[ii];
            InstanceScores scores = forward_instance(cfg, vocab, params, augmented[s], inst,
                                                     ctx_for(ctx, s), false, nullptr, nullptr);
            Frame frame = decode_instance(vocab, inst, scores);
            Sentence& dst = out[s];
            for (const Arc& arc : frame.arcs)
              dst.token(arc.arg).apreds[static_cast<std::size_t>(inst.pred_slot)] = arc.role;
            if (!frame.sense.empty())
              dst.token(inst.predicate).pred_sense =
                  feature_lemma(dst.token(inst.predicate)) + "." + frame.sense;
          }
        }
        return 0;
      },
      [](int&, int) {});
  return out;
}

}  // namespace

Corpus predict_corpus(const RunConfig& cfg, const Vocab& vocab, const ModelParams& params,
                      const Corpus& input, const RuleSet* rules, const ExternalEmbeddings* ctx,
                      int threads) {
  if (cfg.contextual_dim > 0 && ctx == nullptr)
    throw usage_error("predict: contextual_dim > 0 but no external embeddings supplied");
  const bool e2e = cfg.mode == TaskMode::end_to_end;
  Corpus augmented = e2e ? augment_corpus(input) : input;
  std::vector<Instance> instances = build_instances(augmented, cfg, vocab, rules);
  return predict_on_instances(cfg, vocab, params, input, augmented, instances, ctx, threads);
}

TrainResult train_model(const RunConfig& cfg, Corpus train, const Corpus* dev,
                        const RuleSet* rules, const ExternalEmbeddings* train_ctx,
                        const ExternalEmbeddings* dev_ctx, std::ostream* log) {
  const bool e2e = cfg.mode == TaskMode::end_to_end;
  if (e2e && sense_degenerate_language(cfg.language))
    throw usage_error("end-to-end mode is not supported for language '" + cfg.language +
                      "' (one-to-one predicate-sense mapping)");
  if (cfg.contextual_dim > 0 && train_ctx == nullptr)
    throw usage_error("train: contextual_dim > 0 but no external embeddings supplied");
  if (cfg.contextual_dim > 0 && dev != nullptr && dev_ctx == nullptr)
    throw usage_error("train: dev corpus needs external embeddings too");
  if (cfg.epochs <= 0 || cfg.batch_size <= 0)
    throw usage_error("train: epochs and batch_size must be positive");

  Vocab vocab = Vocab::build(train, cfg.mode);
  if (vocab.n_roles < 2) throw data_error("training corpus has no argument labels");
  if (e2e && vocab.n_senses() == 0)
    throw data_error("end-to-end mode but training corpus has no predicate senses");

  Corpus augmented = e2e ? augment_corpus(train) : std::move(train);
  std::vector<Instance> instances = build_instances(augmented, cfg, vocab, rules);
  if (instances.empty()) throw data_error("training corpus has no predicates");

  Corpus dev_augmented;
  std::vector<Instance> dev_instances;
  if (dev) {
    dev_augmented = e2e ? augment_corpus(*dev) : *dev;
    dev_instances = build_instances(dev_augmented, cfg, vocab, rules);
  }

  Rng rng(cfg.seed);
  ModelParams params = init_params(cfg, vocab, rng);
  AdamState adam;
  TrainResult res;
  ModelParams best_params;
  bool have_best = false;

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_items = 0;
    const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::size_t count = std::min(B, order.size() - start);
      BatchAcc acc = parallel_chunks<BatchAcc>(
          count, cfg.threads,
          [&](std::size_t lo, std::size_t hi) {
            BatchAcc a;
            for (std::size_t k = lo; k < hi; ++k) {
              std::size_t idx = order[start + k];
              const Instance& inst = instances[idx];
              Rng ir = instance_rng(cfg.seed, epoch, idx);
              a.loss += instance_loss(cfg, vocab, params,
                                      augmented[static_cast<std::size_t>(inst.sent)], inst,
                                      ctx_for(train_ctx, static_cast<std::size_t>(inst.sent)),
                                      true, &ir, &a.grads, &a.items);
            }
            return a;
          },
          [](BatchAcc& a, const BatchAcc& b) {
            a.loss += b.loss;
            a.items += b.items;
            for (const auto& [name, g] : b.grads) {
              auto it = a.grads.find(name);
              if (it == a.grads.end())
                a.grads.emplace(name, g);
              else
                axpy(1.0, g.v, it->second.v);
            }
          });
      const double inv = 1.0 / static_cast<double>(count);
      for (auto& [name, g] : acc.grads)
        for (double& x : g.v) x *= inv;
      try {
        adam_step(params, acc.grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      } catch (const numeric_error& e) {
        throw numeric_error("epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(start / B + 1) + ": " + e.what());
      }
      epoch_loss += acc.loss;
      epoch_items += acc.items;
    }

    TrainLogRow row;
    row.epoch = epoch;
    row.items = static_cast<std::int64_t>(epoch_items);
    row.loss = epoch_items == 0 ? 0.0 : epoch_loss / static_cast<double>(epoch_items);
    check_finite(row.loss, "epoch " + std::to_string(epoch) + " loss");

    bool stop = false;
    if (dev && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      Corpus pred = predict_on_instances(cfg, vocab, params, *dev, dev_augmented, dev_instances,
                                         dev_ctx, cfg.threads);
      row.has_dev = true;
      row.dev_f1 = score(*dev, pred, e2e, cfg.threads).f1();
      if (!have_best || row.dev_f1 > res.best_f1) {
        res.best_f1 = row.dev_f1;
        res.best_epoch = epoch;
        best_params = params;
        have_best = true;
      }
      if (cfg.early_stop_f1 > 0.0 && row.dev_f1 >= cfg.early_stop_f1) stop = true;
    }
    res.log.push_back(row);
    res.epochs_run = epoch;
    if (log) {
      *log << "epoch=" << row.epoch << " loss=" << row.loss << " items=" << row.items;
      if (row.has_dev) *log << " dev_f1=" << row.dev_f1;
      *log << std::endl;
    }
    if (stop) break;
  }

  if (!have_best) best_params = std::move(params);
  res.checkpoint = make_checkpoint(cfg, vocab, best_params, rules);
  return res;
}

// ---- checkpoint plumbing ---------------------------------------------------

Checkpoint make_checkpoint(const RunConfig& cfg, const Vocab& vocab, const ModelParams& params,
                           const RuleSet* rules) {
  Checkpoint ckpt;
  ckpt.config_text = cfg.serialize();
  ckpt.sections.emplace_back("vocab", vocab.serialize());
  if (rules) {
    std::ostringstream os;
    write_rules(*rules, os);
    ckpt.sections.emplace_back("rules", os.str());
  }
  ckpt.params = params;
  return ckpt;
}

void unpack_checkpoint(const Checkpoint& ckpt, RunConfig& cfg, Vocab& vocab,
                       ModelParams& params, RuleSet* rules, bool* has_rules) {
  cfg = RunConfig::deserialize(ckpt.config_text);
  const std::string* vs = ckpt.section("vocab");
  if (!vs) throw data_error("checkpoint has no vocab section");
  vocab = Vocab::deserialize(*vs);
  params = ckpt.params;
  const std::string* rs = ckpt.section("rules");
  if (has_rules) *has_rules = rs != nullptr;
  if (rs && rules) {
    std::istringstream in(*rs);
    *rules = read_rules(in);
  }
}

// ---- gradient check --------------------------------------------------------

double pipeline_grad_check(const RunConfig& cfg, int n_sentences, int samples, double step) {
  SynthConfig sc;
  sc.seed = cfg.seed;
  sc.n_sentences = n_sentences;
  // The (1,2) tuple needs two depth-2 branches around the predicate, so only
  // trees with 6+ tokens admit the distribution; shorter ranges make the
  // generator's per-sentence retry budget fail for many seeds.
  sc.min_len = 6;
  sc.max_len = 9;
  sc.tuple_distribution = {{{0, 1}, 0.5}, {{1, 2}, 0.3}, {{0, 2}, 0.2}};
  sc.predicate_rate = 0.5;
  sc.vocab_words = 20;
  auto [corpus, truth] = synth_corpus(sc);
  (void)truth;

  Vocab vocab = Vocab::build(corpus, cfg.mode);
  const bool e2e = cfg.mode == TaskMode::end_to_end;
  Corpus augmented = e2e ? augment_corpus(corpus) : std::move(corpus);
  RunConfig rc = cfg;
  rc.prune = PruneMode::none;  // every pair contributes to the checked loss
  std::vector<Instance> instances = build_instances(augmented, rc, vocab, nullptr);

  Rng rng(cfg.seed);
  ModelParams params = init_params(rc, vocab, rng);

  auto total_loss = [&](const ModelParams& p) {
    double loss = 0.0;
    for (const Instance& inst : instances)
      loss += instance_loss(rc, vocab, p, augmented[static_cast<std::size_t>(inst.sent)], inst,
                            nullptr, false, nullptr, nullptr);
    return loss;
  };
  GradMap grads;
  for (const Instance& inst : instances)
    instance_loss(rc, vocab, params, augmented[static_cast<std::size_t>(inst.sent)], inst,
                  nullptr, false, nullptr, &grads);

  Rng check_rng(cfg.seed ^ 0xABCDEFull);
  return grad_check(total_loss, params, grads, samples, step, check_rng);
}

}  // namespace treesrl
