#include "treesrl/synth.hpp"

#include <algorithm>
#include <numeric>

namespace treesrl {

namespace {

const std::vector<std::string> kPosTags = {"N", "V", "J", "R", "D"};

DistanceTuple draw_tuple(const SynthConfig& cfg, Rng& rng, double total_mass) {
  double r = uniform(rng, 0.0, total_mass);
  double acc = 0.0;
  for (const auto& [t, w] : cfg.tuple_distribution) {
    acc += w;
    if (r < acc) return t;
  }
  return cfg.tuple_distribution.back().first;
}

std::vector<int> random_tree(int n, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> parent(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t i = 1; i < order.size(); ++i)
    parent[static_cast<std::size_t>(order[i])] = order[uniform_index(rng, i)];
  return parent;
}

// Candidates at the given tuple from `pred`, excluding ids already used.
std::vector<int> tuple_candidates(const DepTree& tree, int pred, DistanceTuple t,
                                  const std::vector<bool>& used) {
  std::vector<int> out;
  for (int a = 1; a <= tree.size(); ++a)
    if (!used[static_cast<std::size_t>(a)] && tree.distance(pred, a) == t) out.push_back(a);
  return out;
}

struct Placement {
  int pred = 0;
  std::vector<std::pair<int, DistanceTuple>> args;  // (token id, tuple)
};

}  // namespace

std::pair<Corpus, SynthTruth> synth_corpus(const SynthConfig& cfg) {
  if (cfg.max_len < 2) throw usage_error("synth: max_len must be >= 2");
  if (cfg.min_len < 2 || cfg.min_len > cfg.max_len)
    throw usage_error("synth: min_len must be in [2, max_len]");
  if (cfg.roles.empty()) throw usage_error("synth: role inventory must not be empty");
  if (cfg.tuple_distribution.empty())
    throw usage_error("synth: tuple distribution must not be empty");
  double total_mass = 0.0;
  for (const auto& [t, w] : cfg.tuple_distribution) {
    if (w <= 0.0) throw usage_error("synth: tuple weights must be positive");
    total_mass += w;
  }

  Rng rng(cfg.seed);
  Corpus corpus;
  SynthTruth truth;
  int failures = 0;
  DistanceTuple last_failed{};

  while (static_cast<int>(corpus.size()) < cfg.n_sentences) {
    int n = cfg.min_len + static_cast<int>(uniform_index(
                              rng, static_cast<std::size_t>(cfg.max_len - cfg.min_len + 1)));
    std::vector<int> parent = random_tree(n, rng);
    DepTree tree = DepTree::from_parents(parent);

    // A token may carry a predicate only if every tuple in the distribution
    // has at least one landing site from it; this keeps the empirical tuple
    // frequencies close to the requested ones.
    std::vector<int> eligible;
    std::vector<bool> nothing_used(static_cast<std::size_t>(n) + 1, false);
    for (int p = 1; p <= n; ++p) {
      bool ok = true;
      for (const auto& [t, w] : cfg.tuple_distribution)
        if (tuple_candidates(tree, p, t, nothing_used).empty()) {
          ok = false;
          break;
        }
      if (ok) eligible.push_back(p);
    }
    if (eligible.empty()) {
      if (++failures > cfg.max_retries)
        throw data_error("synth: no tree admitting the tuple distribution after " +
                         std::to_string(cfg.max_retries) + " retries");
      continue;
    }

    std::vector<int> pred_ids;
    for (int p : eligible)
      if (uniform(rng, 0.0, 1.0) < cfg.predicate_rate) pred_ids.push_back(p);
    if (pred_ids.empty()) pred_ids.push_back(eligible[uniform_index(rng, eligible.size())]);

    bool sentence_ok = true;
    std::vector<Placement> placements;
    for (int p : pred_ids) {
      Placement pl;
      pl.pred = p;
      std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
      int n_args = cfg.min_args + static_cast<int>(uniform_index(
                                      rng, static_cast<std::size_t>(cfg.max_args - cfg.min_args + 1)));
      for (int a = 0; a < n_args && sentence_ok; ++a) {
        bool placed = false;
        for (int r = 0; r < cfg.max_retries; ++r) {
          DistanceTuple t = draw_tuple(cfg, rng, total_mass);
          std::vector<int> cand = tuple_candidates(tree, p, t, used);
          if (cand.empty()) {
            last_failed = t;
            continue;
          }
          int id = cand[uniform_index(rng, cand.size())];
          used[static_cast<std::size_t>(id)] = true;
          pl.args.emplace_back(id, t);
          placed = true;
          break;
        }
        if (!placed && a == 0) sentence_ok = false;  // first slot must land
        if (!placed) break;                          // later slots: tree saturated
      }
      placements.push_back(std::move(pl));
    }
    if (!sentence_ok) {
      if (++failures > cfg.max_retries)
        throw data_error("synth: could not place tuple (" + std::to_string(last_failed.pred_hops) +
                         "," + std::to_string(last_failed.arg_hops) + ") after " +
                         std::to_string(cfg.max_retries) + " sentence retries");
      continue;
    }

    Sentence sent;
    for (int i = 1; i <= n; ++i) {
      Token t;
      t.id = i;
      std::size_t w = uniform_index(rng, static_cast<std::size_t>(cfg.vocab_words));
      t.lemma = "l" + std::to_string(w);
      t.form = t.lemma;
      t.plemma = t.lemma;
      t.pos = kPosTags[w % kPosTags.size()];
      t.ppos = t.pos;
      t.head = parent[static_cast<std::size_t>(i)];
      t.phead = t.head;
      t.deprel = t.head == 0 ? "root" : "dep";
      t.pdeprel = t.deprel;
      sent.tokens.push_back(std::move(t));
    }

    // Optional predicted-syntax noise: rewire PHEAD away from HEAD. A new
    // head whose current predicted ancestor chain passes through the token
    // would close a cycle, so those candidates are excluded; the predicted
    // columns therefore remain a valid tree after every rewire.
    if (cfg.pred_noise > 0.0) {
      auto descends_from = [&](int node, int anc) {
        for (int x = node; x != 0; x = sent.token(x).phead)
          if (x == anc) return true;
        return false;
      };
      for (int i = 1; i <= n; ++i) {
        if (uniform(rng, 0.0, 1.0) >= cfg.pred_noise) continue;
        std::vector<int> choices;
        for (int h = 0; h <= n; ++h)
          if (h != i && h != sent.token(i).phead && !descends_from(h, i)) choices.push_back(h);
        if (choices.empty()) continue;
        int h = choices[uniform_index(rng, choices.size())];
        sent.token(i).phead = h;
        sent.token(i).pdeprel = h == 0 ? "root" : "dep";
      }
    }

    std::sort(placements.begin(), placements.end(),
              [](const Placement& a, const Placement& b) { return a.pred < b.pred; });
    for (Token& t : sent.tokens) t.apreds.assign(placements.size(), "");
    for (std::size_t j = 0; j < placements.size(); ++j) {
      const Placement& pl = placements[j];
      Token& pt = sent.token(pl.pred);
      pt.fillpred = true;
      std::size_t lemma_idx = std::stoul(pt.lemma.substr(1));
      int sense = 1 + static_cast<int>(lemma_idx % static_cast<std::size_t>(cfg.n_senses));
      pt.pred_sense = pt.lemma + ".0" + std::to_string(sense);
      sent.predicates.push_back(pl.pred);
      for (const auto& [id, t] : pl.args) {
        const Token& at = sent.token(id);
        std::size_t pos_idx = static_cast<std::size_t>(
            std::find(kPosTags.begin(), kPosTags.end(), at.pos) - kPosTags.begin());
        std::size_t role_idx =
            (pos_idx + 3 * static_cast<std::size_t>(t.pred_hops) +
             5 * static_cast<std::size_t>(t.arg_hops)) %
            cfg.roles.size();
        sent.token(id).apreds[j] = cfg.roles[role_idx];
        ++truth.tuple_counts[{t.pred_hops, t.arg_hops}];
        ++truth.stats.n_arguments;
      }
    }

    ++truth.stats.n_sentences;
    truth.stats.n_tokens += n;
    truth.stats.n_predicates += static_cast<std::int64_t>(placements.size());
    corpus.push_back(std::move(sent));
    failures = 0;  // the retry budget is per sentence, not per run
  }
  return {std::move(corpus), std::move(truth)};
}

}  // namespace treesrl
