#ifndef TREESRL_CONLL_HPP
#define TREESRL_CONLL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "treesrl/common.hpp"

namespace treesrl {

// One CoNLL-2009 row. String columns are stored verbatim (including "_");
// only ID/HEAD/PHEAD, FILLPRED, PRED and the APRED block are interpreted.
struct Token {
  int id = 0;  // 1-based row position
  std::string form;
  std::string lemma = "_";
  std::string plemma = "_";
  std::string pos = "_";
  std::string ppos = "_";
  std::string feat = "_";
  std::string pfeat = "_";
  int head = 0;   // 0 = artificial root
  int phead = 0;
  std::string deprel = "_";
  std::string pdeprel = "_";
  bool fillpred = false;
  std::string pred_sense;             // empty when PRED column is "_"
  std::vector<std::string> apreds;    // one slot per predicate; empty = "_"

  bool is_argument_of(std::size_t pred_slot) const {
    return pred_slot < apreds.size() && !apreds[pred_slot].empty();
  }
};

struct Sentence {
  std::vector<Token> tokens;
  std::vector<int> predicates;  // token ids with fillpred, ascending

  int size() const { return static_cast<int>(tokens.size()); }
  const Token& token(int id) const { return tokens[static_cast<std::size_t>(id - 1)]; }
  Token& token(int id) { return tokens[static_cast<std::size_t>(id - 1)]; }
};

using Corpus = std::vector<Sentence>;

struct CorpusStats {
  std::int64_t n_sentences = 0;
  std::int64_t n_tokens = 0;
  std::int64_t n_predicates = 0;
  std::int64_t n_arguments = 0;

  CorpusStats& operator+=(const CorpusStats& o) {
    n_sentences += o.n_sentences;
    n_tokens += o.n_tokens;
    n_predicates += o.n_predicates;
    n_arguments += o.n_arguments;
    return *this;
  }
  bool operator==(const CorpusStats&) const = default;
};

// Parses a CoNLL-2009 stream: tab-separated rows, blank-line sentence
// separators, exactly 14 + #predicates columns per row. Malformed input is
// rejected with the offending line number.
Corpus parse_conll09(std::istream& in);
Corpus parse_conll09(const std::string& text);
Corpus parse_conll09_file(const std::string& path);

// Checks Sentence/Token invariants on an in-memory corpus (used by parse and
// by the CLI `validate`); throws data_error on the first violation.
void validate_corpus(const Corpus& corpus);

void write_conll09(const Corpus& corpus, std::ostream& out);
std::string write_conll09(const Corpus& corpus);
void write_conll09_file(const Corpus& corpus, const std::string& path);

CorpusStats corpus_stats(const Corpus& corpus, int threads = 1);

}  // namespace treesrl

#endif
