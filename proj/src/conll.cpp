#include "treesrl/conll.hpp"

#include <fstream>
#include <sstream>

namespace treesrl {

namespace {

int parse_int(const std::string& s, const char* what, long line) {
  if (s.empty()) throw data_error(std::string("empty ") + what + " column", line);
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw data_error(std::string("non-numeric ") + what + " '" + s + "'", line);
  }
  if (pos != s.size() || v < 0)
    throw data_error(std::string("non-numeric ") + what + " '" + s + "'", line);
  return v;
}

void finish_sentence(Sentence& sent, const std::vector<long>& row_lines, Corpus& out) {
  const int n = sent.size();
  std::size_t n_pred = 0;
  for (const Token& t : sent.tokens)
    if (t.fillpred) ++n_pred;
  for (int i = 0; i < n; ++i) {
    const Token& t = sent.tokens[static_cast<std::size_t>(i)];
    long line = row_lines[static_cast<std::size_t>(i)];
    if (t.apreds.size() != n_pred)
      throw data_error("row has " + std::to_string(t.apreds.size()) +
                           " APRED columns but sentence has " + std::to_string(n_pred) +
                           " predicates",
                       line);
    if (t.head > n) throw data_error("HEAD " + std::to_string(t.head) + " out of range", line);
    if (t.phead > n) throw data_error("PHEAD " + std::to_string(t.phead) + " out of range", line);
    if (t.head == t.id) throw data_error("token is its own HEAD", line);
    if (t.phead == t.id) throw data_error("token is its own PHEAD", line);
    if (!t.pred_sense.empty() && !t.fillpred)
      throw data_error("PRED set but FILLPRED is not 'Y'", line);
    if (t.fillpred) sent.predicates.push_back(t.id);
  }
  out.push_back(std::move(sent));
}

}  // namespace

Corpus parse_conll09(std::istream& in) {
  Corpus out;
  Sentence sent;
  std::vector<long> row_lines;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      throw data_error("carriage return found; input must use LF line endings", lineno);
    if (line.empty()) {
      if (!sent.tokens.empty()) {
        finish_sentence(sent, row_lines, out);
        sent = Sentence();
        row_lines.clear();
      }
      continue;
    }
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() < 14)
      throw data_error("expected at least 14 tab-separated columns, got " +
                           std::to_string(cols.size()),
                       lineno);
    Token t;
    t.id = parse_int(cols[0], "ID", lineno);
    if (t.id != sent.size() + 1)
      throw data_error("ID " + std::to_string(t.id) + " does not match row position " +
                           std::to_string(sent.size() + 1),
                       lineno);
    t.form = cols[1];
    t.lemma = cols[2];
    t.plemma = cols[3];
    t.pos = cols[4];
    t.ppos = cols[5];
    t.feat = cols[6];
    t.pfeat = cols[7];
    t.head = parse_int(cols[8], "HEAD", lineno);
    t.phead = parse_int(cols[9], "PHEAD", lineno);
    t.deprel = cols[10];
    t.pdeprel = cols[11];
    if (cols[12] == "Y")
      t.fillpred = true;
    else if (cols[12] != "_")
      throw data_error("FILLPRED must be 'Y' or '_', got '" + cols[12] + "'", lineno);
    if (cols[13] != "_") t.pred_sense = cols[13];
    for (std::size_t c = 14; c < cols.size(); ++c)
      t.apreds.push_back(cols[c] == "_" ? std::string() : cols[c]);
    sent.tokens.push_back(std::move(t));
    row_lines.push_back(lineno);
  }
  if (!sent.tokens.empty()) finish_sentence(sent, row_lines, out);
  return out;
}

Corpus parse_conll09(const std::string& text) {
  std::istringstream in(text);
  return parse_conll09(in);
}

Corpus parse_conll09_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  return parse_conll09(in);
}

void validate_corpus(const Corpus& corpus) {
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const Sentence& sent = corpus[s];
    const int n = sent.size();
    std::size_t n_pred = 0;
    std::vector<int> pred_ids;
    for (int i = 0; i < n; ++i) {
      const Token& t = sent.tokens[static_cast<std::size_t>(i)];
      auto fail = [&](const std::string& msg) {
        throw data_error("sentence " + std::to_string(s + 1) + ", token " +
                         std::to_string(i + 1) + ": " + msg);
      };
      if (t.id != i + 1) fail("ID does not match row position");
      if (t.head < 0 || t.head > n || t.head == t.id) fail("HEAD out of range");
      if (t.phead < 0 || t.phead > n || t.phead == t.id) fail("PHEAD out of range");
      if (!t.pred_sense.empty() && !t.fillpred) fail("PRED set but FILLPRED unset");
      if (t.fillpred) {
        ++n_pred;
        pred_ids.push_back(t.id);
      }
    }
    for (int i = 0; i < n; ++i)
      if (sent.tokens[static_cast<std::size_t>(i)].apreds.size() != n_pred)
        throw data_error("sentence " + std::to_string(s + 1) + ", token " +
                         std::to_string(i + 1) + ": APRED column count mismatch");
    if (sent.predicates != pred_ids)
      throw data_error("sentence " + std::to_string(s + 1) +
                       ": predicate list does not match FILLPRED rows");
  }
}

void write_conll09(const Corpus& corpus, std::ostream& out) {
  for (const Sentence& sent : corpus) {
    for (const Token& t : sent.tokens) {
      out << t.id << '\t' << t.form << '\t' << t.lemma << '\t' << t.plemma << '\t' << t.pos
          << '\t' << t.ppos << '\t' << t.feat << '\t' << t.pfeat << '\t' << t.head << '\t'
          << t.phead << '\t' << t.deprel << '\t' << t.pdeprel << '\t'
          << (t.fillpred ? "Y" : "_") << '\t' << (t.pred_sense.empty() ? "_" : t.pred_sense);
      for (const std::string& a : t.apreds) out << '\t' << (a.empty() ? "_" : a);
      out << '\n';
    }
    out << '\n';
  }
}

std::string write_conll09(const Corpus& corpus) {
  std::ostringstream out;
  write_conll09(corpus, out);
  return out.str();
}

void write_conll09_file(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write file: " + path);
  write_conll09(corpus, out);
}

CorpusStats corpus_stats(const Corpus& corpus, int threads) {
  auto count = [&](std::size_t lo, std::size_t hi) {
    CorpusStats st;
    for (std::size_t i = lo; i < hi; ++i) {
      const Sentence& sent = corpus[i];
      ++st.n_sentences;
      st.n_tokens += sent.size();
      st.n_predicates += static_cast<std::int64_t>(sent.predicates.size());
      for (const Token& t : sent.tokens)
        for (const std::string& a : t.apreds)
          if (!a.empty()) ++st.n_arguments;
    }
    return st;
  };
  return parallel_chunks<CorpusStats>(corpus.size(), threads, count,
                                      [](CorpusStats& a, const CorpusStats& b) { a += b; });
}

}  // namespace treesrl
