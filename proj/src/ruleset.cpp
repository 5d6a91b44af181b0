#include "treesrl/ruleset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "treesrl/pruner.hpp"

namespace treesrl {

namespace {

std::int64_t tuple_key(DistanceTuple t) {
  return static_cast<std::int64_t>(t.pred_hops) * (1 << 20) + t.arg_hops;
}

}  // namespace

std::size_t RuleSet::active_k() const {
  if (!k_) throw usage_error("rule set has no selected k");
  return *k_;
}

void RuleSet::set_k(std::size_t k) {
  if (k > entries.size())
    throw usage_error("k=" + std::to_string(k) + " out of range (have " +
                      std::to_string(entries.size()) + " tuples)");
  k_ = k;
  prefix_.clear();
  for (std::size_t i = 0; i < k; ++i) prefix_.insert(tuple_key(entries[i].tuple));
}

std::int64_t RuleSet::total_count() const {
  std::int64_t total = 0;
  for (const RuleEntry& e : entries) total += e.count;
  return total;
}

bool RuleSet::contains(DistanceTuple t) const {
  if (!k_) throw usage_error("rule set has no selected k");
  return prefix_.count(tuple_key(t)) > 0;
}

RuleSet mine_rules(const Corpus& corpus, SyntaxSource source, const std::string& language,
                   int threads) {
  using Counts = std::map<std::pair<int, int>, std::int64_t>;
  Counts counts = parallel_chunks<Counts>(
      corpus.size(), threads,
      [&](std::size_t lo, std::size_t hi) {
        Counts c;
        for (std::size_t i = lo; i < hi; ++i) {
          const Sentence& sent = corpus[i];
          if (sent.predicates.empty()) continue;
          DepTree tree = DepTree::from_sentence(sent, source);
          for (std::size_t j = 0; j < sent.predicates.size(); ++j) {
            int p = sent.predicates[j];
            for (const Token& t : sent.tokens)
              if (t.is_argument_of(j)) {
                DistanceTuple d = tree.distance(p, t.id);
                ++c[{d.pred_hops, d.arg_hops}];
              }
          }
        }
        return c;
      },
      [](Counts& a, const Counts& b) {
        for (const auto& [t, n] : b) a[t] += n;
      });

  if (counts.empty()) throw data_error("cannot mine rules: corpus has no arguments");

  RuleSet rules;
  rules.language = language;
  rules.syntax = source;
  for (const auto& [t, n] : counts) rules.entries.push_back({{t.first, t.second}, n});
  std::stable_sort(rules.entries.begin(), rules.entries.end(),
                   [](const RuleEntry& a, const RuleEntry& b) {
                     if (a.count != b.count) return a.count > b.count;
                     return a.tuple < b.tuple;
                   });
  return rules;
}

RuleSet select_top_k(RuleSet rules, std::size_t k) {
  rules.set_k(k);
  return rules;
}

RuleSet select_by_coverage(RuleSet rules, double target) {
  if (target <= 0.0 || target > 1.0)
    throw usage_error("coverage target must be in (0, 1]");
  std::int64_t total = rules.total_count();
  std::int64_t acc = 0;
  std::size_t k = rules.entries.size();
  for (std::size_t i = 0; i < rules.entries.size(); ++i) {
    acc += rules.entries[i].count;
    if (static_cast<double>(acc) >= target * static_cast<double>(total)) {
      k = i + 1;
      break;
    }
  }
  rules.set_k(k);
  return rules;
}

CoverageReport rule_coverage(const RuleSet& rules, const Corpus& corpus, SyntaxSource source,
                             int threads) {
  rules.active_k();
  return parallel_chunks<CoverageReport>(
      corpus.size(), threads,
      [&](std::size_t lo, std::size_t hi) {
        CoverageReport rep;
        for (std::size_t i = lo; i < hi; ++i) {
          const Sentence& sent = corpus[i];
          if (sent.predicates.empty()) continue;
          DepTree tree = DepTree::from_sentence(sent, source);
          for (std::size_t j = 0; j < sent.predicates.size(); ++j) {
            int p = sent.predicates[j];
            PruneMask mask = prune(tree, p, rules);
            rep.pairs_total += sent.size();
            rep.pairs_retained += static_cast<std::int64_t>(mask.retained.size());
            for (const Token& t : sent.tokens)
              if (t.is_argument_of(j)) {
                ++rep.args_total;
                if (mask.is_retained(t.id)) ++rep.args_covered;
              }
          }
        }
        return rep;
      },
      [](CoverageReport& a, const CoverageReport& b) { a += b; });
}

std::vector<SweepRow> sweep(const RuleSet& rules, const Corpus& corpus, SyntaxSource source,
                            const std::vector<std::size_t>& k_values, int threads) {
  std::vector<SweepRow> out;
  RuleSet r = rules;
  for (std::size_t k : k_values) {
    r.set_k(k);
    CoverageReport rep = rule_coverage(r, corpus, source, threads);
    out.push_back({k, rep.coverage(), rep.reduction()});
  }
  return out;
}

void write_rules(const RuleSet& rules, std::ostream& out,
                 const std::vector<std::string>& provenance) {
  out << "#language=" << rules.language << '\n';
  out << "#syntax=" << to_string(rules.syntax) << '\n';
  out << "#k=";
  if (rules.k()) out << *rules.k();
  out << '\n';
  for (const std::string& line : provenance) out << "#config:" << line << '\n';
  for (const RuleEntry& e : rules.entries)
    out << e.tuple.pred_hops << '\t' << e.tuple.arg_hops << '\t' << e.count << '\n';
}

void write_rules_file(const RuleSet& rules, const std::string& path,
                      const std::vector<std::string>& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write file: " + path);
  write_rules(rules, out, provenance);
}

RuleSet read_rules(std::istream& in) {
  RuleSet rules;
  std::optional<std::size_t> k;
  std::string line;
  long lineno = 0;
  bool have_language = false, have_syntax = false, have_k = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#language=", 0) == 0) {
        rules.language = line.substr(10);
        have_language = true;
      } else if (line.rfind("#syntax=", 0) == 0) {
        rules.syntax = syntax_source_from_string(line.substr(8));
        have_syntax = true;
      } else if (line.rfind("#k=", 0) == 0) {
        std::string v = line.substr(3);
        if (!v.empty()) k = std::stoul(v);
        have_k = true;
      } else if (line.rfind("#config:", 0) == 0) {
        // provenance only
      } else {
        throw data_error("unknown rule file header '" + line + "'", lineno);
      }
      continue;
    }
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 3) throw data_error("rule row must have 3 columns", lineno);
    try {
      RuleEntry e;
      e.tuple.pred_hops = std::stoi(cols[0]);
      e.tuple.arg_hops = std::stoi(cols[1]);
      e.count = std::stoll(cols[2]);
      rules.entries.push_back(e);
    } catch (const std::exception&) {
      throw data_error("malformed rule row '" + line + "'", lineno);
    }
  }
  if (!have_language || !have_syntax || !have_k)
    throw data_error("rule file missing #language/#syntax/#k header");
  for (std::size_t i = 1; i < rules.entries.size(); ++i)
    if (rules.entries[i].count > rules.entries[i - 1].count)
      throw data_error("rule counts must be nonincreasing (row " + std::to_string(i + 1) + ")");
  if (k) rules.set_k(*k);
  return rules;
}

RuleSet read_rules_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  return read_rules(in);
}

}  // namespace treesrl
