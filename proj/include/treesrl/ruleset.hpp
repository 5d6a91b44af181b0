#ifndef TREESRL_RULESET_HPP
#define TREESRL_RULESET_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <unordered_set>
#include <vector>

#include "treesrl/conll.hpp"
#include "treesrl/deptree.hpp"

namespace treesrl {

struct RuleEntry {
  DistanceTuple tuple;
  std::int64_t count = 0;
};

// Frequency-ordered distance tuples mined from a training corpus. The first
// k entries form the active pruning rule; membership tests look at that
// prefix only. Ties in count are ordered by ascending (pred_hops, arg_hops)
// so selection is deterministic.
class RuleSet {
public:
  std::vector<RuleEntry> entries;  // counts nonincreasing
  std::string language = "xx";
  SyntaxSource syntax = SyntaxSource::predicted;

  std::optional<std::size_t> k() const { return k_; }
  std::size_t active_k() const;  // throws if k unset
  void set_k(std::size_t k);
  std::int64_t total_count() const;

  // True iff the tuple is inside the active top-k prefix.
  bool contains(DistanceTuple t) const;

private:
  std::optional<std::size_t> k_;
  std::unordered_set<std::int64_t> prefix_;
};

// One entry per distinct tuple over all (predicate, gold-argument) pairs,
// using the chosen syntax columns. Throws on a corpus with no arguments.
RuleSet mine_rules(const Corpus& corpus, SyntaxSource source,
                   const std::string& language = "xx", int threads = 1);

RuleSet select_top_k(RuleSet rules, std::size_t k);

// Smallest k whose prefix covers at least `target` of the mined arguments.
RuleSet select_by_coverage(RuleSet rules, double target);

struct CoverageReport {
  std::int64_t args_total = 0;
  std::int64_t args_covered = 0;
  std::int64_t pairs_total = 0;     // all (predicate, token) pairs
  std::int64_t pairs_retained = 0;  // pairs kept by pruning

  double coverage() const { return args_total == 0 ? 0.0 : double(args_covered) / double(args_total); }
  double reduction() const {
    return pairs_total == 0 ? 0.0 : 1.0 - double(pairs_retained) / double(pairs_total);
  }

  CoverageReport& operator+=(const CoverageReport& o) {
    args_total += o.args_total;
    args_covered += o.args_covered;
    pairs_total += o.pairs_total;
    pairs_retained += o.pairs_retained;
    return *this;
  }
};

// Fraction of gold arguments retained under pruning with the active prefix,
// plus the candidate-pair reduction ratio. An argument coinciding with its
// predicate counts as covered (the predicate is always retained).
CoverageReport rule_coverage(const RuleSet& rules, const Corpus& corpus, SyntaxSource source,
                             int threads = 1);

struct SweepRow {
  std::size_t k = 0;
  double coverage = 0.0;
  double reduction = 0.0;
};

std::vector<SweepRow> sweep(const RuleSet& rules, const Corpus& corpus, SyntaxSource source,
                            const std::vector<std::size_t>& k_values, int threads = 1);

// Rule file: "#language=", "#syntax=", "#k=" headers (plus optional
// "#config:" provenance lines), then one "d_p<TAB>d_a<TAB>count" row per
// entry in rank order.
void write_rules(const RuleSet& rules, std::ostream& out,
                 const std::vector<std::string>& provenance = {});
void write_rules_file(const RuleSet& rules, const std::string& path,
                      const std::vector<std::string>& provenance = {});
RuleSet read_rules(std::istream& in);
RuleSet read_rules_file(const std::string& path);

}  // namespace treesrl

#endif
