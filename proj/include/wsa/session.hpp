#pragma once

#include <string>
#include <vector>

#include "wsa/dataset.hpp"
#include "wsa/error.hpp"
#include "wsa/ledger.hpp"
#include "wsa/target.hpp"

namespace wsa {

// Per-document attack scope: routes every target call through the ledger and
// enforces the query budget. One instance per document, single-threaded.
class AttackSession {
 public:
  AttackSession(const TargetModel& target, QueryLedger& ledger,
                const LabeledDocument& doc, int original_label,
                long max_queries)
      : target_(target),
        ledger_(ledger),
        doc_(doc),
        original_label_(original_label),
        max_queries_(max_queries) {}

  // One attack query: budget check, predict, ledger append.
  Prediction query(const std::vector<std::string>& tokens) {
    if (used() >= max_queries_)
      throw budget_exhausted("query budget (" + std::to_string(max_queries_) +
                             ") exhausted for document " + doc_.id);
    Prediction p = target_.predict(tokens);
    ledger_.record_query(doc_.id, tokens, diff_positions(tokens), p,
                         original_label_);
    return p;
  }

  long used() const { return ledger_.count(doc_.id); }
  long budget() const { return max_queries_; }
  const LabeledDocument& doc() const { return doc_; }
  int original_label() const { return original_label_; }

 private:
  std::vector<int> diff_positions(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    std::size_t n = std::min(tokens.size(), doc_.tokens.size());
    for (std::size_t i = 0; i < n; ++i)
      if (tokens[i] != doc_.tokens[i]) out.push_back(static_cast<int>(i));
    for (std::size_t i = n; i < tokens.size(); ++i)
      out.push_back(static_cast<int>(i));
    return out;
  }

  const TargetModel& target_;
  QueryLedger& ledger_;
  const LabeledDocument& doc_;
  int original_label_;
  long max_queries_;
};

}  // namespace wsa
