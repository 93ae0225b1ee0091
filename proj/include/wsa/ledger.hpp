#pragma once

#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wsa/error.hpp"
#include "wsa/target.hpp"

namespace wsa {

struct QueryRecord {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<int> perturbed;  // sorted token indices differing from the original
  int label = 0;               // predicted class for this query
  double conf_orig = 0.0;      // confidence assigned to the document's original class
  bool unchanged = true;       // label == original label of the document

  bool operator==(const QueryRecord&) const = default;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["doc_id"] = doc_id;
    j["tokens"] = tokens;
    j["perturbed"] = perturbed;
    j["label"] = label;
    j["conf_orig"] = conf_orig;
    j["unchanged"] = unchanged;
    return j;
  }

  static QueryRecord from_json(const nlohmann::json& j) {
    QueryRecord r;
    try {
      r.doc_id = j.at("doc_id").get<std::string>();
      r.tokens = j.at("tokens").get<std::vector<std::string>>();
      r.perturbed = j.at("perturbed").get<std::vector<int>>();
      r.label = j.at("label").get<int>();
      r.conf_orig = j.at("conf_orig").get<double>();
      r.unchanged = j.at("unchanged").get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw format_error(std::string("bad ledger record: ") + e.what());
    }
    return r;
  }
};

// Append-only record of every attack query. Appends are serialized; record
// order within one document follows issue order.
class QueryLedger {
 public:
  QueryLedger() = default;
  QueryLedger(const QueryLedger& other) {
    std::lock_guard lk(other.mu_);
    records_ = other.records_;
    counts_ = other.counts_;
  }
  QueryLedger& operator=(const QueryLedger& other) {
    if (this == &other) return *this;
    auto copy = other.records();
    std::lock_guard lk(mu_);
    records_ = std::move(copy);
    counts_.clear();
    for (const auto& r : records_) ++counts_[r.doc_id];
    return *this;
  }

  QueryRecord record_query(const std::string& doc_id,
                           std::vector<std::string> tokens,
                           std::vector<int> perturbed, const Prediction& pred,
                           int original_label) {
    QueryRecord r;
    r.doc_id = doc_id;
    r.tokens = std::move(tokens);
    r.perturbed = std::move(perturbed);
    r.label = pred.label;
    r.conf_orig = pred.scores.at(original_label);
    r.unchanged = (pred.label == original_label);
    std::lock_guard lk(mu_);
    records_.push_back(r);
    ++counts_[doc_id];
    return r;
  }

  std::size_t size() const {
    std::lock_guard lk(mu_);
    return records_.size();
  }

  long count(const std::string& doc_id) const {
    std::lock_guard lk(mu_);
    auto it = counts_.find(doc_id);
    return it == counts_.end() ? 0 : it->second;
  }

  std::vector<QueryRecord> records() const {
    std::lock_guard lk(mu_);
    return records_;
  }

  // Arithmetic mean of per-document query counts; ids with no queries count 0.
  double average_queries(const std::vector<std::string>& doc_ids) const {
    if (doc_ids.empty()) throw domain_error("average_queries: empty id set");
    std::lock_guard lk(mu_);
    double total = 0.0;
    for (const auto& id : doc_ids) {
      auto it = counts_.find(id);
      if (it != counts_.end()) total += static_cast<double>(it->second);
    }
    return total / static_cast<double>(doc_ids.size());
  }

  void persist(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot write ledger: " + path);
    std::lock_guard lk(mu_);
    for (const auto& r : records_) out << r.to_json().dump() << '\n';
  }

  std::string to_jsonl() const {
    std::string out;
    std::lock_guard lk(mu_);
    for (const auto& r : records_) {
      out += r.to_json().dump();
      out += '\n';
    }
    return out;
  }

  static QueryLedger restore(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open ledger: " + path);
    QueryLedger l;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      QueryRecord r = QueryRecord::from_json(j);
      l.counts_[r.doc_id]++;
      l.records_.push_back(std::move(r));
    }
    return l;
  }

  bool operator==(const QueryLedger& other) const {
    return records() == other.records();
  }

 private:
  mutable std::mutex mu_;
  std::vector<QueryRecord> records_;
  std::map<std::string, long> counts_;
};

}  // namespace wsa
