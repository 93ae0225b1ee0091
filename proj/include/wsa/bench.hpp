#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "wsa/dataset.hpp"
#include "wsa/embedding.hpp"
#include "wsa/ledger.hpp"
#include "wsa/search.hpp"
#include "wsa/surrogate.hpp"
#include "wsa/target.hpp"
#include "wsa/tokenize.hpp"

namespace wsa {

struct DocRow {
  std::string id;
  int order = 0;            // position in the sampled attack sequence
  std::string status;       // skipped | success | exhausted-budget | exhausted-candidates
  long queries = 0;
  long ranking_queries = 0;
  double perturbation_rate = 0.0;
  bool correct_after = false;  // target still predicts gold after the attack

  bool operator==(const DocRow&) const = default;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["order"] = order;
    j["status"] = status;
    j["queries"] = queries;
    j["ranking_queries"] = ranking_queries;
    j["perturbation_rate"] = perturbation_rate;
    j["correct_after"] = correct_after;
    return j;
  }

  static DocRow from_json(const nlohmann::json& j) {
    DocRow r;
    r.id = j.at("id").get<std::string>();
    r.order = j.at("order").get<int>();
    r.status = j.at("status").get<std::string>();
    r.queries = j.at("queries").get<long>();
    r.ranking_queries = j.at("ranking_queries").get<long>();
    r.perturbation_rate = j.at("perturbation_rate").get<double>();
    r.correct_after = j.at("correct_after").get<bool>();
    return r;
  }
};

struct MetricsReport {
  double original_accuracy = 0.0;
  double after_attack_accuracy = 0.0;
  double perturbation_rate_mean = 0.0;  // over successful attacks only
  double avg_queries = 0.0;             // over attacked documents only
  long sampled = 0;
  long attacked = 0;
  long skipped = 0;
  long successes = 0;
  long budget_aborted = 0;
  long non_ledger_calls = 0;  // screening + flip-verification target calls
  bool partial = false;
  nlohmann::ordered_json config_echo;
  std::vector<DocRow> rows;

  bool operator==(const MetricsReport& o) const {
    return original_accuracy == o.original_accuracy &&
           after_attack_accuracy == o.after_attack_accuracy &&
           perturbation_rate_mean == o.perturbation_rate_mean &&
           avg_queries == o.avg_queries && sampled == o.sampled &&
           attacked == o.attacked && skipped == o.skipped &&
           successes == o.successes && budget_aborted == o.budget_aborted &&
           non_ledger_calls == o.non_ledger_calls && partial == o.partial &&
           config_echo == o.config_echo && rows == o.rows;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["original_accuracy"] = original_accuracy;
    j["after_attack_accuracy"] = after_attack_accuracy;
    j["perturbation_rate_mean"] = perturbation_rate_mean;
    j["avg_queries"] = avg_queries;
    j["sampled"] = sampled;
    j["attacked"] = attacked;
    j["skipped"] = skipped;
    j["successes"] = successes;
    j["budget_aborted"] = budget_aborted;
    j["non_ledger_calls"] = non_ledger_calls;
    j["partial"] = partial;
    j["config"] = config_echo;
    j["note"] =
        "accuracy denominators include skipped (already-misclassified) "
        "documents; avg_queries and perturbation exclude them";
    nlohmann::ordered_json rj = nlohmann::ordered_json::array();
    for (const auto& r : rows) rj.push_back(r.to_json());
    j["rows"] = rj;
    return j;
  }

  static MetricsReport from_json(const nlohmann::ordered_json& j) {
    MetricsReport m;
    try {
      m.original_accuracy = j.at("original_accuracy").get<double>();
      m.after_attack_accuracy = j.at("after_attack_accuracy").get<double>();
      m.perturbation_rate_mean = j.at("perturbation_rate_mean").get<double>();
      m.avg_queries = j.at("avg_queries").get<double>();
      m.sampled = j.at("sampled").get<long>();
      m.attacked = j.at("attacked").get<long>();
      m.skipped = j.at("skipped").get<long>();
      m.successes = j.at("successes").get<long>();
      m.budget_aborted = j.at("budget_aborted").get<long>();
      m.non_ledger_calls = j.at("non_ledger_calls").get<long>();
      m.partial = j.at("partial").get<bool>();
      m.config_echo = j.at("config");
      for (const auto& rj : j.at("rows")) m.rows.push_back(DocRow::from_json(rj));
    } catch (const nlohmann::json::exception& e) {
      throw format_error(std::string("bad report: ") + e.what());
    }
    return m;
  }
};

struct ExperimentSetup {
  const EmbeddingStore* counter = nullptr;  // synonym candidates + directions
  const EmbeddingStore* encoder = nullptr;  // surrogate word encoding
  SurrogateConfig surrogate;
  std::set<std::string> stoplist = default_stoplist();
  bool collect_traces = false;
};

struct ExperimentOutput {
  MetricsReport report;
  QueryLedger ledger;
  std::map<std::string, AttackTrace> traces;  // doc id -> trace
};

// Seeded sample without replacement, in draw order.
inline std::vector<std::size_t> sample_indices(std::size_t population,
                                               std::size_t sample_size,
                                               std::uint64_t seed) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::size_t take = std::min(sample_size, population);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(take);
  return idx;
}

// Sequential run of Algorithm-style per-document attacks with surrogate
// retraining after each attacked document. Screening and flip-verification
// calls go to the target directly and are reported, not ledgered, so skipped
// documents contribute zero queries.
inline ExperimentOutput run_experiment(const std::vector<LabeledDocument>& docs,
                                       const TargetModel& target,
                                       const AttackConfig& cfg,
                                       const ExperimentSetup& setup,
                                       std::size_t sample_size,
                                       std::uint64_t sample_seed) {
  cfg.validate();
  if (!setup.counter) throw domain_error("run_experiment: counter store required");
  if (cfg.use_rank_strategy &&
      setup.surrogate.mode == EncodingMode::embedding && !setup.encoder)
    throw domain_error("run_experiment: encoder store required for rank strategy");

  ExperimentOutput out;
  auto sample = sample_indices(docs.size(), sample_size, sample_seed);

  SurrogateRanker ranker;
  long correct_initial = 0;
  int order = 0;
  for (std::size_t si : sample) {
    const LabeledDocument& doc = docs[si];
    DocRow row;
    row.id = doc.id;
    row.order = order++;
    try {
      Prediction orig = target.predict(doc.tokens);
      ++out.report.non_ledger_calls;
      if (orig.label != doc.gold_label) {
        row.status = "skipped";
        row.correct_after = false;
        ++out.report.skipped;
        out.report.rows.push_back(std::move(row));
        continue;
      }
      ++correct_initial;

      AttackTrace trace;
      AttackResult res =
          run_attack(doc, orig, target, *setup.counter, cfg, out.ledger,
                     ranker.usable() ? &ranker : nullptr, setup.stoplist,
                     setup.collect_traces ? &trace : nullptr);
      if (setup.collect_traces) out.traces.emplace(doc.id, std::move(trace));

      row.status = to_string(res.status);
      row.queries = res.queries_used;
      row.ranking_queries = res.ranking_queries;
      row.perturbation_rate = res.perturbation_rate;
      ++out.report.attacked;
      if (res.status == AttackStatus::success) {
        Prediction verify = target.predict(*res.adversarial_tokens);
        ++out.report.non_ledger_calls;
        if (verify.label == doc.gold_label)
          throw error("flip verification failed for document " + doc.id);
        row.correct_after = false;
        ++out.report.successes;
      } else {
        // no adversarial found; the clean document is still classified as gold
        row.correct_after = true;
        if (res.status == AttackStatus::exhausted_budget)
          ++out.report.budget_aborted;
      }
      out.report.rows.push_back(std::move(row));

      if (cfg.use_rank_strategy) {
        SurrogateRanker next = train_surrogate(
            out.ledger, setup.encoder ? setup.encoder : setup.counter,
            setup.surrogate, &ranker);
        if (next.usable()) ranker = std::move(next);
      }
    } catch (const query_error&) {
      out.report.partial = true;
      row.status = "aborted";
      out.report.rows.push_back(std::move(row));
      break;
    }
  }

  MetricsReport& rep = out.report;
  rep.sampled = static_cast<long>(sample.size());
  rep.original_accuracy =
      rep.sampled ? static_cast<double>(correct_initial) / rep.sampled : 0.0;
  long correct_after = 0;
  double query_sum = 0.0, pert_sum = 0.0;
  for (const auto& r : rep.rows) {
    if (r.correct_after) ++correct_after;
    if (r.status != "skipped") query_sum += static_cast<double>(r.queries);
    if (r.status == "success") pert_sum += r.perturbation_rate;
  }
  rep.after_attack_accuracy =
      rep.sampled ? static_cast<double>(correct_after) / rep.sampled : 0.0;
  rep.avg_queries = rep.attacked ? query_sum / rep.attacked : 0.0;
  rep.perturbation_rate_mean = rep.successes ? pert_sum / rep.successes : 0.0;

  rep.config_echo = cfg.to_json();
  rep.config_echo["sample_size"] = static_cast<long>(sample_size);
  rep.config_echo["sample_seed"] = sample_seed;
  rep.config_echo["surrogate_mode"] = to_string(setup.surrogate.mode);
  rep.config_echo["surrogate_min_train"] = setup.surrogate.min_train;
  return out;
}

struct AblationOutput {
  // baseline, +WRankS, +WRepS, +both, in that order
  std::vector<std::pair<std::string, ExperimentOutput>> runs;
};

inline AblationOutput run_ablation(const std::vector<LabeledDocument>& docs,
                                   const TargetModel& target,
                                   const AttackConfig& base_cfg,
                                   const ExperimentSetup& setup,
                                   std::size_t sample_size,
                                   std::uint64_t sample_seed) {
  const std::vector<std::tuple<std::string, bool, bool>> modes = {
      {"baseline", false, false},
      {"+WRankS", true, false},
      {"+WRepS", false, true},
      {"+both", true, true},
  };
  AblationOutput out;
  for (const auto& [name, rank, rep] : modes) {
    AttackConfig cfg = base_cfg;
    cfg.use_rank_strategy = rank;
    cfg.use_replace_strategy = rep;
    out.runs.emplace_back(
        name, run_experiment(docs, target, cfg, setup, sample_size, sample_seed));
  }
  return out;
}

// Human table: percentages to 1 decimal, queries to nearest integer.
inline std::string render_table(
    const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s %8s\n", "method", "OrigAcc%",
                "Acc%", "Per%", "#Q");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %8.1f %8.1f %8.1f %8.0f\n",
                  name.c_str(), 100.0 * r.original_accuracy,
                  100.0 * r.after_attack_accuracy,
                  100.0 * r.perturbation_rate_mean, r.avg_queries);
    out += buf;
  }
  return out;
}

inline void emit_report(const MetricsReport& report, const std::string& path,
                        const std::string& format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write report: " + path);
  if (format == "json") {
    out << report.to_json().dump(2) << '\n';
  } else if (format == "csv") {
    out << "id,order,status,queries,ranking_queries,perturbation_rate,"
           "correct_after\n";
    for (const auto& r : report.rows)
      out << r.id << ',' << r.order << ',' << r.status << ',' << r.queries
          << ',' << r.ranking_queries << ',' << r.perturbation_rate << ','
          << (r.correct_after ? 1 : 0) << '\n';
  } else {
    throw domain_error("unknown report format: " + format);
  }
}

inline MetricsReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open report: " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
  return MetricsReport::from_json(j);
}

}  // namespace wsa
