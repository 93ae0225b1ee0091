#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wsa/embedding.hpp"
#include "wsa/error.hpp"
#include "wsa/ledger.hpp"
#include "wsa/session.hpp"
#include "wsa/surrogate.hpp"

namespace wsa {

struct AttackConfig {
  std::string method = "greedy";  // "greedy" | "genetic"
  bool use_rank_strategy = false;
  bool use_replace_strategy = false;
  int n_neighbors = 100;
  int k_direction = 30;
  long max_queries_per_doc = 20000;
  double min_synonym_cosine = 0.5;
  int population_size = 5;
  int max_generations = 140;
  double mutation_rate = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (method != "greedy" && method != "genetic")
      throw domain_error("unknown attack method: " + method);
    if (n_neighbors < 1 || k_direction < 1)
      throw domain_error("n_neighbors and k_direction must be positive");
    if (k_direction > n_neighbors)
      throw domain_error("k_direction must not exceed n_neighbors");
    if (min_synonym_cosine <= 0.0 || min_synonym_cosine > 1.0)
      throw domain_error("min_synonym_cosine must be in (0,1]");
    if (method == "genetic" && population_size < 2)
      throw domain_error("genetic attack needs population_size >= 2");
    if (max_queries_per_doc < 1) throw domain_error("budget must be positive");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["method"] = method;
    j["use_rank_strategy"] = use_rank_strategy;
    j["use_replace_strategy"] = use_replace_strategy;
    j["n_neighbors"] = n_neighbors;
    j["k_direction"] = k_direction;
    j["max_queries_per_doc"] = max_queries_per_doc;
    j["min_synonym_cosine"] = min_synonym_cosine;
    j["population_size"] = population_size;
    j["max_generations"] = max_generations;
    j["mutation_rate"] = mutation_rate;
    j["seed"] = seed;
    return j;
  }

  static AttackConfig from_json(const nlohmann::json& j) {
    AttackConfig c;
    c.method = j.value("method", c.method);
    c.use_rank_strategy = j.value("use_rank_strategy", c.use_rank_strategy);
    c.use_replace_strategy = j.value("use_replace_strategy", c.use_replace_strategy);
    c.n_neighbors = j.value("n_neighbors", c.n_neighbors);
    c.k_direction = j.value("k_direction", c.k_direction);
    c.max_queries_per_doc = j.value("max_queries_per_doc", c.max_queries_per_doc);
    c.min_synonym_cosine = j.value("min_synonym_cosine", c.min_synonym_cosine);
    c.population_size = j.value("population_size", c.population_size);
    c.max_generations = j.value("max_generations", c.max_generations);
    c.mutation_rate = j.value("mutation_rate", c.mutation_rate);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

// Moving-direction memory, reset at the start of every document attack.
struct DirectionState {
  std::optional<std::vector<double>> best_direction;
  double best_drop = 0.0;
};

enum class AttackStatus { success, exhausted_budget, exhausted_candidates };

inline std::string to_string(AttackStatus s) {
  switch (s) {
    case AttackStatus::success: return "success";
    case AttackStatus::exhausted_budget: return "exhausted-budget";
    default: return "exhausted-candidates";
  }
}

struct AttackResult {
  std::string document_id;
  AttackStatus status = AttackStatus::exhausted_candidates;
  std::optional<std::vector<std::string>> adversarial_tokens;
  long queries_used = 0;
  long ranking_queries = 0;  // deletion-fallback probes, already included above
  std::vector<int> perturbed_positions;
  double perturbation_rate = 0.0;
};

struct TraceStep {
  int step = 0;
  int position = 0;
  std::string word;
  int candidate_count = 0;
  std::string chosen;  // empty when no candidate improved
  double conf_before = 0.0;
  double conf_after = 0.0;
  bool flipped = false;
  std::vector<std::string> candidates;  // in query order, for replay tests

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["position"] = position;
    j["word"] = word;
    j["candidate_count"] = candidate_count;
    j["chosen"] = chosen;
    j["conf_before"] = conf_before;
    j["conf_after"] = conf_after;
    j["flipped"] = flipped;
    j["candidates"] = candidates;
    return j;
  }
};

using AttackTrace = std::vector<TraceStep>;

// N nearest counter-fitted neighbors above the cosine gate; once a moving
// direction exists and the replace strategy is on, pruned to the K candidates
// whose word->candidate direction best matches it.
inline std::vector<std::string> candidate_synonyms(const std::string& word,
                                                   const EmbeddingStore& counter,
                                                   const AttackConfig& cfg,
                                                   const DirectionState& dir) {
  if (!counter.contains(word)) return {};
  auto neighbors =
      counter.nearest_neighbors(word, static_cast<std::size_t>(cfg.n_neighbors));
  std::vector<std::string> survivors;
  for (const auto& [w, score] : neighbors)
    if (score >= cfg.min_synonym_cosine) survivors.push_back(w);

  if (!cfg.use_replace_strategy || !dir.best_direction) return survivors;

  std::vector<std::pair<std::string, double>> matched;
  for (const auto& cand : survivors) {
    std::vector<double> dv;
    try {
      dv = counter.direction_vector(word, cand);
    } catch (const degenerate_error&) {
      continue;  // identical embedding, no usable direction
    }
    matched.emplace_back(cand, cosine(dv, *dir.best_direction));
  }
  std::sort(matched.begin(), matched.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (matched.size() > static_cast<std::size_t>(cfg.k_direction))
    matched.resize(static_cast<std::size_t>(cfg.k_direction));
  std::vector<std::string> out;
  out.reserve(matched.size());
  for (auto& [w, c] : matched) out.push_back(std::move(w));
  return out;
}

struct StepOutcome {
  enum Kind { flipped, improved, none } kind = none;
  std::string chosen;
  std::vector<std::string> tokens;  // document after the substitution
  double confidence = 0.0;          // original-class confidence after it
  std::vector<std::string> queried; // candidates actually sent, in order
};

// Queries candidates in order, exits immediately on a label flip, otherwise
// keeps the substitution with the largest confidence drop. Updates the moving
// direction when that drop beats the document's running best.
inline StepOutcome try_replacements(AttackSession& session,
                                    const std::vector<std::string>& current,
                                    int position, const std::string& original_word,
                                    const std::vector<std::string>& candidates,
                                    const EmbeddingStore& counter,
                                    DirectionState& dir, double current_conf) {
  StepOutcome out;
  double best_drop = 0.0;
  for (const auto& cand : candidates) {
    std::vector<std::string> trial = current;
    trial[static_cast<std::size_t>(position)] = cand;
    Prediction p = session.query(trial);
    out.queried.push_back(cand);
    double conf = p.scores.at(session.original_label());
    if (p.label != session.original_label()) {
      out.kind = StepOutcome::flipped;
      out.chosen = cand;
      out.tokens = std::move(trial);
      out.confidence = conf;
      return out;
    }
    double drop = current_conf - conf;
    if (drop > best_drop) {
      best_drop = drop;
      out.chosen = cand;
      out.tokens = std::move(trial);
      out.confidence = conf;
    }
  }
  if (best_drop > 0.0) {
    out.kind = StepOutcome::improved;
    if (best_drop > dir.best_drop) {
      try {
        dir.best_direction = counter.direction_vector(original_word, out.chosen);
        dir.best_drop = best_drop;
      } catch (const error&) {
        // OOV or degenerate pair: keep the previous direction
      }
    }
  }
  return out;
}

namespace detail {

inline std::vector<WordScore> initial_ranking(AttackSession& session,
                                              const AttackConfig& cfg,
                                              const SurrogateRanker* ranker,
                                              const std::set<std::string>& stoplist,
                                              double original_conf,
                                              long& ranking_queries) {
  if (cfg.use_rank_strategy && ranker && ranker->usable()) {
    ranking_queries = 0;
    return ranker->rank_words(session.doc().tokens, stoplist);
  }
  long before = session.used();
  auto ranking = rank_words_deletion(session, original_conf, stoplist);
  ranking_queries = session.used() - before;
  return ranking;
}

inline AttackResult finish(AttackSession& session, const std::string& doc_id,
                           AttackStatus status,
                           std::optional<std::vector<std::string>> adv,
                           const std::set<int>& perturbed, long ranking_queries,
                           std::size_t doc_len) {
  AttackResult r;
  r.document_id = doc_id;
  r.status = status;
  r.adversarial_tokens = std::move(adv);
  r.queries_used = session.used();
  r.ranking_queries = ranking_queries;
  r.perturbed_positions.assign(perturbed.begin(), perturbed.end());
  r.perturbation_rate =
      doc_len ? static_cast<double>(perturbed.size()) / static_cast<double>(doc_len)
              : 0.0;
  return r;
}

}  // namespace detail

// Greedy search: visit positions in rank order, commit the best confidence
// drop at each, stop on flip, budget, or positions exhausted. Each position is
// visited at most once.
inline AttackResult greedy_attack(const LabeledDocument& doc,
                                  const Prediction& original,
                                  const TargetModel& target,
                                  const EmbeddingStore& counter,
                                  const AttackConfig& cfg, QueryLedger& ledger,
                                  const SurrogateRanker* ranker,
                                  const std::set<std::string>& stoplist,
                                  AttackTrace* trace = nullptr) {
  if (doc.tokens.empty()) throw domain_error("greedy_attack: empty document");
  cfg.validate();
  AttackSession session(target, ledger, doc, original.label,
                        cfg.max_queries_per_doc);
  DirectionState dir;
  std::set<int> perturbed;
  long ranking_queries = 0;
  double conf = original.scores.at(original.label);
  std::vector<std::string> current = doc.tokens;
  try {
    auto ranking = detail::initial_ranking(session, cfg, ranker, stoplist,
                                           conf, ranking_queries);
    int step = 0;
    for (const auto& ws : ranking) {
      auto candidates = candidate_synonyms(doc.tokens[ws.position], counter, cfg, dir);
      if (candidates.empty()) continue;
      auto outcome = try_replacements(session, current, ws.position,
                                      doc.tokens[ws.position], candidates,
                                      counter, dir, conf);
      if (trace) {
        TraceStep t;
        t.step = step;
        t.position = ws.position;
        t.word = doc.tokens[ws.position];
        t.candidate_count = static_cast<int>(candidates.size());
        t.chosen = outcome.chosen;
        t.conf_before = conf;
        t.conf_after = outcome.kind == StepOutcome::none ? conf : outcome.confidence;
        t.flipped = outcome.kind == StepOutcome::flipped;
        t.candidates = outcome.queried;
        trace->push_back(std::move(t));
      }
      ++step;
      if (outcome.kind == StepOutcome::flipped) {
        perturbed.insert(ws.position);
        return detail::finish(session, doc.id, AttackStatus::success,
                              std::move(outcome.tokens), perturbed,
                              ranking_queries, doc.tokens.size());
      }
      if (outcome.kind == StepOutcome::improved) {
        current = std::move(outcome.tokens);
        conf = outcome.confidence;
        perturbed.insert(ws.position);
      }
    }
  } catch (const budget_exhausted&) {
    return detail::finish(session, doc.id, AttackStatus::exhausted_budget,
                          std::nullopt, perturbed, ranking_queries,
                          doc.tokens.size());
  }
  return detail::finish(session, doc.id, AttackStatus::exhausted_candidates,
                        std::nullopt, perturbed, ranking_queries,
                        doc.tokens.size());
}

namespace detail {

struct Individual {
  std::vector<std::string> tokens;
  double fitness = 0.0;  // original-class confidence drop vs the clean document
  std::optional<std::pair<int, std::string>> last_mutation;  // position, new word
};

// Position sampling distribution for mutation: softmax over ranking scores
// when the rank strategy is active, uniform otherwise.
inline std::vector<double> position_weights(const std::vector<WordScore>& ranking,
                                            bool use_scores) {
  std::vector<double> w(ranking.size(), 1.0);
  if (use_scores && !ranking.empty()) {
    double mx = ranking[0].score;
    for (const auto& r : ranking) mx = std::max(mx, r.score);
    double z = 0.0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      w[i] = std::exp(ranking[i].score - mx);
      z += w[i];
    }
    for (double& x : w) x /= z;
  }
  return w;
}

inline std::size_t sample_index(const std::vector<double>& weights,
                                std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    r -= weights[i];
    if (r <= 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace detail

// Genetic search: ranking scores seed the first generation's mutation
// positions; fitness is the confidence drop of the original class; elitism of
// one, uniform crossover with fitness-proportional parents, per-child mutation
// through candidate_synonyms sharing the moving-direction state.
inline AttackResult genetic_attack(const LabeledDocument& doc,
                                   const Prediction& original,
                                   const TargetModel& target,
                                   const EmbeddingStore& counter,
                                   const AttackConfig& cfg, QueryLedger& ledger,
                                   const SurrogateRanker* ranker,
                                   const std::set<std::string>& stoplist,
                                   AttackTrace* trace = nullptr) {
  if (doc.tokens.empty()) throw domain_error("genetic_attack: empty document");
  cfg.validate();
  AttackSession session(target, ledger, doc, original.label,
                        cfg.max_queries_per_doc);
  DirectionState dir;
  long ranking_queries = 0;
  double orig_conf = original.scores.at(original.label);

  std::mt19937_64 rng(cfg.seed ^ std::hash<std::string>{}(doc.id));

  auto perturbed_of = [&](const std::vector<std::string>& tokens) {
    std::set<int> out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
      if (tokens[i] != doc.tokens[i]) out.insert(static_cast<int>(i));
    return out;
  };

  try {
    auto ranking = detail::initial_ranking(session, cfg, ranker, stoplist,
                                           orig_conf, ranking_queries);
    if (ranking.empty())
      return detail::finish(session, doc.id, AttackStatus::exhausted_candidates,
                            std::nullopt, {}, ranking_queries, doc.tokens.size());
    bool use_scores = cfg.use_rank_strategy && ranker && ranker->usable();
    auto weights = detail::position_weights(ranking, use_scores);

    // Mutates one sampled position; returns false when no position yields a
    // candidate after a few tries.
    auto mutate = [&](detail::Individual& ind) {
      for (int attempt = 0; attempt < 8; ++attempt) {
        std::size_t ri = detail::sample_index(weights, rng);
        int pos = ranking[ri].position;
        auto cands = candidate_synonyms(doc.tokens[pos], counter, cfg, dir);
        if (cands.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
        std::string cand = cands[pick(rng)];
        ind.tokens[static_cast<std::size_t>(pos)] = cand;
        ind.last_mutation = {pos, cand};
        return true;
      }
      return false;
    };

    // Evaluation = one attack query. Throws FoundAdversarial via return.
    std::optional<std::vector<std::string>> adversarial;
    auto evaluate = [&](detail::Individual& ind) {
      Prediction p = session.query(ind.tokens);
      double conf = p.scores.at(session.original_label());
      ind.fitness = orig_conf - conf;
      if (p.label != session.original_label()) {
        adversarial = ind.tokens;
        return true;
      }
      if (ind.last_mutation && ind.fitness > dir.best_drop) {
        const auto& [pos, word] = *ind.last_mutation;
        try {
          dir.best_direction =
              counter.direction_vector(doc.tokens[pos], word);
          dir.best_drop = ind.fitness;
        } catch (const error&) {
        }
      }
      return false;
    };

    std::vector<detail::Individual> pop;
    for (int i = 0; i < cfg.population_size; ++i) {
      detail::Individual ind;
      ind.tokens = doc.tokens;
      if (!mutate(ind))
        return detail::finish(session, doc.id, AttackStatus::exhausted_candidates,
                              std::nullopt, {}, ranking_queries,
                              doc.tokens.size());
      if (evaluate(ind))
        return detail::finish(session, doc.id, AttackStatus::success,
                              std::move(adversarial), perturbed_of(ind.tokens),
                              ranking_queries, doc.tokens.size());
      pop.push_back(std::move(ind));
    }

    for (int gen = 1; gen <= cfg.max_generations; ++gen) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < pop.size(); ++i)
        if (pop[i].fitness > pop[best].fitness) best = i;

      std::vector<double> fit(pop.size());
      double fmin = pop[best].fitness;
      for (const auto& ind : pop) fmin = std::min(fmin, ind.fitness);
      for (std::size_t i = 0; i < pop.size(); ++i)
        fit[i] = pop[i].fitness - fmin + 1e-9;

      std::vector<detail::Individual> next;
      next.push_back(pop[best]);  // elite keeps its cached fitness, no query
      next.back().last_mutation.reset();
      while (static_cast<int>(next.size()) < cfg.population_size) {
        std::size_t a = detail::sample_index(fit, rng);
        std::size_t b = detail::sample_index(fit, rng);
        detail::Individual child;
        child.tokens.resize(doc.tokens.size());
        std::uniform_int_distribution<int> coin(0, 1);
        for (std::size_t i = 0; i < doc.tokens.size(); ++i)
          child.tokens[i] = coin(rng) ? pop[a].tokens[i] : pop[b].tokens[i];
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng) < cfg.mutation_rate) mutate(child);
        if (evaluate(child))
          return detail::finish(session, doc.id, AttackStatus::success,
                                std::move(adversarial),
                                perturbed_of(child.tokens), ranking_queries,
                                doc.tokens.size());
        next.push_back(std::move(child));
      }
      pop = std::move(next);
      if (trace) {
        TraceStep t;
        t.step = gen;
        t.position = -1;
        t.candidate_count = static_cast<int>(pop.size());
        t.conf_before = orig_conf;
        t.conf_after = orig_conf - pop[0].fitness;
        trace->push_back(std::move(t));
      }
    }
  } catch (const budget_exhausted&) {
    return detail::finish(session, doc.id, AttackStatus::exhausted_budget,
                          std::nullopt, {}, ranking_queries, doc.tokens.size());
  }
  return detail::finish(session, doc.id, AttackStatus::exhausted_candidates,
                        std::nullopt, {}, ranking_queries, doc.tokens.size());
}

inline AttackResult run_attack(const LabeledDocument& doc,
                               const Prediction& original,
                               const TargetModel& target,
                               const EmbeddingStore& counter,
                               const AttackConfig& cfg, QueryLedger& ledger,
                               const SurrogateRanker* ranker,
                               const std::set<std::string>& stoplist,
                               AttackTrace* trace = nullptr) {
  if (cfg.method == "genetic")
    return genetic_attack(doc, original, target, counter, cfg, ledger, ranker,
                          stoplist, trace);
  return greedy_attack(doc, original, target, counter, cfg, ledger, ranker,
                       stoplist, trace);
}

}  // namespace wsa
