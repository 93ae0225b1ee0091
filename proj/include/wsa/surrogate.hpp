#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wsa/embedding.hpp"
#include "wsa/error.hpp"
#include "wsa/ledger.hpp"
#include "wsa/session.hpp"

namespace wsa {

enum class EncodingMode { embedding, bag_of_words };

inline std::string to_string(EncodingMode m) {
  return m == EncodingMode::embedding ? "embedding" : "bag-of-words";
}

inline EncodingMode encoding_mode_from_string(const std::string& s) {
  if (s == "embedding") return EncodingMode::embedding;
  if (s == "bag-of-words") return EncodingMode::bag_of_words;
  throw domain_error("unknown encoding mode: " + s);
}

struct SurrogateConfig {
  EncodingMode mode = EncodingMode::embedding;
  long min_train = 50;
  double learning_rate = 0.1;
  int epochs = 300;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  bool warm_start = false;
};

struct WordScore {
  int position = 0;
  std::string word;
  double score = 0.0;
};

// Mean of embeddings of the in-vocabulary tokens.
inline std::vector<double> encode_query_embedding(
    const std::vector<std::string>& tokens, const EmbeddingStore& store) {
  std::vector<double> acc(store.dim(), 0.0);
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    if (!store.contains(t)) continue;
    std::span<const double> v = store.vec(t);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    ++hits;
  }
  if (hits == 0)
    throw degenerate_error("encode_query: no in-vocabulary tokens");
  for (double& x : acc) x /= static_cast<double>(hits);
  return acc;
}

// Binary presence vector over a fixed vocabulary.
inline std::vector<double> encode_query_bow(
    const std::vector<std::string>& tokens,
    const std::map<std::string, std::size_t>& vocab_index) {
  std::vector<double> x(vocab_index.size(), 0.0);
  for (const auto& t : tokens) {
    auto it = vocab_index.find(t);
    if (it != vocab_index.end()) x[it->second] = 1.0;
  }
  return x;
}

// Regularized binary log-loss and its analytic gradient, shared by training
// and the finite-difference tests. Bias is unregularized.
inline double logreg_loss(const std::vector<std::vector<double>>& X,
                          const std::vector<double>& y,
                          const std::vector<double>& w, double b, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double z = b;
    for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * X[i][k];
    // log(1+exp(-m)) with m = z for y=1, -z for y=0, computed stably
    double m = y[i] > 0.5 ? z : -z;
    loss += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  loss /= static_cast<double>(X.size());
  double reg = 0.0;
  for (double wk : w) reg += wk * wk;
  return loss + 0.5 * l2 * reg;
}

inline void logreg_gradient(const std::vector<std::vector<double>>& X,
                            const std::vector<double>& y,
                            const std::vector<double>& w, double b, double l2,
                            std::vector<double>& grad_w, double& grad_b) {
  grad_w.assign(w.size(), 0.0);
  grad_b = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double z = b;
    for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * X[i][k];
    double p = 1.0 / (1.0 + std::exp(-z));
    double err = p - y[i];
    grad_b += err;
    for (std::size_t k = 0; k < w.size(); ++k) grad_w[k] += err * X[i][k];
  }
  double inv_n = 1.0 / static_cast<double>(X.size());
  grad_b *= inv_n;
  for (std::size_t k = 0; k < w.size(); ++k)
    grad_w[k] = grad_w[k] * inv_n + l2 * w[k];
}

// Learned word-importance model. Positive class = queries that flipped the
// prediction, so higher scores mean more attack-worthy words.
class SurrogateRanker {
 public:
  bool usable() const { return usable_; }
  const std::string& status() const { return status_; }
  EncodingMode mode() const { return mode_; }
  long trained_on() const { return trained_on_; }
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  const std::vector<double>& loss_history() const { return loss_history_; }

  double word_score(const std::string& word) const {
    if (!usable_) return 0.0;
    if (mode_ == EncodingMode::embedding) {
      if (!store_ || !store_->contains(word)) return 0.0;
      return dot(weights_, store_->vec(word));
    }
    auto it = vocab_index_.find(word);
    return it == vocab_index_.end() ? 0.0 : weights_[it->second];
  }

  // Non-stoplist tokens sorted by descending score, ties by position.
  std::vector<WordScore> rank_words(const std::vector<std::string>& tokens,
                                    const std::set<std::string>& stoplist) const {
    std::vector<WordScore> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (stoplist.count(tokens[i])) continue;
      out.push_back({static_cast<int>(i), tokens[i], word_score(tokens[i])});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.score > b.score;
    });
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = wsa::to_string(mode_);
    j["weights"] = weights_;
    j["bias"] = bias_;
    j["trained_on"] = trained_on_;
    j["embedding_dim"] =
        mode_ == EncodingMode::embedding ? static_cast<long>(weights_.size()) : 0;
    if (mode_ == EncodingMode::bag_of_words) j["vocabulary"] = vocab_;
    return j;
  }

  static SurrogateRanker from_json(const nlohmann::json& j,
                                   const EmbeddingStore* store) {
    SurrogateRanker r;
    try {
      r.mode_ = encoding_mode_from_string(j.at("mode").get<std::string>());
      r.weights_ = j.at("weights").get<std::vector<double>>();
      r.bias_ = j.at("bias").get<double>();
      r.trained_on_ = j.at("trained_on").get<long>();
      if (r.mode_ == EncodingMode::bag_of_words)
        r.vocab_ = j.at("vocabulary").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw format_error(std::string("bad ranker file: ") + e.what());
    }
    for (std::size_t i = 0; i < r.vocab_.size(); ++i)
      r.vocab_index_.emplace(r.vocab_[i], i);
    r.store_ = store;
    r.usable_ = true;
    r.status_ = "usable";
    return r;
  }

  friend SurrogateRanker train_surrogate(const QueryLedger&,
                                         const EmbeddingStore*,
                                         const SurrogateConfig&,
                                         const SurrogateRanker*);

 private:
  bool usable_ = false;
  std::string status_ = "untrained";
  EncodingMode mode_ = EncodingMode::embedding;
  std::vector<double> weights_;
  double bias_ = 0.0;
  long trained_on_ = 0;
  const EmbeddingStore* store_ = nullptr;
  std::vector<std::string> vocab_;  // bag-of-words mode only, sorted
  std::map<std::string, std::size_t> vocab_index_;
  std::vector<double> loss_history_;
};

// Trains from scratch on the full ledger (optionally warm-started from a
// previous ranker). Returns a not-usable ranker when the ledger is below the
// training threshold or single-class.
inline SurrogateRanker train_surrogate(const QueryLedger& ledger,
                                       const EmbeddingStore* store,
                                       const SurrogateConfig& cfg = {},
                                       const SurrogateRanker* previous = nullptr) {
  SurrogateRanker r;
  r.mode_ = cfg.mode;
  r.store_ = store;
  if (cfg.mode == EncodingMode::embedding && !store)
    throw domain_error("train_surrogate: embedding mode needs a store");

  auto records = ledger.records();
  if (static_cast<long>(records.size()) < cfg.min_train) {
    r.status_ = "not-usable: only " + std::to_string(records.size()) +
                " records, need " + std::to_string(cfg.min_train);
    return r;
  }

  std::vector<std::vector<double>> X;
  std::vector<double> y;
  if (cfg.mode == EncodingMode::embedding) {
    std::size_t skipped = 0;
    for (const auto& rec : records) {
      try {
        X.push_back(encode_query_embedding(rec.tokens, *store));
      } catch (const degenerate_error&) {
        ++skipped;
        continue;
      }
      y.push_back(rec.unchanged ? 0.0 : 1.0);
    }
    if (skipped)
      std::cerr << "warning: train_surrogate: skipped " << skipped
                << " record(s) with no in-vocabulary tokens\n";
  } else {
    std::set<std::string> vocab_set;
    for (const auto& rec : records)
      for (const auto& t : rec.tokens) vocab_set.insert(t);
    r.vocab_.assign(vocab_set.begin(), vocab_set.end());
    for (std::size_t i = 0; i < r.vocab_.size(); ++i)
      r.vocab_index_.emplace(r.vocab_[i], i);
    for (const auto& rec : records) {
      X.push_back(encode_query_bow(rec.tokens, r.vocab_index_));
      y.push_back(rec.unchanged ? 0.0 : 1.0);
    }
  }

  if (static_cast<long>(X.size()) < cfg.min_train) {
    r.status_ = "not-usable: below threshold after encoding";
    return r;
  }
  bool has_pos = false, has_neg = false;
  for (double yi : y) (yi > 0.5 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    r.status_ = "not-usable: single-class ledger";
    return r;
  }

  std::size_t dim = X[0].size();
  r.weights_.assign(dim, 0.0);
  r.bias_ = 0.0;
  if (cfg.warm_start && previous && previous->usable() &&
      previous->mode() == cfg.mode && previous->weights().size() == dim) {
    r.weights_ = previous->weights();
    r.bias_ = previous->bias();
  }

  std::vector<double> grad_w;
  double grad_b = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    r.loss_history_.push_back(logreg_loss(X, y, r.weights_, r.bias_, cfg.l2));
    logreg_gradient(X, y, r.weights_, r.bias_, cfg.l2, grad_w, grad_b);
    for (std::size_t k = 0; k < dim; ++k)
      r.weights_[k] -= cfg.learning_rate * grad_w[k];
    r.bias_ -= cfg.learning_rate * grad_b;
  }

  r.trained_on_ = static_cast<long>(X.size());
  r.usable_ = true;
  r.status_ = "usable";
  return r;
}

// Deletion-based fallback ranking: score = confidence drop when the token is
// removed. One real target query per non-stoplist position.
inline std::vector<WordScore> rank_words_deletion(
    AttackSession& session, double original_confidence,
    const std::set<std::string>& stoplist) {
  const auto& tokens = session.doc().tokens;
  if (tokens.empty()) throw domain_error("rank_words_deletion: empty document");
  std::vector<WordScore> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (stoplist.count(tokens[i])) continue;
    double score = 0.0;
    if (tokens.size() > 1) {
      std::vector<std::string> reduced;
      reduced.reserve(tokens.size() - 1);
      for (std::size_t j = 0; j < tokens.size(); ++j)
        if (j != i) reduced.push_back(tokens[j]);
      Prediction p = session.query(reduced);
      score = original_confidence - p.scores.at(session.original_label());
    }
    out.push_back({static_cast<int>(i), tokens[i], score});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.score > b.score;
  });
  return out;
}

}  // namespace wsa
