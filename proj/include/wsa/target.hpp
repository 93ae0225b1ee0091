#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wsa/dataset.hpp"
#include "wsa/error.hpp"
#include "wsa/tokenize.hpp"

namespace wsa {

struct Prediction {
  int label = 0;
  std::vector<double> scores;
};

inline int argmax_lowest(const std::vector<double>& scores) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

// Black-box classifier interface. Every call through this interface from an
// attack session is one attack query.
class TargetModel {
 public:
  virtual ~TargetModel() = default;
  virtual Prediction predict(const std::vector<std::string>& tokens) const = 0;
  virtual int num_classes() const = 0;
};

// Counts invocations without changing behavior. Used by the accounting tests.
class InstrumentedTarget : public TargetModel {
 public:
  explicit InstrumentedTarget(const TargetModel& inner) : inner_(inner) {}
  Prediction predict(const std::vector<std::string>& tokens) const override {
    ++calls_;
    return inner_.predict(tokens);
  }
  int num_classes() const override { return inner_.num_classes(); }
  long calls() const { return calls_.load(); }
  void reset() { calls_ = 0; }

 private:
  const TargetModel& inner_;
  mutable std::atomic<long> calls_{0};
};

struct TargetTrainConfig {
  int epochs = 300;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  std::uint64_t seed = 0;  // kept for config compatibility; training is zero-init
};

// Bag-of-words multinomial logistic regression. Immutable after training.
class LocalTextClassifier : public TargetModel {
 public:
  LocalTextClassifier() = default;

  Prediction predict(const std::vector<std::string>& tokens) const override {
    if (tokens.empty()) throw domain_error("predict: empty token sequence");
    std::vector<double> logits(bias_);
    for (const auto& t : tokens) {
      auto it = vocab_.find(t);
      if (it == vocab_.end()) continue;  // unknown tokens carry no feature
      std::size_t f = it->second;
      for (std::size_t c = 0; c < logits.size(); ++c)
        logits[c] += weights_[c * n_features_ + f];
    }
    Prediction p;
    p.scores = softmax(logits);
    p.label = argmax_lowest(p.scores);
    return p;
  }

  int num_classes() const override { return static_cast<int>(bias_.size()); }
  std::size_t num_features() const { return n_features_; }
  double training_accuracy() const { return training_accuracy_; }
  const std::vector<double>& loss_history() const { return loss_history_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["type"] = "bow-logreg";
    j["classes"] = static_cast<int>(bias_.size());
    j["class_names"] = class_names_;
    j["features"] = feature_names_;
    j["weights"] = weights_;
    j["bias"] = bias_;
    j["training_accuracy"] = training_accuracy_;
    return j;
  }

  static LocalTextClassifier from_json(const nlohmann::json& j) {
    LocalTextClassifier m;
    try {
      m.class_names_ = j.at("class_names").get<std::vector<std::string>>();
      m.feature_names_ = j.at("features").get<std::vector<std::string>>();
      m.weights_ = j.at("weights").get<std::vector<double>>();
      m.bias_ = j.at("bias").get<std::vector<double>>();
      if (j.contains("training_accuracy"))
        m.training_accuracy_ = j["training_accuracy"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw format_error(std::string("bad model file: ") + e.what());
    }
    m.n_features_ = m.feature_names_.size();
    if (m.weights_.size() != m.bias_.size() * m.n_features_)
      throw format_error("bad model file: weight matrix shape mismatch");
    for (std::size_t i = 0; i < m.feature_names_.size(); ++i)
      m.vocab_.emplace(m.feature_names_[i], i);
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot write model file: " + path);
    out << to_json().dump(2) << '\n';
  }

  static LocalTextClassifier load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open model file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw format_error(path + ": " + e.what());
    }
    return from_json(j);
  }

  static std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      out[i] = std::exp(logits[i] - mx);
      z += out[i];
    }
    for (double& x : out) x /= z;
    return out;
  }

  friend LocalTextClassifier train_local_target(
      const std::vector<LabeledDocument>&, const TargetTrainConfig&,
      const std::vector<std::string>&);

 private:
  std::map<std::string, std::size_t> vocab_;
  std::vector<std::string> feature_names_;  // sorted token list
  std::vector<double> weights_;             // [classes x features], row-major
  std::vector<double> bias_;
  std::vector<std::string> class_names_;
  std::size_t n_features_ = 0;
  double training_accuracy_ = 0.0;
  std::vector<double> loss_history_;
};

// Full-batch gradient descent on softmax cross-entropy over token counts.
// Deterministic: zero init, sorted vocabulary, fixed epoch count.
inline LocalTextClassifier train_local_target(
    const std::vector<LabeledDocument>& corpus, const TargetTrainConfig& cfg = {},
    const std::vector<std::string>& class_names = {}) {
  std::set<int> labels;
  for (const auto& d : corpus) labels.insert(d.gold_label);
  if (labels.size() < 2)
    throw domain_error("train_local_target: need at least 2 classes");
  int n_classes = *labels.rbegin() + 1;
  if (static_cast<int>(labels.size()) != n_classes || *labels.begin() != 0)
    throw domain_error("train_local_target: labels must be contiguous 0-based");

  std::set<std::string> vocab_set;
  for (const auto& d : corpus)
    for (const auto& t : d.tokens) vocab_set.insert(t);

  LocalTextClassifier m;
  m.feature_names_.assign(vocab_set.begin(), vocab_set.end());
  m.n_features_ = m.feature_names_.size();
  for (std::size_t i = 0; i < m.n_features_; ++i)
    m.vocab_.emplace(m.feature_names_[i], i);
  m.weights_.assign(static_cast<std::size_t>(n_classes) * m.n_features_, 0.0);
  m.bias_.assign(n_classes, 0.0);
  if (!class_names.empty()) {
    if (static_cast<int>(class_names.size()) != n_classes)
      throw domain_error("train_local_target: class_names size mismatch");
    m.class_names_ = class_names;
  } else {
    for (int c = 0; c < n_classes; ++c) m.class_names_.push_back("class" + std::to_string(c));
  }

  // Sparse count features per document.
  std::size_t n = corpus.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> feats(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::size_t, double> counts;
    for (const auto& t : corpus[i].tokens) counts[m.vocab_.at(t)] += 1.0;
    feats[i].assign(counts.begin(), counts.end());
  }

  std::vector<double> grad_w(m.weights_.size());
  std::vector<double> grad_b(n_classes);
  std::vector<double> logits(n_classes), probs;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < n_classes; ++c) {
        double z = m.bias_[c];
        for (const auto& [f, v] : feats[i]) z += m.weights_[c * m.n_features_ + f] * v;
        logits[c] = z;
      }
      probs = LocalTextClassifier::softmax(logits);
      loss -= std::log(std::max(probs[corpus[i].gold_label], 1e-300));
      for (int c = 0; c < n_classes; ++c) {
        double err = probs[c] - (c == corpus[i].gold_label ? 1.0 : 0.0);
        grad_b[c] += err;
        for (const auto& [f, v] : feats[i]) grad_w[c * m.n_features_ + f] += err * v;
      }
    }
    double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    double reg = 0.0;
    for (double w : m.weights_) reg += w * w;
    loss += 0.5 * cfg.l2 * reg;
    m.loss_history_.push_back(loss);
    for (std::size_t k = 0; k < m.weights_.size(); ++k)
      m.weights_[k] -= cfg.learning_rate * (grad_w[k] * inv_n + cfg.l2 * m.weights_[k]);
    for (int c = 0; c < n_classes; ++c)
      m.bias_[c] -= cfg.learning_rate * grad_b[c] * inv_n;
  }

  std::size_t correct = 0;
  for (const auto& d : corpus)
    if (m.predict(d.tokens).label == d.gold_label) ++correct;
  m.training_accuracy_ = static_cast<double>(correct) / static_cast<double>(n);
  return m;
}

}  // namespace wsa
