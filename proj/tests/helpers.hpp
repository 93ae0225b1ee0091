#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "wsa/embedding.hpp"
#include "wsa/target.hpp"

namespace wsatest {

// Binary stub target: P(class 1) = sigmoid(bias + sum of token weights).
// Unknown tokens weigh nothing. Deterministic and fully scriptable.
struct TokenWeightTarget : wsa::TargetModel {
  std::map<std::string, double> weights;
  double bias = 0.0;

  wsa::Prediction predict(const std::vector<std::string>& tokens) const override {
    if (tokens.empty()) throw wsa::domain_error("predict: empty token sequence");
    double z = bias;
    for (const auto& t : tokens) {
      auto it = weights.find(t);
      if (it != weights.end()) z += it->second;
    }
    double p1 = 1.0 / (1.0 + std::exp(-z));
    wsa::Prediction p;
    p.scores = {1.0 - p1, p1};
    p.label = wsa::argmax_lowest(p.scores);
    return p;
  }
  int num_classes() const override { return 2; }
};

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("wsa_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string write_file(const TempDir& dir, const std::string& name,
                              const std::string& content) {
  std::string p = dir.file(name);
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p;
}

// Independent brute-force nearest-neighbor oracle.
inline std::vector<std::pair<std::string, double>> nn_oracle(
    const wsa::EmbeddingStore& store, const std::string& word, std::size_t n) {
  std::span<const double> q = store.vec(word);
  std::vector<std::pair<std::string, double>> all;
  for (const auto& w : store.words()) {
    if (w == word) continue;
    std::span<const double> v = store.vec(w);
    double dp = 0.0, nq = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      dp += q[i] * v[i];
      nq += q[i] * q[i];
      nv += v[i] * v[i];
    }
    all.emplace_back(w, dp / (std::sqrt(nq) * std::sqrt(nv)));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (all.size() > n) all.resize(n);
  return all;
}

inline wsa::EmbeddingStore abc_store() {
  wsa::EmbeddingStore s(2, "test");
  s.insert("a", std::vector<double>{1.0, 0.0});
  s.insert("b", std::vector<double>{0.9, 0.1});
  s.insert("c", std::vector<double>{0.0, 1.0});
  return s;
}

}  // namespace wsatest
