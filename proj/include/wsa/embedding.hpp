#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wsa/error.hpp"

namespace wsa {

inline double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Cosine similarity; throws on zero vectors or mismatched dims.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw domain_error("cosine: dimension mismatch (" + std::to_string(u.size()) +
                       " vs " + std::to_string(v.size()) + ")");
  double nu = norm2(u), nv = norm2(v);
  if (nu == 0.0 || nv == 0.0) throw domain_error("cosine: zero vector");
  return dot(u, v) / (nu * nv);
}

// Immutable word -> dense vector table. Lookups are exact-match after the
// optional lowercasing pass applied at load and query time.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::size_t dim, std::string name, bool lowercase = true)
      : dim_(dim), name_(std::move(name)), lowercase_(lowercase) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& words() const { return words_; }

  bool insert(const std::string& word, std::span<const double> vec) {
    if (word.empty()) throw domain_error("EmbeddingStore: empty word key");
    if (vec.size() != dim_) throw domain_error("EmbeddingStore: wrong vector size");
    std::string key = normalize_key(word);
    if (index_.count(key)) return false;  // duplicates keep first occurrence
    index_.emplace(key, words_.size());
    words_.push_back(key);
    data_.insert(data_.end(), vec.begin(), vec.end());
    norms_.push_back(norm2(vec));
    return true;
  }

  bool contains(const std::string& word) const {
    return index_.count(normalize_key(word)) != 0;
  }

  std::span<const double> vec(const std::string& word) const {
    auto it = index_.find(normalize_key(word));
    if (it == index_.end())
      throw oov_error("word not in " + name_ + " vocabulary: " + word);
    return vec_at(it->second);
  }

  std::span<const double> vec_at(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  double norm_at(std::size_t i) const { return norms_[i]; }

  // Exact brute-force scan over the vocabulary, excluding the query word.
  // Sorted by descending cosine, ties by ascending word order.
  std::vector<std::pair<std::string, double>> nearest_neighbors(
      const std::string& word, std::size_t n) const {
    auto it = index_.find(normalize_key(word));
    if (it == index_.end())
      throw oov_error("word not in " + name_ + " vocabulary: " + word);
    std::size_t self = it->second;
    std::span<const double> q = vec_at(self);
    double qn = norms_[self];
    if (qn == 0.0) throw domain_error("nearest_neighbors: zero query vector");

    std::vector<std::pair<std::string, double>> all;
    all.reserve(words_.size() > 0 ? words_.size() - 1 : 0);
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (i == self) continue;
      double nn = norms_[i];
      double c = nn == 0.0 ? -1.0 : dot(q, vec_at(i)) / (qn * nn);
      all.emplace_back(words_[i], c);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (all.size() > n) all.resize(n);
    return all;
  }

  // Unit vector from `from_word`'s embedding to `to_word`'s embedding.
  std::vector<double> direction_vector(const std::string& from_word,
                                       const std::string& to_word) const {
    std::span<const double> a = vec(from_word);
    std::span<const double> b = vec(to_word);
    std::vector<double> d(dim_);
    for (std::size_t i = 0; i < dim_; ++i) d[i] = b[i] - a[i];
    double n = norm2(d);
    if (n == 0.0)
      throw degenerate_error("direction_vector: identical embeddings for '" +
                             from_word + "' and '" + to_word + "'");
    for (double& x : d) x /= n;
    return d;
  }

  bool lowercase() const { return lowercase_; }

 private:
  std::string normalize_key(const std::string& w) const {
    if (!lowercase_) return w;
    std::string out = w;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  }

  std::size_t dim_ = 0;
  std::string name_;
  bool lowercase_ = true;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
  std::vector<double> norms_;
};

struct LoadOptions {
  bool lowercase = true;
  std::string name = "vectors";
};

// GloVe text format: one record per line, token then dim floats separated by
// single spaces, no header. Accepts \n and \r\n.
inline EmbeddingStore load_embeddings(const std::string& path,
                                      std::optional<std::size_t> expected_dim = {},
                                      LoadOptions opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open vector file: " + path);

  EmbeddingStore store;
  std::string line;
  std::size_t line_no = 0;
  std::size_t duplicates = 0;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    vec.clear();
    double x;
    while (ls >> x) vec.push_back(x);
    if (!ls.eof())
      throw format_error(path + ":" + std::to_string(line_no) +
                         ": non-numeric vector component");
    for (double v : vec)
      if (!std::isfinite(v))
        throw format_error(path + ":" + std::to_string(line_no) +
                           ": non-finite vector component");
    if (store.size() == 0 && store.dim() == 0) {
      if (vec.empty())
        throw format_error(path + ":" + std::to_string(line_no) +
                           ": record has no vector components");
      if (expected_dim && vec.size() != *expected_dim)
        throw format_error(path + ": dimension mismatch, file has " +
                           std::to_string(vec.size()) + ", expected " +
                           std::to_string(*expected_dim));
      store = EmbeddingStore(vec.size(), opts.name, opts.lowercase);
    }
    if (vec.size() != store.dim())
      throw format_error(path + ":" + std::to_string(line_no) +
                         ": ragged record, got " + std::to_string(vec.size()) +
                         " components, expected " + std::to_string(store.dim()));
    if (!store.insert(word, vec)) ++duplicates;
  }
  if (store.size() == 0) throw format_error(path + ": empty vector file");
  if (duplicates)
    std::cerr << "warning: " << path << ": " << duplicates
              << " duplicate word(s), kept first occurrence\n";
  return store;
}

// Writes the same format load_embeddings reads, at full double precision.
inline void save_embeddings(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write vector file: " + path);
  char buf[64];
  for (std::size_t i = 0; i < store.size(); ++i) {
    out << store.words()[i];
    std::span<const double> v = store.vec_at(i);
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.17g", x);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace wsa
