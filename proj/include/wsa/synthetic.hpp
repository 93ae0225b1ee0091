#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wsa/dataset.hpp"
#include "wsa/embedding.hpp"

namespace wsa {

// Desk-scale 2-class sentiment corpus with matching synthetic word vectors.
//
// Vector geometry: sentiment words share a common anchor axis; each
// positive/negative pair is separated along a fixed polarity axis, so the
// substitution that reverses polarity always moves along the same direction.
// Each pair also gets a cloud of near-synonym decoys offset in random
// directions. Filler words are deliberately absent from the vector table.
struct SyntheticConfig {
  int documents = 2000;
  int pairs = 12;              // positive/negative word pairs
  int decoys_per_pair = 30;
  int fillers = 200;
  int doc_length = 30;
  int sentiment_per_doc = 4;
  std::size_t dim = 16;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  std::vector<LabeledDocument> docs;
  EmbeddingStore vectors;
};

inline SyntheticData make_synthetic_sentiment(const SyntheticConfig& cfg = {}) {
  if (cfg.dim < 4) throw domain_error("synthetic corpus needs dim >= 4");
  if (cfg.sentiment_per_doc > cfg.pairs || cfg.sentiment_per_doc < 1 ||
      cfg.sentiment_per_doc > cfg.doc_length)
    throw domain_error("bad sentiment_per_doc");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto noise_unit = [&] {
    // random unit vector confined to axes 2..dim-1
    std::vector<double> v(cfg.dim, 0.0);
    double n = 0.0;
    for (std::size_t i = 2; i < cfg.dim; ++i) {
      v[i] = gauss(rng);
      n += v[i] * v[i];
    }
    n = std::sqrt(n);
    for (std::size_t i = 2; i < cfg.dim; ++i) v[i] /= n;
    return v;
  };
  auto normalize = [](std::vector<double> v) {
    double n = norm2(v);
    for (double& x : v) x /= n;
    return v;
  };

  SyntheticData out;
  out.vectors = EmbeddingStore(cfg.dim, "synthetic");

  std::vector<std::string> pos_words, neg_words;
  for (int i = 0; i < cfg.pairs; ++i) {
    auto r = noise_unit();
    std::vector<double> base(cfg.dim, 0.0);
    base[0] = 1.0;
    for (std::size_t k = 0; k < cfg.dim; ++k) base[k] += 0.25 * r[k];
    base = normalize(base);

    std::string pos = "good" + std::to_string(i);
    std::string neg = "bad" + std::to_string(i);
    out.vectors.insert(pos, base);
    std::vector<double> nv = base;
    nv[1] += 0.5;
    out.vectors.insert(neg, normalize(nv));
    pos_words.push_back(pos);
    neg_words.push_back(neg);

    for (int j = 0; j < cfg.decoys_per_pair; ++j) {
      auto g = noise_unit();
      std::vector<double> dv(cfg.dim, 0.0);
      for (std::size_t k = 0; k < cfg.dim; ++k)
        dv[k] = 0.55 * base[k] + 0.55 * g[k];
      out.vectors.insert("alt" + std::to_string(i) + "_" + std::to_string(j),
                         normalize(dv));
    }
  }

  std::vector<std::string> filler;
  for (int k = 0; k < cfg.fillers; ++k)
    filler.push_back("filler" + std::to_string(k));

  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> pick_pair(0, cfg.pairs - 1);
  std::uniform_int_distribution<int> pick_filler(0, cfg.fillers - 1);
  for (int d = 0; d < cfg.documents; ++d) {
    int label = coin(rng);
    const auto& bank = label == 1 ? pos_words : neg_words;
    std::vector<std::string> tokens;
    for (int s = 0; s < cfg.sentiment_per_doc; ++s)
      tokens.push_back(bank[pick_pair(rng)]);
    while (static_cast<int>(tokens.size()) < cfg.doc_length)
      tokens.push_back(filler[pick_filler(rng)]);
    std::shuffle(tokens.begin(), tokens.end(), rng);

    LabeledDocument doc;
    doc.id = std::to_string(d);
    doc.tokens = std::move(tokens);
    doc.raw_text = detokenize(doc.tokens);
    doc.gold_label = label;
    out.docs.push_back(std::move(doc));
  }
  return out;
}

inline void save_dataset_jsonl(const std::vector<LabeledDocument>& docs,
                               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write dataset: " + path);
  for (const auto& d : docs) {
    nlohmann::ordered_json j;
    j["text"] = d.raw_text;
    j["label"] = d.gold_label;
    out << j.dump() << '\n';
  }
}

}  // namespace wsa
