#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "wsa/ledger.hpp"
#include "wsa/session.hpp"
#include "wsa/surrogate.hpp"

using namespace wsa;

static Prediction pred(int label, double p1) {
  Prediction p;
  p.scores = {1.0 - p1, p1};
  p.label = label;
  return p;
}

TEST_CASE("embedding encoding is the mean over in-vocabulary tokens") {
  auto store = wsatest::abc_store();
  auto v = encode_query_embedding({"a", "c"}, store);
  CHECK(v == std::vector<double>{0.5, 0.5});
  CHECK(encode_query_embedding({"a", "a"}, store) == std::vector<double>{1.0, 0.0});
  CHECK(encode_query_embedding({"a", "zzz"}, store) ==
        std::vector<double>{1.0, 0.0});  // OOV token skipped
  CHECK_THROWS_AS(encode_query_embedding({"zzz", "qqq"}, store), degenerate_error);
}

TEST_CASE("bag-of-words encoding is binary presence over the vocabulary") {
  std::map<std::string, std::size_t> vocab{{"a", 0}, {"b", 1}, {"c", 2}};
  CHECK(encode_query_bow({"c", "a", "a"}, vocab) ==
        std::vector<double>{1.0, 0.0, 1.0});
  CHECK(encode_query_bow({"zzz"}, vocab) == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const std::size_t n = 30, d = 6;
  const double l2 = 1e-4;
  for (int point = 0; point < 10; ++point) {
    std::vector<std::vector<double>> X(n, std::vector<double>(d));
    std::vector<double> y(n);
    for (auto& row : X)
      for (auto& x : row) x = g(rng);
    for (auto& yi : y) yi = (g(rng) > 0) ? 1.0 : 0.0;
    std::vector<double> w(d);
    for (auto& wi : w) wi = g(rng);
    double b = g(rng);

    std::vector<double> grad_w;
    double grad_b;
    logreg_gradient(X, y, w, b, l2, grad_w, grad_b);

    const double h = 1e-6;
    for (std::size_t k = 0; k < d; ++k) {
      auto wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      double fd = (logreg_loss(X, y, wp, b, l2) - logreg_loss(X, y, wm, b, l2)) / (2 * h);
      CHECK(std::abs(grad_w[k] - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
    }
    double fd_b = (logreg_loss(X, y, w, b + h, l2) - logreg_loss(X, y, w, b - h, l2)) / (2 * h);
    CHECK(std::abs(grad_b - fd_b) / std::max(1.0, std::abs(fd_b)) < 1e-5);
  }
}

// Ledger where every flipped query contains the planted token "bad" and
// every unflipped query does not; "bad" sits far from the rest of the
// vocabulary in embedding space.
struct SeparableFixture {
  EmbeddingStore store{2, "fix"};
  QueryLedger ledger;
  std::vector<std::string> other_words;

  SeparableFixture() {
    store.insert("bad", std::vector<double>{1.0, 0.0});
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    for (int i = 0; i < 10; ++i) {
      std::string w = "x" + std::to_string(i);
      store.insert(w, std::vector<double>{u(rng), 1.0 + u(rng)});
      other_words.push_back(w);
    }
    std::uniform_int_distribution<std::size_t> pick(0, other_words.size() - 1);
    for (int i = 0; i < 40; ++i) {
      std::vector<std::string> flip_tokens{"bad", other_words[pick(rng)],
                                           other_words[pick(rng)]};
      ledger.record_query("d" + std::to_string(i), flip_tokens, {0}, pred(1, 0.6), 0);
      std::vector<std::string> keep_tokens{other_words[pick(rng)],
                                           other_words[pick(rng)],
                                           other_words[pick(rng)]};
      ledger.record_query("d" + std::to_string(i), keep_tokens, {0}, pred(0, 0.3), 0);
    }
  }
};

TEST_CASE("separable ledger ranks the planted token first") {
  SeparableFixture fix;
  auto ranker = train_surrogate(fix.ledger, &fix.store);
  REQUIRE(ranker.usable());
  double bad = ranker.word_score("bad");
  for (const auto& w : fix.other_words) CHECK(bad > ranker.word_score(w));

  LabeledDocument doc{"q", "", {"x0", "x1", "x2", "bad", "x3"}, 0};
  auto ranking = ranker.rank_words(doc.tokens, {});
  REQUIRE_FALSE(ranking.empty());
  CHECK(ranking[0].position == 3);
  CHECK(ranking[0].word == "bad");
}

TEST_CASE("below-threshold or single-class ledgers are not usable") {
  SeparableFixture fix;
  SurrogateConfig cfg;
  cfg.min_train = 500;
  CHECK_FALSE(train_surrogate(fix.ledger, &fix.store, cfg).usable());

  QueryLedger one_class;
  auto store = wsatest::abc_store();
  for (int i = 0; i < 60; ++i)
    one_class.record_query("d", {"a"}, {}, pred(0, 0.5), 0);  // never flips
  CHECK_FALSE(train_surrogate(one_class, &store).usable());
}

TEST_CASE("word_score defaults and dot-product semantics") {
  SeparableFixture fix;
  SurrogateConfig bow;
  bow.mode = EncodingMode::bag_of_words;
  auto ranker = train_surrogate(fix.ledger, nullptr, bow);
  REQUIRE(ranker.usable());
  CHECK(ranker.word_score("never-seen-token") == 0.0);
  double bad = ranker.word_score("bad");
  for (const auto& w : fix.other_words) CHECK(bad > ranker.word_score(w));
}

TEST_CASE("training is deterministic and loss is monotone") {
  SeparableFixture fix;
  auto a = train_surrogate(fix.ledger, &fix.store);
  auto b = train_surrogate(fix.ledger, &fix.store);
  CHECK(a.weights() == b.weights());
  CHECK(a.bias() == b.bias());
  const auto& loss = a.loss_history();
  REQUIRE(loss.size() > 1);
  for (std::size_t i = 1; i < loss.size(); ++i) CHECK(loss[i] <= loss[i - 1] + 1e-12);
}

TEST_CASE("ranking order is invariant under positive affine score transforms") {
  SeparableFixture fix;
  auto ranker = train_surrogate(fix.ledger, &fix.store);
  std::vector<std::string> doc{"x3", "bad", "x7", "x1"};
  auto base = ranker.rank_words(doc, {});

  nlohmann::json j = ranker.to_json();
  for (auto& w : j["weights"]) w = w.get<double>() * 3.5;
  auto scaled = SurrogateRanker::from_json(j, &fix.store);
  auto again = scaled.rank_words(doc, {});
  REQUIRE(base.size() == again.size());
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(base[i].position == again[i].position);
}

TEST_CASE("equal scores tie-break by ascending position") {
  SurrogateRanker untrained;  // all scores 0.0
  auto ranking = untrained.rank_words({"b", "a", "c"}, {});
  REQUIRE(ranking.size() == 3);
  CHECK(ranking[0].position == 0);
  CHECK(ranking[1].position == 1);
  CHECK(ranking[2].position == 2);
}

TEST_CASE("ranker persistence round-trips scores") {
  SeparableFixture fix;
  auto ranker = train_surrogate(fix.ledger, &fix.store);
  auto back = SurrogateRanker::from_json(ranker.to_json(), &fix.store);
  CHECK(back.word_score("bad") == ranker.word_score("bad"));
  CHECK(back.trained_on() == ranker.trained_on());
}

TEST_CASE("deletion ranking costs one query per non-stoplist token") {
  wsatest::TokenWeightTarget target;
  target.weights["wonderful"] = 3.0;
  target.weights["fine"] = 0.5;
  target.bias = -1.0;
  QueryLedger ledger;
  LabeledDocument doc{"d", "", {"the", "film", "was", "wonderful", "and",
                                "fine", "acting", "too"}, 1};
  // stoplist covers "the", "was", "and", "too" -> but only pass 2 of them
  std::set<std::string> stoplist{"the", "and"};
  auto orig = target.predict(doc.tokens);
  AttackSession session(target, ledger, doc, orig.label, 1000);
  auto ranking = rank_words_deletion(session, orig.scores[orig.label], stoplist);
  CHECK(ledger.size() == 6);  // 8 tokens, 2 stoplisted
  REQUIRE(ranking.size() == 6);
  // the keyword position carries the strictly largest score
  CHECK(ranking[0].word == "wonderful");
  for (std::size_t i = 1; i < ranking.size(); ++i)
    CHECK(ranking[0].score > ranking[i].score);
  // deleting a token the target ignores scores ~0
  for (const auto& ws : ranking)
    if (ws.word == "film") CHECK(std::abs(ws.score) < 1e-12);
}

TEST_CASE("all-stoplisted documents rank to nothing") {
  SurrogateRanker untrained;
  CHECK(untrained.rank_words({"the", "and"}, {"the", "and"}).empty());
}
