#include <doctest.h>

#include <chrono>

#include "generators.hpp"
#include "hmae/error.hpp"
#include "hmae/inference.hpp"
#include "hmae/synth.hpp"
#include "log_capture.hpp"

using namespace hmae;

namespace {

struct Instance {
  SegmentTree tree;
  ModelParams params;
  ScoreTable scores;
  int classes = 0;
};

Instance random_instance(testing::Rng& rng) {
  Instance in;
  in.classes = testing::uniform_int(rng, 1, 3);
  const int per = testing::uniform_int(rng, 1, 4);
  in.tree = testing::random_tree(rng, testing::uniform_int(rng, 0, 7), 3);
  in.params = testing::random_recognition_params(rng, in.classes, per, 3);
  in.scores = testing::random_scores(rng, in.tree, static_cast<std::size_t>(in.classes * per));
  return in;
}

void check_same(const InferenceResult& a, const InferenceResult& b) {
  CHECK(a.labeling == b.labeling);
  CHECK(std::abs(a.score - b.score) <= 1e-9);
}

}  // namespace

TEST_CASE("zero model ties go to the first action and lowest MAE") {
  testing::Rng rng(1);
  const auto t = testing::random_tree(rng, 4, 3);
  const auto p = ModelParams::recognition({0, 0, 1, 1}, 2, 3);
  const auto r = infer(p, t, testing::random_scores(rng, t, 4));
  CHECK(r.labeling.action == 0);
  for (std::size_t i = 1; i < t.nodes.size(); ++i) CHECK(r.labeling.node_labels[i] == 0);
  CHECK(r.score == 0.0);
}

TEST_CASE("dominant root term decides the action") {
  testing::Rng rng(2);
  const auto t = testing::random_tree(rng, 4, 3);
  auto p = ModelParams::recognition({0, 1, 2}, 3, 3);
  for (std::size_t d = 0; d < 3; ++d) p.w[p.layout.eta(2) + d] = 10.0;
  CHECK(infer(p, t, testing::random_scores(rng, t, 3)).labeling.action == 2);
}

TEST_CASE("infer matches both exhaustive enumerations") {
  testing::Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng);
    const auto r = infer(in.params, in.tree, in.scores);
    check_same(r, brute_force_map(in.params, in.tree, in.scores));
    check_same(r, testing::reference_map(in.params, in.tree, in.scores));
    CHECK(r.score == score(in.params, in.tree, in.scores, r.labeling));

    const LabelId y = testing::uniform_int(rng, 0, in.classes - 1);
    const auto aug = infer_loss_augmented_recognition(in.params, in.tree, in.scores, y);
    check_same(aug, brute_force_map(in.params, in.tree, in.scores, {y, std::nullopt}));
    check_same(aug, testing::reference_map(in.params, in.tree, in.scores, y));
    CHECK(aug.score >= r.score);
  }
}

TEST_CASE("infer dominates random feasible labelings") {
  testing::Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(rng);
    const double best = infer(in.params, in.tree, in.scores).score;
    for (int k = 0; k < 1000; ++k) {
      const auto l = testing::random_feasible_labeling(rng, in.params, in.tree, static_cast<std::size_t>(in.classes));
      CHECK(score(in.params, in.tree, in.scores, l) <= best);
    }
  }
}

TEST_CASE("loss-augmented recognition") {
  testing::Rng rng(3);
  const auto t = testing::random_tree(rng, 3, 3);
  auto p = ModelParams::recognition({0, 1}, 2, 3);
  const auto s = testing::random_scores(rng, t, 2);
  SUBCASE("zero model prefers a wrong action") {
    const auto r = infer_loss_augmented_recognition(p, t, s, 0);
    CHECK(r.labeling.action == 1);
    CHECK(r.score == 1.0);
  }
  SUBCASE("a margin above one keeps the true action") {
    for (std::size_t d = 0; d < 3; ++d) p.w[p.layout.eta(0) + d] = 5.0;
    CHECK(infer_loss_augmented_recognition(p, t, s, 0).labeling.action == 0);
  }
  SUBCASE("out-of-range truth") { CHECK_THROWS_AS(infer_loss_augmented_recognition(p, t, s, 2), ValidationError); }
}

TEST_CASE("parsing inference matches exhaustive enumeration") {
  testing::Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t labels = static_cast<std::size_t>(testing::uniform_int(rng, 1, 4));
    const auto t = testing::random_tree(rng, testing::uniform_int(rng, 0, 6), 3);
    const auto p = testing::random_parsing_params(rng, labels);
    const auto s = testing::random_scores(rng, t, labels);
    const auto plain = infer_parsing(p, t, s);
    check_same(plain, brute_force_map(p, t, s));
    check_same(plain, testing::reference_map(p, t, s));

    std::vector<LabelId> z(t.nodes.size(), -1);
    for (std::size_t i = 1; i < z.size(); ++i) z[i] = testing::uniform_int(rng, 0, static_cast<int>(labels) - 1);
    const auto aug = infer_loss_augmented_parsing(p, t, s, z);
    check_same(aug, brute_force_map(p, t, s, {std::nullopt, z}));
    check_same(aug, testing::reference_map(p, t, s, std::nullopt, &z));
    CHECK(aug.score >= plain.score);
  }
}

TEST_CASE("loss-augmented parsing extremes") {
  testing::Rng rng(4);
  const auto t = testing::random_tree(rng, 5, 3);
  auto p = ModelParams::parsing(3);
  const auto s = testing::random_scores(rng, t, 3);
  std::vector<LabelId> z(t.nodes.size(), 1);
  z[0] = -1;
  SUBCASE("zero model gets every node wrong") {
    const auto r = infer_loss_augmented_parsing(p, t, s, z);
    CHECK(r.score == doctest::Approx(1.0));
    CHECK(parsing_loss(z, r.labeling.node_labels) == 1.0);
  }
  SUBCASE("strong correct unaries recover the truth") {
    p.w[p.layout.alpha(1) + 1] = 10.0;
    const auto r = infer_loss_augmented_parsing(p, t, s, z);
    CHECK(r.labeling.node_labels == z);
    CHECK(r.score == doctest::Approx(infer_parsing(p, t, s).score));
  }
  SUBCASE("missing annotation") {
    z[1] = -1;
    CHECK_THROWS_AS(infer_loss_augmented_parsing(p, t, s, z), ValidationError);
  }
}

TEST_CASE("an action without MAEs is scored by its root term") {
  testing::Rng rng(9);
  const auto t = testing::random_tree(rng, 3, 3);
  auto p = ModelParams::recognition({0}, 2, 3);
  for (std::size_t d = 0; d < 3; ++d) p.w[p.layout.eta(1) + d] = 3.0;
  testing::LogCapture log;
  const auto r = infer(p, t, testing::random_scores(rng, t, 1));
  CHECK(r.labeling.action == 1);
  CHECK(r.score == doctest::Approx(3.0));
  CHECK(log.contains("no MAEs"));
}

TEST_CASE("generic max-sum with a pairwise term matches enumeration") {
  testing::Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = testing::uniform_int(rng, 1, 6);
    std::vector<int> parent(static_cast<std::size_t>(n), -1);
    for (int i = 1; i < n; ++i) parent[static_cast<std::size_t>(i)] = testing::uniform_int(rng, 0, i - 1);
    const std::size_t k = 3;
    std::vector<std::vector<double>> unary(static_cast<std::size_t>(n), std::vector<double>(k));
    for (auto& u : unary)
      for (auto& x : u) x = testing::uniform(rng, -1, 1);
    std::vector<double> table(static_cast<std::size_t>(n) * k * k);
    for (auto& x : table) x = testing::uniform(rng, -1, 1);
    const PairwiseFn pair = [&](std::size_t i, std::size_t s, std::size_t sp) { return table[(i * k + s) * k + sp]; };
    auto total = [&](const std::vector<std::size_t>& st) {
      double v = 0.0;
      for (std::size_t i = 0; i < st.size(); ++i) {
        v += unary[i][st[i]];
        if (i > 0) v += pair(i, st[i], st[static_cast<std::size_t>(parent[i])]);
      }
      return v;
    };
    double best = -1e300;
    std::vector<std::size_t> st(static_cast<std::size_t>(n), 0);
    for (std::size_t code = 0; code < static_cast<std::size_t>(std::pow(3, n)); ++code) {
      std::size_t c = code;
      for (auto& x : st) {
        x = c % k;
        c /= k;
      }
      best = std::max(best, total(st));
    }
    CHECK(total(max_sum_tree(parent, unary, pair)) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("inference time grows linearly with the tree") {
  testing::Rng rng(5);
  auto time_for = [&](int segments) {
    const auto t = testing::random_tree(rng, segments, 8);
    const auto p = testing::random_recognition_params(rng, 4, 8, 8);
    const auto s = testing::random_scores(rng, t, 32);
    double best = 1e300;
    for (int trial = 0; trial < 7; ++trial) {
      const auto start = std::chrono::steady_clock::now();
      for (int rep = 0; rep < 5; ++rep) infer(p, t, s);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
  };
  time_for(200);
  const double small = time_for(1000), large = time_for(2000);
  CHECK(large <= 3.0 * small);
}

TEST_CASE("brute force refuses oversized problems") {
  testing::Rng rng(6);
  const auto t = testing::random_tree(rng, 12, 3);
  const auto p = ModelParams::recognition(std::vector<LabelId>(6, 0), 1, 3);
  CHECK_THROWS_AS(brute_force_map(p, t, testing::random_scores(rng, t, 6)), ValidationError);
}

TEST_CASE("brute force on one node enumerates every pair") {
  testing::Rng rng(7);
  const auto t = testing::random_tree(rng, 1, 3);
  const auto p = testing::random_recognition_params(rng, 2, 2, 3);
  const auto s = testing::random_scores(rng, t, 4);
  double best = -1e300;
  for (LabelId y = 0; y < 2; ++y)
    for (LabelId h = 2 * y; h < 2 * y + 2; ++h) best = std::max(best, score(p, t, s, Labeling{y, {-1, h}}));
  CHECK(brute_force_map(p, t, s).score == best);
}
