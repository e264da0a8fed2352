#include <doctest.h>

#include <map>

#include "generators.hpp"
#include "hmae/discovery.hpp"
#include "hmae/error.hpp"
#include "hmae/synth.hpp"
#include "log_capture.hpp"

using namespace hmae;

namespace {

/// Root plus one leaf per planted prototype track, background left out.
SegmentTree planted_tree(const VideoRecord& v, const PlantedVideo& planted) {
  std::map<int, std::vector<int>> tracks;
  std::vector<int> all;
  for (std::size_t i = 0; i < v.proposals.size(); ++i)
    if (planted.prototype[i] >= 0) {
      tracks[planted.prototype[i]].push_back(static_cast<int>(i));
      all.push_back(static_cast<int>(i));
    }
  SegmentTree t;
  t.video_id = v.video_id;
  t.num_frames = v.num_frames;
  t.nodes.push_back(make_segment(v, all, 0));
  t.parent.push_back(-1);
  for (const auto& [proto, members] : tracks) {
    t.nodes.push_back(make_segment(v, members, static_cast<int>(t.nodes.size())));
    t.parent.push_back(0);
  }
  t.validate();
  return t;
}

struct PlantedCorpus {
  SynthOutput synth;
  std::vector<SegmentTree> trees;
  std::vector<LabelId> actions;
};

PlantedCorpus planted_corpus(int classes, int videos, int maes, std::uint64_t seed) {
  RecognitionSynthConfig sc;
  sc.num_classes = classes;
  sc.videos_per_class = videos;
  sc.maes_per_class = maes;
  sc.split = Split::train;
  sc.seed = seed;
  PlantedCorpus c{generate_recognition_set(sc), {}, {}};
  for (const auto& v : c.synth.dataset.videos) {
    c.trees.push_back(planted_tree(v, *c.synth.metadata.find(v.video_id)));
    c.actions.push_back(*v.action_label);
  }
  return c;
}

double purity(const PlantedCorpus& c, const std::vector<SegmentRef>& members) {
  std::map<int, int> counts;
  for (const auto& m : members)
    for (const auto& t : c.trees)
      if (t.video_id == m.video_id)
        ++counts[planted_segment_id(*c.synth.metadata.find(m.video_id),
                                    t.nodes[static_cast<std::size_t>(m.node)].member_proposals)];
  int best = 0;
  for (const auto& [id, n] : counts) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(members.size());
}

}  // namespace

TEST_CASE("histogram intersection distance extremes") {
  const std::vector<double> a{0.2, 0.3, 0.5}, b{0.5, 0.5, 0.0}, c{0.0, 0.0, 1.0};
  CHECK(intersection_distance(a, a) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(intersection_distance(b, c) == 1.0);
}

TEST_CASE("initial clusters recover three planted prototype styles") {
  const auto c = planted_corpus(1, 20, 3, 5);
  std::size_t segments = 0;
  for (const auto& t : c.trees) segments += t.num_segments();
  REQUIRE(segments == 60);
  DiscoveryConfig cfg;
  cfg.init_clusters_per_action = 6;
  const auto clusters = init_clusters(c.trees, 0, cfg);
  CHECK(clusters.size() >= 3);
  for (const auto& cl : clusters) {
    CHECK(cl.members.size() >= 5);
    CHECK(cl.owner_action == 0);
    CHECK(purity(c, cl.members) >= 0.9);
  }
}

TEST_CASE("too few segments give no initial clusters") {
  const auto c = planted_corpus(1, 1, 2, 1);
  testing::LogCapture log;
  CHECK(init_clusters(c.trees, 0, DiscoveryConfig{}).empty());
  CHECK(log.contains("min_cluster_size"));
}

TEST_CASE("co-firing affinity") {
  SUBCASE("identical firing is maximal") {
    const auto a = cofiring_affinity({{2, 3}, {2, 3}, {}, {}});
    CHECK(a(0, 1) == 2.0);
    CHECK(a(0, 1) >= a(0, 2));
    CHECK(a(0, 1) >= a(1, 3));
  }
  SUBCASE("disjoint firing is zero") {
    const auto a = cofiring_affinity({{}, {}});
    CHECK(a(0, 1) == 0.0);
  }
  SUBCASE("symmetric with zero diagonal") {
    const auto a = cofiring_affinity({{1, 2}, {2}, {0}});
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a(i, i) == 0.0);
      for (std::size_t j = 0; j < 3; ++j) CHECK(a(i, j) == a(j, i));
    }
  }
}

TEST_CASE("discriminative merge recovers two planted MAEs per action") {
  const auto c = planted_corpus(2, 20, 2, 9);
  DiscoveryConfig cfg;
  cfg.init_clusters_per_action = 6;
  cfg.final_maes_per_action = 2;
  const auto actions = c.synth.dataset.labels.actions;
  const auto vocab = discover_maes(c.trees, c.actions, actions, cfg);
  for (LabelId y = 0; y < 2; ++y) {
    const auto own = vocab.maes_of(y);
    CHECK(own.size() == 2);
    for (LabelId h : own) CHECK(purity(c, vocab.clusters[static_cast<std::size_t>(h)].members) >= 0.9);
  }
  std::set<LabelId> seen;
  for (LabelId y = 0; y < 2; ++y)
    for (LabelId h : vocab.maes_of(y)) CHECK(seen.insert(h).second);
  CHECK(seen.size() == vocab.size());
  CHECK(discover_maes(c.trees, c.actions, actions, cfg) == vocab);
  CHECK(inclusivity_coverage(vocab, c.trees, c.actions) > 0.5);
}

TEST_CASE("an action with a single initial cluster keeps it as its MAE") {
  const auto c = planted_corpus(2, 8, 1, 2);
  DiscoveryConfig cfg;
  cfg.init_clusters_per_action = 1;
  const auto vocab = discover_maes(c.trees, c.actions, c.synth.dataset.labels.actions, cfg);
  CHECK(vocab.maes_of(0).size() == 1);
  CHECK(vocab.maes_of(1).size() == 1);
}

TEST_CASE("MAE scores") {
  const auto c = planted_corpus(2, 10, 2, 4);
  DiscoveryConfig cfg;
  cfg.init_clusters_per_action = 4;
  cfg.final_maes_per_action = 2;
  auto vocab = discover_maes(c.trees, c.actions, c.synth.dataset.labels.actions, cfg);

  SUBCASE("shape is segments by MAEs") {
    for (const auto& t : c.trees) {
      const auto s = assign_mae_scores(vocab, t);
      CHECK(s.num_segments() == t.num_segments());
      CHECK(s.num_maes() == vocab.size());
    }
  }
  SUBCASE("training positives score positive") {
    for (const auto& cl : vocab.clusters)
      for (const auto& m : cl.members)
        for (const auto& t : c.trees)
          if (t.video_id == m.video_id) CHECK(assign_mae_scores(vocab, t)(m.node, cl.mae_id) > 0.0);
  }
  SUBCASE("zero weights give the bias") {
    for (auto& cl : vocab.clusters) {
      std::fill(cl.classifier.weights.begin(), cl.classifier.weights.end(), 0.0);
      cl.classifier.bias = 0.25;
    }
    const auto s = assign_mae_scores(vocab, c.trees[0]);
    for (int i = 1; i <= static_cast<int>(s.num_segments()); ++i)
      for (LabelId h = 0; h < static_cast<LabelId>(s.num_maes()); ++h) CHECK(s(i, h) == 0.25);
  }
  SUBCASE("dimension mismatch is an error") {
    vocab.clusters[0].classifier.weights.push_back(1.0);
    CHECK_THROWS_AS(assign_mae_scores(vocab, c.trees[0]), ValidationError);
  }
}

TEST_CASE("duration feature extends the classifier input") {
  testing::Rng rng(3);
  const auto t = testing::random_tree(rng, 3, 4);
  MAEVocabulary v;
  v.feature_dim = 4;
  CHECK(scoring_features(v, t, 1).size() == 4);
  v.duration_feature = true;
  const auto f = scoring_features(v, t, 1);
  REQUIRE(f.size() == 5);
  CHECK(f[4] == static_cast<double>(t.nodes[1].time_span.end - t.nodes[1].time_span.start + 1) / 32.0);
  MAEVocabulary w = v;
  w.duration_feature = false;
  CHECK(v.hash() != w.hash());
}

TEST_CASE("discovery config validation") {
  DiscoveryConfig cfg;
  cfg.min_cluster_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
