#include "hmae/discovery.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "hmae/error.hpp"
#include "hmae/log.hpp"
#include "hmae/spectral.hpp"
#include "hmae/util.hpp"

namespace hmae {

void DiscoveryConfig::validate() const {
  if (init_clusters_per_action <= 0) throw ValidationError("init_clusters_per_action must be positive");
  if (min_cluster_size < 2) throw ValidationError("min_cluster_size must be >= 2");
  if (top_k_detections <= 0) throw ValidationError("top_k_detections must be positive");
  if (final_maes_per_action && *final_maes_per_action <= 0)
    throw ValidationError("final_maes_per_action must be positive");
  if (max_negative_ratio <= 0) throw ValidationError("max_negative_ratio must be positive");
  if (!(svm_c > 0.0)) throw ValidationError("svm_c must be > 0");
  if (svm_epochs <= 0) throw ValidationError("svm_epochs must be positive");
}

std::vector<LabelId> MAEVocabulary::maes_of(LabelId action) const {
  std::vector<LabelId> out;
  for (const auto& c : clusters)
    if (c.owner_action == action) out.push_back(c.mae_id);
  return out;
}

LabelSpaces MAEVocabulary::label_spaces() const {
  LabelSpaces s;
  s.actions = actions;
  s.maes = maes;
  for (const auto& c : clusters) s.mae_owner.push_back(c.owner_action);
  return s;
}

std::uint64_t MAEVocabulary::fingerprint() const {
  std::string text;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g,", v);
    text += buf;
  };
  text += "actions:";
  for (const auto& a : actions.names()) text += a + ";";
  text += "dim:" + std::to_string(feature_dim) + ";";
  if (duration_feature) text += "duration;";
  for (const auto& c : clusters) {
    text += "mae:" + maes.name(c.mae_id) + ":" + std::to_string(c.owner_action) + ":";
    for (double w : c.classifier.weights) num(w);
    num(c.classifier.bias);
    num(c.classifier.c);
    text += ";";
  }
  return fnv1a64(text);
}

std::string MAEVocabulary::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fingerprint());
  return buf;
}

double intersection_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::min(a[i], b[i]);
  return 1.0 - s;
}

double spatial_distance(const SpatioTemporalSegment& a, const SpatioTemporalSegment& b) {
  const double dx = a.mean_bbox.center_x() - b.mean_bbox.center_x();
  const double dy = a.mean_bbox.center_y() - b.mean_bbox.center_y();
  const double dh = a.mean_bbox.h - b.mean_bbox.h;
  const double dw = a.mean_bbox.w - b.mean_bbox.w;
  return std::sqrt(dx * dx + dy * dy + dh * dh + dw * dw);
}

std::vector<MaeCluster> init_clusters(std::span<const SegmentTree> trees, LabelId action,
                                      const DiscoveryConfig& cfg) {
  cfg.validate();
  struct Item {
    const SpatioTemporalSegment* seg;
    SegmentRef ref;
  };
  std::vector<Item> items;
  for (const auto& t : trees)
    for (std::size_t i = 1; i < t.nodes.size(); ++i) items.push_back({&t.nodes[i], {t.video_id, static_cast<int>(i)}});

  const std::size_t n = items.size();
  if (n < static_cast<std::size_t>(cfg.min_cluster_size)) {
    logger()->warn("action {}: only {} segments, fewer than min_cluster_size {}", action, n, cfg.min_cluster_size);
    return {};
  }
  SymMatrix aff(n);
  for (std::size_t i = 0; i < n; ++i) {
    aff.set(i, i, 1.0);
    for (std::size_t j = i + 1; j < n; ++j)
      aff.set(i, j, std::exp(-intersection_distance(items[i].seg->bow, items[j].seg->bow) -
                             spatial_distance(*items[i].seg, *items[j].seg)));
  }
  const int k = std::min(cfg.init_clusters_per_action, static_cast<int>(n));
  const auto labels = spectral_cluster(aff, k, mix_seed(cfg.seed, 0x100 + static_cast<std::uint64_t>(action)));

  std::vector<MaeCluster> groups(static_cast<std::size_t>(count_clusters(labels)));
  for (std::size_t i = 0; i < n; ++i) groups[static_cast<std::size_t>(labels[i])].members.push_back(items[i].ref);
  std::vector<MaeCluster> out;
  for (auto& g : groups) {
    if (g.members.size() < static_cast<std::size_t>(cfg.min_cluster_size)) continue;
    g.owner_action = action;
    std::sort(g.members.begin(), g.members.end());
    out.push_back(std::move(g));
  }
  return out;
}

SymMatrix cofiring_affinity(const std::vector<std::vector<int>>& fired) {
  const std::size_t m = fired.size();
  std::vector<std::set<int>> sets(m);
  for (std::size_t i = 0; i < m; ++i) {
    sets[i].insert(fired[i].begin(), fired[i].end());
    sets[i].insert(static_cast<int>(i));
  }
  SymMatrix aff(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      std::size_t both = 0;
      for (int c : sets[i]) both += sets[j].count(c);
      aff.set(i, j, static_cast<double>(both));
    }
  return aff;
}

namespace {

class SegmentIndex {
 public:
  SegmentIndex(std::span<const SegmentTree> trees, std::span<const LabelId> actions) : trees_(trees) {
    if (trees.size() != actions.size()) throw ValidationError("discovery: one action label per tree required");
    for (std::size_t t = 0; t < trees.size(); ++t) {
      if (!by_id_.emplace(trees[t].video_id, t).second)
        throw ValidationError("discovery: duplicate tree for video '" + trees[t].video_id + "'");
      for (std::size_t i = 1; i < trees[t].nodes.size(); ++i)
        all_.push_back({&trees[t].nodes[i].bow, actions[t]});
    }
  }

  const std::vector<double>& bow(const SegmentRef& ref) const {
    auto it = by_id_.find(ref.video_id);
    if (it == by_id_.end()) throw ValidationError("discovery: no tree for video '" + ref.video_id + "'");
    const auto& t = trees_[it->second];
    if (ref.node <= 0 || static_cast<std::size_t>(ref.node) >= t.nodes.size())
      throw ValidationError("discovery: node " + std::to_string(ref.node) + " out of range in '" + ref.video_id + "'");
    return t.nodes[static_cast<std::size_t>(ref.node)].bow;
  }

  std::vector<const std::vector<double>*> negatives_for(LabelId action) const {
    std::vector<const std::vector<double>*> out;
    for (const auto& s : all_)
      if (s.action != action) out.push_back(s.bow);
    return out;
  }

 private:
  struct Entry {
    const std::vector<double>* bow;
    LabelId action;
  };
  std::span<const SegmentTree> trees_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<Entry> all_;
};

LinearSvmModel train_cluster(const SegmentIndex& index, const std::vector<SegmentRef>& members,
                             const std::vector<const std::vector<double>*>& negatives,
                             const DiscoveryConfig& cfg, std::uint64_t seed) {
  if (negatives.empty()) throw ValidationError("discovery needs segments from at least two action classes");
  std::vector<std::vector<double>> pos, neg;
  for (const auto& r : members) pos.push_back(index.bow(r));
  std::vector<std::size_t> pick(negatives.size());
  std::iota(pick.begin(), pick.end(), 0);
  const std::size_t cap = pos.size() * static_cast<std::size_t>(cfg.max_negative_ratio);
  std::mt19937_64 rng(seed);
  if (pick.size() > cap) {
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(cap);
    std::sort(pick.begin(), pick.end());
  }
  for (auto i : pick) neg.push_back(*negatives[i]);
  return train_linear_svm(pos, neg, cfg.svm_c, cfg.svm_epochs, rng());
}

// Clusters reached by the top-K detections of classifier i among the members
// of the other clusters.
std::vector<std::vector<int>> top_k_firing(const SegmentIndex& index, const std::vector<MaeCluster>& clusters,
                                           int top_k) {
  struct Candidate {
    int cluster;
    const std::vector<double>* bow;
  };
  std::vector<Candidate> pool;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (const auto& r : clusters[c].members) pool.push_back({static_cast<int>(c), &index.bow(r)});

  std::vector<std::vector<int>> fired(clusters.size());
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t s = 0; s < pool.size(); ++s)
      if (pool[s].cluster != static_cast<int>(i)) scored.emplace_back(svm_score(clusters[i].classifier, *pool[s].bow), s);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::set<int> hit;
    for (std::size_t r = 0; r < scored.size() && r < static_cast<std::size_t>(top_k); ++r)
      hit.insert(pool[scored[r].second].cluster);
    fired[i].assign(hit.begin(), hit.end());
  }
  return fired;
}

}  // namespace

MAEVocabulary discriminative_merge(const std::vector<std::vector<MaeCluster>>& init, const LabelTable& actions,
                                   std::span<const SegmentTree> trees, std::span<const LabelId> tree_actions,
                                   const DiscoveryConfig& cfg) {
  cfg.validate();
  if (init.size() != actions.size()) throw ValidationError("discriminative_merge: one cluster list per action required");
  const SegmentIndex index(trees, tree_actions);
  std::vector<std::vector<const std::vector<double>*>> negatives(actions.size());
  for (std::size_t a = 0; a < actions.size(); ++a) negatives[a] = index.negatives_for(static_cast<LabelId>(a));

  // Stage 1: one classifier per initial cluster.
  std::vector<std::vector<MaeCluster>> work = init;
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t a = 0; a < work.size(); ++a)
    for (std::size_t c = 0; c < work[a].size(); ++c) jobs.emplace_back(a, c);
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t j) {
    const auto [a, c] = jobs[j];
    work[a][c].classifier =
        train_cluster(index, work[a][c].members, negatives[a], cfg, mix_seed(cfg.seed, 0x10000 * (a + 1) + c));
  });

  // Stage 2: group clusters by co-firing, per action.
  std::vector<std::vector<std::vector<SegmentRef>>> merged(work.size());
  for (std::size_t a = 0; a < work.size(); ++a) {
    const auto& cl = work[a];
    if (cl.empty()) {
      logger()->warn("action '{}' has no initial clusters and gets no MAEs", actions.name(static_cast<LabelId>(a)));
      continue;
    }
    if (cl.size() == 1) {
      merged[a].push_back(cl[0].members);
      continue;
    }
    const auto m = static_cast<int>(cl.size());
    int k = cfg.final_maes_per_action.value_or((m + 2) / 3);
    k = std::clamp(k, 1, m);
    const auto aff = cofiring_affinity(top_k_firing(index, cl, cfg.top_k_detections));
    const auto labels = spectral_cluster(aff, k, mix_seed(cfg.seed, 0x200 + a));
    std::vector<std::vector<SegmentRef>> groups(static_cast<std::size_t>(count_clusters(labels)));
    for (std::size_t c = 0; c < cl.size(); ++c) {
      auto& g = groups[static_cast<std::size_t>(labels[c])];
      g.insert(g.end(), cl[c].members.begin(), cl[c].members.end());
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    merged[a] = std::move(groups);
  }

  // Stage 3: one retrained classifier per final MAE.
  MAEVocabulary vocab;
  vocab.actions = actions;
  if (!trees.empty() && trees.front().nodes.size() > 0) vocab.feature_dim = trees.front().nodes[0].bow.size();
  for (std::size_t a = 0; a < merged.size(); ++a)
    for (std::size_t g = 0; g < merged[a].size(); ++g) {
      MaeCluster c;
      c.mae_id = vocab.maes.intern(actions.name(static_cast<LabelId>(a)) + "/mae" + std::to_string(g));
      c.owner_action = static_cast<LabelId>(a);
      c.members = std::move(merged[a][g]);
      vocab.clusters.push_back(std::move(c));
    }
  parallel_for(vocab.clusters.size(), cfg.jobs, [&](std::size_t h) {
    auto& c = vocab.clusters[h];
    c.classifier = train_cluster(index, c.members, negatives[static_cast<std::size_t>(c.owner_action)], cfg,
                                 mix_seed(cfg.seed ^ 0xf1a1, h));
  });
  return vocab;
}

MAEVocabulary discover_maes(std::span<const SegmentTree> trees, std::span<const LabelId> tree_actions,
                            const LabelTable& actions, const DiscoveryConfig& cfg) {
  cfg.validate();
  if (trees.size() != tree_actions.size()) throw ValidationError("discover_maes: one action label per tree required");
  if (trees.empty()) throw ValidationError("discover_maes: no training trees");
  std::vector<std::vector<MaeCluster>> init(actions.size());
  parallel_for(actions.size(), cfg.jobs, [&](std::size_t a) {
    std::vector<SegmentTree> mine;
    for (std::size_t t = 0; t < trees.size(); ++t)
      if (tree_actions[t] == static_cast<LabelId>(a)) mine.push_back(trees[t]);
    init[a] = init_clusters(mine, static_cast<LabelId>(a), cfg);
  });
  return discriminative_merge(init, actions, trees, tree_actions, cfg);
}

std::vector<double> scoring_features(const MAEVocabulary& vocab, const SegmentTree& tree, int node) {
  const auto& n = tree.nodes.at(static_cast<std::size_t>(node));
  auto x = n.bow;
  if (vocab.duration_feature) x.push_back((n.time_span.end - n.time_span.start + 1) / 32.0);
  return x;
}

ScoreTable assign_mae_scores(const MAEVocabulary& vocab, const SegmentTree& tree) {
  ScoreTable table(tree.num_segments(), vocab.size());
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const auto x = scoring_features(vocab, tree, static_cast<int>(i));
    for (std::size_t h = 0; h < vocab.size(); ++h)
      table(static_cast<int>(i), static_cast<LabelId>(h)) = svm_score(vocab.clusters[h].classifier, x);
  }
  return table;
}

std::vector<LabelId> training_mae_assignment(const MAEVocabulary& vocab, const SegmentTree& tree,
                                             const ScoreTable& scores, LabelId action) {
  const auto own = vocab.maes_of(action);
  if (own.empty())
    throw ValidationError("action '" + vocab.actions.name(action) + "' has no MAEs to assign in '" + tree.video_id + "'");
  std::vector<LabelId> out(tree.nodes.size(), -1);
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const SegmentRef ref{tree.video_id, static_cast<int>(i)};
    LabelId pick = -1;
    for (LabelId h : own) {
      const auto& m = vocab.clusters[static_cast<std::size_t>(h)].members;
      if (std::binary_search(m.begin(), m.end(), ref)) {
        pick = h;
        break;
      }
    }
    if (pick < 0) {
      pick = own.front();
      for (LabelId h : own)
        if (scores(static_cast<int>(i), h) > scores(static_cast<int>(i), pick)) pick = h;
    }
    out[i] = pick;
  }
  return out;
}

double inclusivity_coverage(const MAEVocabulary& vocab, std::span<const SegmentTree> trees,
                            std::span<const LabelId> tree_actions) {
  const SegmentIndex index(trees, tree_actions);
  std::size_t total = 0, covered = 0;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto own = vocab.maes_of(tree_actions[t]);
    for (std::size_t i = 1; i < trees[t].nodes.size(); ++i) {
      ++total;
      bool hit = false;
      for (LabelId h : own) {
        for (const auto& r : vocab.clusters[static_cast<std::size_t>(h)].members)
          if (intersection_distance(trees[t].nodes[i].bow, index.bow(r)) <= 0.5) {
            hit = true;
            break;
          }
        if (hit) break;
      }
      covered += hit ? 1 : 0;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace hmae
