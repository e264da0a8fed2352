#include "hmae/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "hmae/error.hpp"
#include "hmae/log.hpp"
#include "hmae/spectral.hpp"
#include "hmae/svm.hpp"
#include "hmae/util.hpp"

namespace hmae {

std::vector<std::vector<int>> SegmentTree::children() const {
  std::vector<std::vector<int>> out(nodes.size());
  for (std::size_t i = 1; i < parent.size(); ++i) out[static_cast<std::size_t>(parent[i])].push_back(static_cast<int>(i));
  return out;
}

void SegmentTree::validate() const {
  if (nodes.empty()) throw ValidationError("tree '" + video_id + "': no nodes");
  if (parent.size() != nodes.size()) throw ValidationError("tree '" + video_id + "': parent map size mismatch");
  if (parent[0] != -1) throw ValidationError("tree '" + video_id + "': node 0 must be the root");
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (parent[i] < 0 || static_cast<std::size_t>(parent[i]) >= i)
      throw ValidationError("tree '" + video_id + "': node " + std::to_string(i) +
                            " has parent " + std::to_string(parent[i]) + " (must precede it)");
    if (!nodes[static_cast<std::size_t>(parent[i])].time_span.contains(nodes[i].time_span))
      throw ValidationError("tree '" + video_id + "': node " + std::to_string(i) +
                            " time span escapes its parent");
  }
  const auto kids = children();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].member_proposals.empty())
      throw ValidationError("tree '" + video_id + "': node " + std::to_string(i) + " has no members");
    if (kids[i].empty()) continue;
    std::vector<int> merged;
    for (int c : kids[i]) {
      const auto& m = nodes[static_cast<std::size_t>(c)].member_proposals;
      merged.insert(merged.end(), m.begin(), m.end());
    }
    std::sort(merged.begin(), merged.end());
    if (merged != nodes[i].member_proposals)
      throw ValidationError("tree '" + video_id + "': node " + std::to_string(i) +
                            " members differ from the union of its children");
  }
}

void HierarchyConfig::validate() const {
  if (!(trim_overlap > 0.0 && trim_overlap <= 1.0)) throw ValidationError("trim_overlap must lie in (0, 1]");
  if (top_n_seed_positives <= 0) throw ValidationError("top_n_seed_positives must be positive");
  if (num_st_clusters && *num_st_clusters <= 0) throw ValidationError("num_st_clusters must be positive");
  for (double w : {distance_weights.color, distance_weights.shape, distance_weights.xyt})
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("distance weights must be finite and >= 0");
  if (!(svm_c > 0.0)) throw ValidationError("svm_c must be > 0");
  if (svm_epochs <= 0) throw ValidationError("svm_epochs must be positive");
}

double chi2_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = a[i] + b[i];
    if (s > 0.0) {
      const double diff = a[i] - b[i];
      d += diff * diff / s;
    }
  }
  return 0.5 * d;
}

double mask_disagreement(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.empty()) return 0.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] != b[i]) ? 1 : 0;
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

double member_overlap(const SpatioTemporalSegment& parent, const SpatioTemporalSegment& child) {
  if (parent.member_proposals.empty()) return 0.0;
  std::vector<int> shared;
  std::set_intersection(parent.member_proposals.begin(), parent.member_proposals.end(),
                        child.member_proposals.begin(), child.member_proposals.end(),
                        std::back_inserter(shared));
  return static_cast<double>(shared.size()) / static_cast<double>(parent.member_proposals.size());
}

SpatioTemporalSegment make_segment(const VideoRecord& video, std::vector<int> members, int segment_id) {
  if (members.empty()) throw ValidationError("make_segment: empty member list");
  std::sort(members.begin(), members.end());
  SpatioTemporalSegment s;
  s.segment_id = segment_id;
  s.time_span = {video.proposals[static_cast<std::size_t>(members.front())].frame_index,
                 video.proposals[static_cast<std::size_t>(members.front())].frame_index};
  for (int m : members) {
    const auto& p = video.proposals[static_cast<std::size_t>(m)];
    s.time_span.start = std::min(s.time_span.start, p.frame_index);
    s.time_span.end = std::max(s.time_span.end, p.frame_index);
    s.mean_bbox.x += p.bbox.x;
    s.mean_bbox.y += p.bbox.y;
    s.mean_bbox.w += p.bbox.w;
    s.mean_bbox.h += p.bbox.h;
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  s.mean_bbox = {s.mean_bbox.x * inv, s.mean_bbox.y * inv, s.mean_bbox.w * inv, s.mean_bbox.h * inv};
  s.bow = aggregate_bow(video.proposals, members);
  s.appearance = mean_appearance(video.proposals, members);
  s.member_proposals = std::move(members);
  return s;
}

std::vector<int> score_and_prune_proposals(const VideoRecord& video, const HierarchyConfig& cfg) {
  cfg.validate();
  const std::size_t n = video.proposals.size();
  if (n == 0) throw ValidationError("video '" + video.video_id + "' has no proposals");
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (n < 2) {
    logger()->warn("video '{}': fewer than 2 proposals, skipping foreground pruning", video.video_id);
    return all;
  }

  std::map<int, std::vector<int>> by_frame;
  for (int i : all) by_frame[video.proposals[static_cast<std::size_t>(i)].frame_index].push_back(i);
  std::vector<bool> is_seed(n, false);
  std::vector<int> seeds;
  for (auto& [frame, idx] : by_frame) {
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      const auto& pa = video.proposals[static_cast<std::size_t>(a)];
      const auto& pb = video.proposals[static_cast<std::size_t>(b)];
      return pa.objectness_score + pa.motion_score > pb.objectness_score + pb.motion_score;
    });
    const auto take = std::min<std::size_t>(idx.size(), static_cast<std::size_t>(cfg.top_n_seed_positives));
    for (std::size_t k = 0; k < take; ++k) {
      is_seed[static_cast<std::size_t>(idx[k])] = true;
      seeds.push_back(idx[k]);
    }
  }
  std::vector<int> rest;
  for (int i : all)
    if (!is_seed[static_cast<std::size_t>(i)]) rest.push_back(i);
  if (rest.empty()) {
    logger()->warn("video '{}': every proposal is a seed, no negatives to train on", video.video_id);
    return all;
  }
  std::mt19937_64 rng(mix_seed(cfg.seed, fnv1a64(video.video_id)));
  std::shuffle(rest.begin(), rest.end(), rng);
  rest.resize(std::min(rest.size(), seeds.size()));

  std::vector<std::vector<double>> pos, neg;
  for (int i : seeds) pos.push_back(video.proposals[static_cast<std::size_t>(i)].appearance_hist);
  for (int i : rest) neg.push_back(video.proposals[static_cast<std::size_t>(i)].appearance_hist);
  const auto model = train_linear_svm(pos, neg, cfg.svm_c, cfg.svm_epochs, rng());

  std::vector<int> kept;
  for (int i : all)
    if (svm_score(model, video.proposals[static_cast<std::size_t>(i)].appearance_hist) > cfg.foreground_threshold)
      kept.push_back(i);
  return kept;
}

SymMatrix proposal_affinity(const VideoRecord& video, std::span<const int> kept, const DistanceWeights& wts) {
  const std::size_t n = kept.size();
  SymMatrix color(n), shape(n), xyt(n);
  double sum_c = 0.0, sum_s = 0.0, sum_x = 0.0;
  const double frames = static_cast<double>(std::max(video.num_frames, 1));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = video.proposals[static_cast<std::size_t>(kept[i])];
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& b = video.proposals[static_cast<std::size_t>(kept[j])];
      const double dc = chi2_distance(a.appearance_hist, b.appearance_hist);
      const double ds = mask_disagreement(a.shape_feature, b.shape_feature);
      const double dx = a.bbox.center_x() - b.bbox.center_x();
      const double dy = a.bbox.center_y() - b.bbox.center_y();
      const double dt = (a.frame_index - b.frame_index) / frames;
      const double dxyt = std::sqrt(dx * dx + dy * dy + dt * dt);
      color.set(i, j, dc);
      shape.set(i, j, ds);
      xyt.set(i, j, dxyt);
      sum_c += dc;
      sum_s += ds;
      sum_x += dxyt;
    }
  }
  const double pairs = n > 1 ? static_cast<double>(n * (n - 1) / 2) : 1.0;
  auto scale = [&](double sum) { return sum > 0.0 ? pairs / sum : 1.0; };
  const double kc = wts.color * scale(sum_c);
  const double ks = wts.shape * scale(sum_s);
  const double kx = wts.xyt * scale(sum_x);

  SymMatrix aff(n);
  for (std::size_t i = 0; i < n; ++i) {
    aff.set(i, i, 1.0);
    for (std::size_t j = i + 1; j < n; ++j)
      aff.set(i, j, std::exp(-kc * color(i, j) - ks * shape(i, j) - kx * xyt(i, j)));
  }
  return aff;
}

std::vector<SpatioTemporalSegment> pool_spatiotemporal_segments(const VideoRecord& video,
                                                                std::span<const int> kept,
                                                                const HierarchyConfig& cfg) {
  cfg.validate();
  if (kept.empty()) throw ValidationError("pool_spatiotemporal_segments: nothing kept in '" + video.video_id + "'");
  const auto n = static_cast<int>(kept.size());
  if (n == 1) return {make_segment(video, {kept[0]}, 0)};

  int k = cfg.num_st_clusters.value_or(std::max(20, (n + 14) / 15));
  k = std::min(k, n);
  const auto labels = spectral_cluster(proposal_affinity(video, kept, cfg.distance_weights), k,
                                       mix_seed(cfg.seed ^ 0x5e9, fnv1a64(video.video_id)));

  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[labels[static_cast<std::size_t>(i)]].push_back(kept[static_cast<std::size_t>(i)]);
  std::vector<std::vector<int>> members;
  for (auto& [label, m] : groups) {
    std::sort(m.begin(), m.end());
    members.push_back(std::move(m));
  }
  std::sort(members.begin(), members.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  std::vector<SpatioTemporalSegment> out;
  for (std::size_t s = 0; s < members.size(); ++s)
    out.push_back(make_segment(video, std::move(members[s]), static_cast<int>(s)));
  return out;
}

namespace {

struct Cluster {
  std::vector<int> members;
  std::vector<double> appearance;  // mean
  double cx = 0.0, cy = 0.0, t = 0.0;
  std::vector<int> children;
};

Cluster make_cluster(const VideoRecord& video, const std::vector<int>& members) {
  Cluster c;
  c.members = members;
  c.appearance = mean_appearance(video.proposals, members);
  const double frames = static_cast<double>(std::max(video.num_frames, 1));
  for (int m : members) {
    const auto& p = video.proposals[static_cast<std::size_t>(m)];
    c.cx += p.bbox.center_x();
    c.cy += p.bbox.center_y();
    c.t += p.frame_index / frames;
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  c.cx *= inv;
  c.cy *= inv;
  c.t *= inv;
  return c;
}

struct PairDistances {
  double color, xyt, fit;
};

PairDistances cluster_distances(const VideoRecord& video, const Cluster& a, const Cluster& b) {
  PairDistances d;
  d.color = chi2_distance(a.appearance, b.appearance);
  d.xyt = std::sqrt((a.cx - b.cx) * (a.cx - b.cx) + (a.cy - b.cy) * (a.cy - b.cy) + (a.t - b.t) * (a.t - b.t));
  double fit = 0.0;
  for (int i : a.members) {
    const auto& pi = video.proposals[static_cast<std::size_t>(i)].bbox;
    for (int j : b.members) {
      const auto& pj = video.proposals[static_cast<std::size_t>(j)].bbox;
      fit += std::hypot(pi.w - pj.w, pi.h - pj.h);
    }
  }
  d.fit = fit / static_cast<double>(a.members.size() * b.members.size());
  return d;
}

}  // namespace

SegmentTree build_hierarchy(const VideoRecord& video, std::vector<SpatioTemporalSegment> segments,
                            const HierarchyConfig& cfg) {
  cfg.validate();
  if (segments.empty()) throw ValidationError("build_hierarchy: no segments for '" + video.video_id + "'");

  std::vector<Cluster> clusters;
  for (const auto& s : segments) clusters.push_back(make_cluster(video, s.member_proposals));
  const std::size_t leaves = clusters.size();

  // Each distance is scaled by its mean over the initial segment pairs.
  double norm_c = 1.0, norm_x = 1.0, norm_f = 1.0;
  if (leaves > 1) {
    double sc = 0.0, sx = 0.0, sf = 0.0;
    for (std::size_t i = 0; i < leaves; ++i)
      for (std::size_t j = i + 1; j < leaves; ++j) {
        const auto d = cluster_distances(video, clusters[i], clusters[j]);
        sc += d.color;
        sx += d.xyt;
        sf += d.fit;
      }
    const double pairs = static_cast<double>(leaves * (leaves - 1) / 2);
    if (sc > 0.0) norm_c = pairs / sc;
    if (sx > 0.0) norm_x = pairs / sx;
    if (sf > 0.0) norm_f = pairs / sf;
  }

  std::vector<bool> active(leaves, true);
  std::map<std::pair<std::size_t, std::size_t>, double> cost;
  auto pair_cost = [&](std::size_t a, std::size_t b) {
    const auto key = std::make_pair(a, b);
    if (auto it = cost.find(key); it != cost.end()) return it->second;
    const auto d = cluster_distances(video, clusters[a], clusters[b]);
    const double c = norm_c * d.color + norm_x * d.xyt + norm_f * d.fit;
    cost.emplace(key, c);
    return c;
  };

  std::size_t remaining = leaves;
  while (remaining > 1) {
    std::size_t best_a = 0, best_b = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        if (!active[b]) continue;
        const double c = pair_cost(a, b);
        if (c < best) {
          best = c;
          best_a = a;
          best_b = b;
        }
      }
    }
    std::vector<int> merged = clusters[best_a].members;
    merged.insert(merged.end(), clusters[best_b].members.begin(), clusters[best_b].members.end());
    std::sort(merged.begin(), merged.end());
    Cluster parent = make_cluster(video, merged);
    parent.children = {static_cast<int>(best_a), static_cast<int>(best_b)};
    active[best_a] = false;
    active[best_b] = false;
    clusters.push_back(std::move(parent));
    active.push_back(true);
    --remaining;
  }

  // Trim redundant nodes. A non-top parent holding a child with more than
  // trim_overlap of its proposals is dropped and its children move up. The top
  // node cannot be dropped, so there the internal child is dissolved instead;
  // a leaf child of the top is kept as is.
  const int top = static_cast<int>(clusters.size()) - 1;
  std::vector<int> up(clusters.size(), -1);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (int k : clusters[c].children) up[static_cast<std::size_t>(k)] = static_cast<int>(c);

  auto size_of = [&](int c) { return static_cast<double>(clusters[static_cast<std::size_t>(c)].members.size()); };
  auto splice = [&](int holder, int removed) {
    auto& kids = clusters[static_cast<std::size_t>(holder)].children;
    auto it = std::find(kids.begin(), kids.end(), removed);
    const auto& moved = clusters[static_cast<std::size_t>(removed)].children;
    it = kids.erase(it);
    kids.insert(it, moved.begin(), moved.end());
    for (int m : moved) up[static_cast<std::size_t>(m)] = holder;
    clusters[static_cast<std::size_t>(removed)].children.clear();
  };
  auto bfs = [&] {
    std::vector<int> order{top};
    for (std::size_t q = 0; q < order.size(); ++q)
      for (int k : clusters[static_cast<std::size_t>(order[q])].children) order.push_back(k);
    return order;
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (int p : bfs()) {
      for (int c : clusters[static_cast<std::size_t>(p)].children) {
        if (!(size_of(c) > cfg.trim_overlap * size_of(p))) continue;
        if (p != top) {
          splice(up[static_cast<std::size_t>(p)], p);
          changed = true;
        } else if (!clusters[static_cast<std::size_t>(c)].children.empty()) {
          splice(top, c);
          changed = true;
        }
        if (changed) break;
      }
      if (changed) break;
    }
  }

  const auto order = bfs();
  std::vector<int> node_of(clusters.size(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) node_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i);

  SegmentTree tree;
  tree.video_id = video.video_id;
  tree.num_frames = video.num_frames;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int c = order[i];
    tree.nodes.push_back(make_segment(video, clusters[static_cast<std::size_t>(c)].members, static_cast<int>(i)));
    tree.parent.push_back(i == 0 ? -1 : node_of[static_cast<std::size_t>(up[static_cast<std::size_t>(c)])]);
  }
  tree.validate();
  return tree;
}

SegmentTree build_segment_tree(const VideoRecord& video, const HierarchyConfig& cfg) {
  const auto kept = score_and_prune_proposals(video, cfg);
  if (kept.empty()) {
    logger()->warn("video '{}': foreground pruning removed every proposal, keeping all", video.video_id);
    std::vector<int> all(video.proposals.size());
    std::iota(all.begin(), all.end(), 0);
    return build_hierarchy(video, pool_spatiotemporal_segments(video, all, cfg), cfg);
  }
  return build_hierarchy(video, pool_spatiotemporal_segments(video, kept, cfg), cfg);
}

}  // namespace hmae
