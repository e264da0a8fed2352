#include "hmae/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "hmae/error.hpp"
#include "hmae/log.hpp"
#include "hmae/util.hpp"

namespace hmae {

double temporal_iou(const FrameSpan& a, const FrameSpan& b) {
  if (a.end < a.start || b.end < b.start) throw ValidationError("temporal_iou: invalid interval");
  const int inter = std::min(a.end, b.end) - std::max(a.start, b.start) + 1;
  if (inter <= 0) return 0.0;
  const int uni = (a.end - a.start + 1) + (b.end - b.start + 1) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

AccuracyReport per_class_accuracy(std::span<const std::pair<LabelId, LabelId>> predictions,
                                  std::optional<std::size_t> num_classes) {
  if (predictions.empty()) throw ValidationError("per_class_accuracy: no predictions");
  std::map<LabelId, std::pair<std::size_t, std::size_t>> tally;  // truth -> (correct, total)
  for (const auto& [pred, truth] : predictions) {
    auto& t = tally[truth];
    t.first += pred == truth ? 1 : 0;
    ++t.second;
  }
  if (num_classes)
    for (std::size_t c = 0; c < *num_classes; ++c)
      if (!tally.count(static_cast<LabelId>(c)))
        logger()->warn("class {} has no test instances and is left out of the mean", c);
  AccuracyReport r;
  for (const auto& [label, t] : tally) {
    const double acc = static_cast<double>(t.first) / static_cast<double>(t.second);
    r.per_class.emplace_back(label, acc);
    r.mean += acc;
  }
  r.mean /= static_cast<double>(r.per_class.size());
  return r;
}

double average_precision(const std::vector<bool>& hits, std::size_t positives) {
  if (positives == 0) return 0.0;
  std::vector<double> precision(hits.size()), recall(hits.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    tp += hits[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(positives);
  }
  for (std::size_t i = hits.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

std::vector<double> localization_map(std::span<const ScoredInterval> predictions,
                                     std::span<const LabeledInterval> truth, std::span<const double> thresholds) {
  std::map<LabelId, std::vector<std::size_t>> truth_by_label;
  for (std::size_t t = 0; t < truth.size(); ++t) truth_by_label[truth[t].label].push_back(t);
  std::map<LabelId, std::vector<std::size_t>> preds_by_label;
  for (std::size_t p = 0; p < predictions.size(); ++p) preds_by_label[predictions[p].label].push_back(p);
  for (auto& [label, idx] : preds_by_label)
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return predictions[a].score > predictions[b].score; });

  std::vector<double> out;
  for (double thr : thresholds) {
    if (truth_by_label.empty()) {
      logger()->warn("localization_map: no ground-truth intervals");
      out.push_back(0.0);
      continue;
    }
    double sum = 0.0;
    for (const auto& [label, gt] : truth_by_label) {
      std::vector<bool> used(gt.size(), false);
      std::vector<bool> hits;
      if (auto it = preds_by_label.find(label); it != preds_by_label.end()) {
        for (std::size_t p : it->second) {
          const auto& pred = predictions[p];
          double best = -1.0;
          std::size_t pick = gt.size();
          for (std::size_t g = 0; g < gt.size(); ++g) {
            const auto& t = truth[gt[g]];
            if (used[g] || t.video_id != pred.video_id) continue;
            const double iou = temporal_iou(pred.span, t.span);
            if (iou >= thr && iou > best) {
              best = iou;
              pick = g;
            }
          }
          if (pick < gt.size()) used[pick] = true;
          hits.push_back(pick < gt.size());
        }
      }
      sum += average_precision(hits, gt.size());
    }
    out.push_back(sum / static_cast<double>(truth_by_label.size()));
  }
  return out;
}

std::vector<ScoredInterval> nms(std::vector<ScoredInterval> intervals, double iou_threshold) {
  std::stable_sort(intervals.begin(), intervals.end(),
                   [](const ScoredInterval& a, const ScoredInterval& b) { return a.score > b.score; });
  std::vector<ScoredInterval> kept;
  for (auto& cand : intervals) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ScoredInterval& k) {
      return k.label == cand.label && k.video_id == cand.video_id && temporal_iou(k.span, cand.span) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(cand));
  }
  return kept;
}

std::vector<ScoredInterval> parse_to_intervals(const ModelParams& params, const SegmentTree& tree,
                                               const ScoreTable& scores, const Labeling& labeling, double nms_iou) {
  std::vector<ScoredInterval> out;
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const LabelId z = labeling.node_labels.at(i);
    if (z <= 0) continue;
    const auto p = static_cast<std::size_t>(tree.parent[i]);
    if (p != 0 && labeling.node_labels[p] == z) continue;
    out.push_back({tree.video_id, z - 1, tree.nodes[i].time_span,
                   node_potential(params, tree, scores, static_cast<int>(i), z)});
  }
  return nms(std::move(out), nms_iou);
}

void WindowConfig::validate() const {
  if (lengths.empty()) throw ValidationError("window lengths must not be empty");
  for (int l : lengths)
    if (l <= 0) throw ValidationError("window lengths must be positive");
  if (!(step > 0.0 && step <= 1.0)) throw ValidationError("window step must lie in (0, 1]");
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw ValidationError("nms_iou must lie in (0, 1]");
  if (random_negatives_per_video < 0) throw ValidationError("random_negatives_per_video must be >= 0");
  if (!(svm_c > 0.0) || svm_epochs <= 0) throw ValidationError("invalid window SVM settings");
}

namespace {

std::optional<std::vector<double>> window_bow(const VideoRecord& video, const FrameSpan& span) {
  std::vector<int> members;
  for (std::size_t p = 0; p < video.proposals.size(); ++p) {
    const int f = video.proposals[p].frame_index;
    if (f >= span.start && f <= span.end) members.push_back(static_cast<int>(p));
  }
  if (members.empty()) return std::nullopt;
  return aggregate_bow(video.proposals, members);
}

std::vector<FrameSpan> window_grid(int num_frames, const WindowConfig& cfg) {
  std::vector<FrameSpan> out;
  for (int len : cfg.lengths) {
    const int l = std::min(len, num_frames);
    const int stride = std::max(1, static_cast<int>(std::lround(cfg.step * l)));
    for (int s = 0;; s += stride) {
      const int start = std::min(s, num_frames - l);
      out.push_back({start, start + l - 1});
      if (start + l >= num_frames) break;
    }
  }
  std::sort(out.begin(), out.end(), [](const FrameSpan& a, const FrameSpan& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

WindowScorer train_window_scorer(std::span<const VideoRecord> videos, std::size_t num_labels, const WindowConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<std::vector<double>>> pos(num_labels), neg(num_labels);
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const auto& video = videos[v];
    if (!video.parse_annotations) continue;
    const auto& ann = *video.parse_annotations;
    for (const auto& a : ann) {
      const auto bow = window_bow(video, {a.start_frame, a.end_frame});
      if (!bow) continue;
      for (std::size_t z = 0; z < num_labels; ++z)
        (static_cast<std::size_t>(a.label) == z ? pos : neg)[z].push_back(*bow);
    }
    std::mt19937_64 rng(mix_seed(cfg.seed, fnv1a64(video.video_id)));
    for (int r = 0; r < cfg.random_negatives_per_video && video.num_frames > 0; ++r) {
      const int len = std::min(cfg.lengths[rng() % cfg.lengths.size()], video.num_frames);
      const int start = static_cast<int>(rng() % static_cast<std::uint64_t>(video.num_frames - len + 1));
      const FrameSpan span{start, start + len - 1};
      const auto bow = window_bow(video, span);
      if (!bow) continue;
      for (std::size_t z = 0; z < num_labels; ++z) {
        const bool overlaps = std::any_of(ann.begin(), ann.end(), [&](const ParseInterval& a) {
          return static_cast<std::size_t>(a.label) == z && temporal_iou(span, {a.start_frame, a.end_frame}) > 0.0;
        });
        if (!overlaps) neg[z].push_back(*bow);
      }
    }
  }
  WindowScorer scorer;
  scorer.per_label.resize(num_labels);
  for (std::size_t z = 0; z < num_labels; ++z) {
    if (pos[z].empty() || neg[z].empty()) {
      logger()->warn("window scorer: label {} lacks positives or negatives", z);
      const std::size_t dim = !pos[z].empty() ? pos[z][0].size() : (!neg[z].empty() ? neg[z][0].size() : 0);
      scorer.per_label[z].weights.assign(dim, 0.0);
      scorer.per_label[z].bias = pos[z].empty() ? -1.0 : 1.0;
      continue;
    }
    scorer.per_label[z] = train_linear_svm(pos[z], neg[z], cfg.svm_c, cfg.svm_epochs, mix_seed(cfg.seed, 0x3000 + z));
  }
  return scorer;
}

std::vector<ScoredInterval> sliding_window_baseline(const VideoRecord& video, const WindowScorer& scorer,
                                                    const WindowConfig& cfg) {
  cfg.validate();
  std::vector<ScoredInterval> out;
  if (video.proposals.empty() || video.num_frames <= 0) return out;
  for (const auto& span : window_grid(video.num_frames, cfg)) {
    const auto bow = window_bow(video, span);
    if (!bow) continue;
    for (std::size_t z = 0; z < scorer.per_label.size(); ++z)
      out.push_back({video.video_id, static_cast<LabelId>(z), span, svm_score(scorer.per_label[z], *bow)});
  }
  return nms(std::move(out), cfg.nms_iou);
}

LabelId RootModel::predict(const SegmentTree& tree) const {
  if (per_class.empty()) throw ValidationError("root model has no classes");
  LabelId best = 0;
  double best_s = svm_score(per_class[0], tree.root_feature());
  for (std::size_t c = 1; c < per_class.size(); ++c) {
    const double s = svm_score(per_class[c], tree.root_feature());
    if (s > best_s) {
      best_s = s;
      best = static_cast<LabelId>(c);
    }
  }
  return best;
}

RootModel train_root_model(std::span<const SegmentTree> trees, std::span<const LabelId> actions,
                           std::size_t num_classes, double c, int epochs, std::uint64_t seed) {
  if (trees.size() != actions.size() || trees.empty()) throw ValidationError("root model: bad training set");
  RootModel m;
  m.per_class.resize(num_classes);
  for (std::size_t y = 0; y < num_classes; ++y) {
    std::vector<std::vector<double>> pos, neg;
    for (std::size_t n = 0; n < trees.size(); ++n)
      (actions[n] == static_cast<LabelId>(y) ? pos : neg).push_back(trees[n].root_feature());
    if (pos.empty() || neg.empty()) {
      m.per_class[y].weights.assign(trees[0].root_feature().size(), 0.0);
      m.per_class[y].bias = pos.empty() ? -1.0 : 1.0;
      continue;
    }
    m.per_class[y] = train_linear_svm(pos, neg, c, epochs, mix_seed(seed, 0x4000 + y));
  }
  return m;
}

AccuracyReport root_model_ablation(std::span<const SegmentTree> train_trees, std::span<const LabelId> train_actions,
                                   std::span<const SegmentTree> test_trees, std::span<const LabelId> test_actions,
                                   std::size_t num_classes, double c, int epochs, std::uint64_t seed) {
  const auto model = train_root_model(train_trees, train_actions, num_classes, c, epochs, seed);
  if (test_trees.size() != test_actions.size()) throw ValidationError("root model: bad test set");
  std::vector<std::pair<LabelId, LabelId>> preds;
  for (std::size_t n = 0; n < test_trees.size(); ++n) preds.emplace_back(model.predict(test_trees[n]), test_actions[n]);
  return per_class_accuracy(preds, num_classes);
}

}  // namespace hmae
