#include "hmae/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "hmae/error.hpp"
#include "hmae/log.hpp"
#include "hmae/util.hpp"

namespace hmae {

void TrainConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("c must be finite and > 0");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be > 0");
  if (max_iterations <= 0) throw ValidationError("max_iterations must be positive");
  if (qp_inner <= 0) throw ValidationError("qp_inner must be positive");
}

std::vector<TrainingExample> recognition_examples(std::span<const SegmentTree> trees,
                                                  std::span<const LabelId> actions, const MAEVocabulary& vocab) {
  if (trees.size() != actions.size()) throw ValidationError("one action label per tree required");
  std::vector<TrainingExample> out(trees.size());
  for (std::size_t n = 0; n < trees.size(); ++n) {
    out[n].tree = trees[n];
    out[n].scores = assign_mae_scores(vocab, trees[n]);
    out[n].truth.action = actions[n];
    out[n].truth.node_labels = training_mae_assignment(vocab, trees[n], out[n].scores, actions[n]);
  }
  return out;
}

std::vector<LabelId> associate_parse_labels(const SegmentTree& tree, std::span<const ParseInterval> annotations) {
  std::vector<LabelId> out(tree.nodes.size(), -1);
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const auto& span = tree.nodes[i].time_span;
    double best_iou = 0.0;
    int best_len = 0;
    LabelId best = 0;
    for (const auto& a : annotations) {
      const int inter = std::min(span.end, a.end_frame) - std::max(span.start, a.start_frame) + 1;
      if (inter <= 0) continue;
      const int uni = std::max(span.end, a.end_frame) - std::min(span.start, a.start_frame) + 1;
      const double iou = static_cast<double>(inter) / uni;
      const int len = a.end_frame - a.start_frame + 1;
      const LabelId label = a.label + 1;
      if (iou > best_iou || (iou == best_iou && (len > best_len || (len == best_len && label < best)))) {
        best_iou = iou;
        best_len = len;
        best = label;
      }
    }
    out[i] = best;
  }
  return out;
}

MAEVocabulary train_node_label_scorers(std::span<const SegmentTree> trees,
                                       const std::vector<std::vector<LabelId>>& node_labels,
                                       const LabelTable& parse_labels, const DiscoveryConfig& cfg) {
  cfg.validate();
  if (trees.size() != node_labels.size()) throw ValidationError("one node labeling per tree required");
  MAEVocabulary vocab;
  vocab.duration_feature = true;
  vocab.maes.intern("<background>");
  for (const auto& name : parse_labels.names()) vocab.maes.intern(name);
  const std::size_t L = vocab.maes.size();

  std::vector<std::vector<std::vector<double>>> by_label(L);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    if (node_labels[t].size() != trees[t].nodes.size())
      throw ValidationError("node labeling of '" + trees[t].video_id + "' does not cover the tree");
    for (std::size_t i = 1; i < trees[t].nodes.size(); ++i) {
      const LabelId z = node_labels[t][i];
      if (z < 0 || static_cast<std::size_t>(z) >= L) throw ValidationError("node label out of range");
      by_label[static_cast<std::size_t>(z)].push_back(scoring_features(vocab, trees[t], static_cast<int>(i)));
      if (vocab.feature_dim == 0) vocab.feature_dim = trees[t].nodes[i].bow.size();
    }
  }
  vocab.clusters.resize(L);
  parallel_for(L, cfg.jobs, [&](std::size_t z) {
    auto& c = vocab.clusters[z];
    c.mae_id = static_cast<LabelId>(z);
    c.owner_action = -1;
    std::vector<std::vector<double>> pos = by_label[z], neg;
    for (std::size_t o = 0; o < L; ++o)
      if (o != z) neg.insert(neg.end(), by_label[o].begin(), by_label[o].end());
    if (pos.empty() || neg.empty()) {
      c.classifier.weights.assign(vocab.feature_dim + 1, 0.0);
      c.classifier.bias = pos.empty() ? -1.0 : 1.0;
      c.classifier.c = cfg.svm_c;
      return;
    }
    const std::size_t cap = pos.size() * static_cast<std::size_t>(cfg.max_negative_ratio);
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x9a75e + z));
    if (neg.size() > cap) {
      std::vector<std::size_t> pick(neg.size());
      std::iota(pick.begin(), pick.end(), 0);
      std::shuffle(pick.begin(), pick.end(), rng);
      pick.resize(cap);
      std::sort(pick.begin(), pick.end());
      std::vector<std::vector<double>> kept;
      for (auto k : pick) kept.push_back(std::move(neg[k]));
      neg = std::move(kept);
    }
    c.classifier = train_linear_svm(pos, neg, cfg.svm_c, cfg.svm_epochs, rng());
  });
  for (std::size_t z = 0; z < L; ++z)
    if (by_label[z].empty()) logger()->warn("node label '{}' has no training nodes", vocab.maes.name(static_cast<LabelId>(z)));
  return vocab;
}

std::vector<TrainingExample> parsing_examples(std::span<const SegmentTree> trees,
                                              const std::vector<std::vector<LabelId>>& node_labels,
                                              const MAEVocabulary& scorers) {
  if (trees.size() != node_labels.size()) throw ValidationError("one node labeling per tree required");
  std::vector<TrainingExample> out(trees.size());
  for (std::size_t n = 0; n < trees.size(); ++n) {
    out[n].tree = trees[n];
    out[n].scores = assign_mae_scores(scorers, trees[n]);
    out[n].truth.action = -1;
    out[n].truth.node_labels = node_labels[n];
  }
  return out;
}

namespace {

InferenceResult most_violated(const ModelParams& params, const TrainingExample& ex) {
  if (params.mode == Mode::recognition)
    return infer_loss_augmented_recognition(params, ex.tree, ex.scores, ex.truth.action);
  return infer_loss_augmented_parsing(params, ex.tree, ex.scores, ex.truth.node_labels);
}

double task_loss(Mode mode, const Labeling& truth, const Labeling& pred) {
  if (mode == Mode::recognition) return truth.action == pred.action ? 0.0 : 1.0;
  return parsing_loss(truth.node_labels, pred.node_labels);
}

struct Constraint {
  Labeling labeling;
  std::vector<double> delta_phi;  ///< Phi(truth) - Phi(labeling)
  double loss = 0.0;
  double norm2 = 0.0;
  double alpha = 0.0;
};

// Working-set QP over w:  0.5|w|^2 + C sum_n max(0, max_{c in W_n} loss_c - w.dphi_c),
// solved through its dual  max sum alpha_c loss_c - 0.5|sum alpha_c dphi_c|^2
// with alpha >= 0 and sum_{c in W_n} alpha_c <= C.
class WorkingSet {
 public:
  WorkingSet(std::size_t videos, std::size_t dim, double c) : sets_(videos), w_(dim, 0.0), c_(c) {}

  bool contains(std::size_t n, const Labeling& y) const {
    return std::any_of(sets_[n].begin(), sets_[n].end(), [&](const Constraint& k) { return k.labeling == y; });
  }
  void add(std::size_t n, Constraint k) { sets_[n].push_back(std::move(k)); }
  std::size_t size() const {
    std::size_t s = 0;
    for (const auto& v : sets_) s += v.size();
    return s;
  }

  double slack(std::size_t n, std::span<const double> w) const {
    double xi = 0.0;
    for (const auto& k : sets_[n]) xi = std::max(xi, k.loss - dot(w, k.delta_phi));
    return xi;
  }
  double primal(std::span<const double> w) const {
    double s = 0.5 * dot(w, w);
    for (std::size_t n = 0; n < sets_.size(); ++n) s += c_ * slack(n, w);
    return s;
  }
  double dual() const {
    double s = -0.5 * dot(w_, w_);
    for (const auto& v : sets_)
      for (const auto& k : v) s += k.alpha * k.loss;
    return s;
  }

  // Coordinate ascent sweeps. Appends the running-best primal value per sweep
  // to `trace` and returns the weights achieving it.
  std::vector<double> solve(int sweeps, std::vector<double>& trace) {
    std::vector<double> best_w = w_;
    double best = primal(w_);
    for (int s = 0; s < sweeps; ++s) {
      for (std::size_t n = 0; n < sets_.size(); ++n) sweep_video(n);
      const double p = primal(w_);
      if (p < best) {
        best = p;
        best_w = w_;
      }
      trace.push_back(best);
      const double gap = best - dual();
      if (gap <= 1e-9 * std::max(1.0, std::abs(best))) break;
    }
    return best_w;
  }

 private:
  double gain(const Constraint& k) const { return k.loss - dot(w_, k.delta_phi); }

  void move(Constraint& k, double step) {
    k.alpha += step;
    for (std::size_t d = 0; d < w_.size(); ++d) w_[d] += step * k.delta_phi[d];
  }

  void sweep_video(std::size_t n) {
    auto& set = sets_[n];
    if (set.empty()) return;
    for (auto& k : set) {
      double used = 0.0;
      for (const auto& o : set) used += o.alpha;
      const double room = std::max(0.0, c_ - (used - k.alpha));
      const double g = gain(k);
      double target;
      if (k.norm2 > 0.0)
        target = std::clamp(k.alpha + g / k.norm2, 0.0, room);
      else
        target = g > 0.0 ? room : 0.0;
      if (target != k.alpha) move(k, target - k.alpha);
    }
    // With the budget exhausted, shift weight toward the most violated constraint.
    double used = 0.0;
    for (const auto& o : set) used += o.alpha;
    if (set.size() < 2 || used < c_ * (1.0 - 1e-12)) return;
    std::size_t top = 0;
    for (std::size_t i = 1; i < set.size(); ++i)
      if (gain(set[i]) > gain(set[top])) top = i;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (i == top || set[i].alpha <= 0.0) continue;
      const double diff = gain(set[top]) - gain(set[i]);
      if (diff <= 0.0) continue;
      double curv = 0.0;
      for (std::size_t d = 0; d < w_.size(); ++d) {
        const double u = set[top].delta_phi[d] - set[i].delta_phi[d];
        curv += u * u;
      }
      const double t = curv > 0.0 ? std::min(set[i].alpha, diff / curv) : set[i].alpha;
      move(set[i], -t);
      move(set[top], t);
    }
  }

  std::vector<std::vector<Constraint>> sets_;
  std::vector<double> w_;
  double c_;
};

TrainedModel cutting_plane(ModelParams params, std::span<const TrainingExample> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ValidationError("training set is empty");
  params.validate();
  std::vector<double> truth_phi_score(data.size());
  std::vector<std::vector<double>> truth_phi(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& ex = data[n];
    if (params.mode == Mode::recognition && !feasible(params, ex.truth))
      throw ValidationError("ground-truth labeling of '" + ex.tree.video_id + "' is infeasible");
    truth_phi[n] = joint_feature_map(params, ex.tree, ex.scores, ex.truth);
  }

  TrainedModel out;
  out.mode = params.mode;
  WorkingSet ws(data.size(), params.w.size(), cfg.c);
  std::vector<InferenceResult> found(data.size());

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    parallel_for(data.size(), cfg.jobs, [&](std::size_t n) { found[n] = most_violated(params, data[n]); });
    IterationRecord rec;
    rec.iteration = iter;
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto& ex = data[n];
      const double violation = found[n].score - score(params, ex.tree, ex.scores, ex.truth);
      const double excess = violation - ws.slack(n, params.w);
      rec.max_violation = std::max(rec.max_violation, excess);
      if (excess <= cfg.tolerance || ws.contains(n, found[n].labeling)) continue;
      Constraint k;
      k.labeling = found[n].labeling;
      k.loss = task_loss(params.mode, ex.truth, k.labeling);
      const auto phi = joint_feature_map(params, ex.tree, ex.scores, k.labeling);
      k.delta_phi.resize(phi.size());
      for (std::size_t d = 0; d < phi.size(); ++d) k.delta_phi[d] = truth_phi[n][d] - phi[d];
      k.norm2 = dot(k.delta_phi, k.delta_phi);
      ws.add(n, std::move(k));
      ++rec.added;
    }
    rec.constraints = ws.size();
    if (rec.added == 0) {
      rec.objective = ws.primal(params.w);
      rec.dual = ws.dual();
      out.log.push_back(rec);
      out.converged = true;
      break;
    }
    out.solve_offsets.push_back(out.objective_trace.size());
    params.w = ws.solve(cfg.qp_inner, out.objective_trace);
    rec.objective = ws.primal(params.w);
    rec.dual = ws.dual();
    out.log.push_back(rec);
    logger()->debug("iteration {}: {} constraints (+{}), objective {:.6g}", iter, rec.constraints, rec.added,
                    rec.objective);
  }
  if (!out.converged)
    logger()->warn("cutting plane stopped after {} iterations without meeting tolerance {}", cfg.max_iterations,
                   cfg.tolerance);
  for (std::size_t n = 0; n < data.size(); ++n) out.slacks.push_back(ws.slack(n, params.w));
  out.params = std::move(params);
  return out;
}

}  // namespace

double max_violation(const ModelParams& params, const TrainingExample& example) {
  return most_violated(params, example).score - score(params, example.tree, example.scores, example.truth);
}

TrainedModel train_recognition(std::span<const TrainingExample> data, const MAEVocabulary& vocab,
                               const TrainConfig& cfg) {
  if (data.empty()) throw ValidationError("training set is empty");
  std::vector<LabelId> owner;
  for (const auto& c : vocab.clusters) owner.push_back(c.owner_action);
  const std::size_t root_dim = data.front().tree.root_feature().size();
  auto model = cutting_plane(ModelParams::recognition(owner, vocab.actions.size(), root_dim), data, cfg);
  model.actions = vocab.actions;
  model.labels = vocab.maes;
  model.vocab_hash = vocab.hash();
  return model;
}

TrainedModel train_parsing(std::span<const TrainingExample> data, const MAEVocabulary& scorers,
                           const TrainConfig& cfg) {
  auto model = cutting_plane(ModelParams::parsing(scorers.size()), data, cfg);
  model.labels = scorers.maes;
  model.vocab_hash = scorers.hash();
  return model;
}

void write_training_log(std::ostream& out, const TrainedModel& model) {
  out << "iteration,constraints,added,max_violation,objective,dual\n";
  char buf[256];
  for (const auto& r : model.log) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%zu,%.10g,%.10g,%.10g\n", r.iteration, r.constraints, r.added,
                  r.max_violation, r.objective, r.dual);
    out << buf;
  }
}

}  // namespace hmae
