#include "commands.hpp"

#include <fstream>
#include <map>
#include <memory>
#include <set>

#include <fmt/format.h>

#include "hmae/error.hpp"
#include "hmae/evaluation.hpp"
#include "hmae/hierarchy.hpp"
#include "hmae/log.hpp"
#include "hmae/synth.hpp"
#include "hmae/training.hpp"
#include "hmae/tree_io.hpp"
#include "hmae/util.hpp"
#include "run_support.hpp"

namespace hmae::cli {
namespace {

namespace fs = std::filesystem;

CLI::App* subcommand(CLI::App& app, const std::string& name, const std::string& help) {
  auto* sub = app.add_subcommand(name, help);
  sub->fallthrough();
  return sub;
}

void add_common(CLI::App* sub, std::uint64_t& seed, int& jobs) {
  sub->add_option("--seed", seed, "random seed")->capture_default_str();
  sub->add_option("--jobs", jobs, "worker threads across videos")->capture_default_str()->check(CLI::PositiveNumber);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string kind = "recognition";
  RecognitionSynthConfig rec;
  ParsingSynthConfig par;
  std::string split = "all";
  double noise = 0.1;
  double background_rate = -1.0;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out, metadata;
};

void run_synth(const SynthArgs& a, const CLI::App& app) {
  Manifest manifest("synth", app);
  manifest.seed(a.seed);
  const auto split = parse_split(a.split);
  const auto rate = a.background_rate < 0.0 ? std::nullopt : std::optional<double>(a.background_rate);
  SynthOutput out;
  if (a.kind == "recognition") {
    auto cfg = a.rec;
    cfg.noise = a.noise;
    cfg.seed = a.seed;
    cfg.split = split;
    cfg.background_rate = rate;
    out = generate_recognition_set(cfg);
  } else {
    auto cfg = a.par;
    cfg.noise = a.noise;
    cfg.seed = a.seed;
    cfg.split = split;
    cfg.background_rate = rate;
    out = generate_parsing_set(cfg);
  }
  const fs::path data = a.out;
  const fs::path meta = a.metadata.empty() ? fs::path(a.out + ".meta.json") : fs::path(a.metadata);
  save_dataset(data, out.dataset);
  save_metadata(meta, out.metadata);
  manifest.output(data);
  manifest.output(meta);
  manifest.write();
  logger()->info("synth: {} videos written to {}", out.dataset.videos.size(), data.string());
}

void add_synth(CLI::App& app, std::function<void()>& selected) {
  auto a = std::make_shared<SynthArgs>();
  auto* sub = subcommand(app, "synth", "generate a synthetic dataset with planted ground truth");
  sub->add_option("--kind", a->kind, "recognition or parsing")
      ->capture_default_str()
      ->check(CLI::IsMember({"recognition", "parsing"}));
  sub->add_option("--classes", a->rec.num_classes, "action classes (recognition)")->capture_default_str();
  sub->add_option("--videos", a->rec.videos_per_class, "videos per class and split (recognition)")->capture_default_str();
  sub->add_option("--maes", a->rec.maes_per_class, "planted prototypes per class (recognition)")->capture_default_str();
  sub->add_option("--frames", a->rec.frames, "frames per video (recognition)")->capture_default_str();
  sub->add_flag("--shared-bows", a->rec.shared_bows, "all classes share prototype bows and appearances");
  sub->add_option("--labels", a->par.label_vocab_size, "fine-grained labels (parsing)")->capture_default_str();
  sub->add_option("--sequences", a->par.sequences, "sequences per split (parsing)")->capture_default_str();
  sub->add_option("--instances", a->par.mean_instances_per_sequence, "mean instances per sequence (parsing)")
      ->capture_default_str();
  sub->add_option("--min-support", a->par.vocab.min_support, "composed labels need more occurrences than this")
      ->capture_default_str();
  sub->add_option("--max-length", a->par.vocab.max_length, "longest composed label")->capture_default_str();
  sub->add_option("--noise", a->noise, "descriptor noise in [0, 1)")->capture_default_str();
  sub->add_option("--background-rate", a->background_rate, "distractors per frame (negative: 5 * noise)")
      ->capture_default_str();
  sub->add_option("--split", a->split, "train, test or all")->capture_default_str();
  sub->add_option("--out", a->out, "dataset JSONL")->required();
  sub->add_option("--metadata", a->metadata, "planted metadata JSON (default: <out>.meta.json)");
  add_common(sub, a->seed, a->jobs);
  sub->callback([a, sub, &selected] { selected = [a, sub] { run_synth(*a, *sub); }; });
}

// ---------------------------------------------------------------- build-hierarchy

struct HierarchyArgs {
  HierarchyConfig cfg;
  int clusters = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string input, out;
};

void run_build_hierarchy(const HierarchyArgs& a, const CLI::App& app) {
  Manifest manifest("build-hierarchy", app);
  manifest.seed(a.seed);
  auto cfg = a.cfg;
  cfg.seed = a.seed;
  if (a.clusters > 0) cfg.num_st_clusters = a.clusters;
  cfg.validate();
  const fs::path input = a.input;
  const auto ds = load_dataset(input, peek_mode(input));
  manifest.input(input);

  std::vector<SegmentTree> trees(ds.videos.size());
  parallel_for(ds.videos.size(), a.jobs, [&](std::size_t i) { trees[i] = build_segment_tree(ds.videos[i], cfg); });
  TreeFile file;
  file.mode = ds.header.mode;
  for (std::size_t i = 0; i < trees.size(); ++i)
    file.records.push_back(make_tree_record(ds.videos[i], ds.labels, std::move(trees[i])));
  save_trees(a.out, file);
  manifest.output(a.out);
  manifest.write();
  logger()->info("build-hierarchy: {} trees written to {}", file.records.size(), a.out);
}

void add_build_hierarchy(CLI::App& app, std::function<void()>& selected) {
  auto a = std::make_shared<HierarchyArgs>();
  auto* sub = subcommand(app, "build-hierarchy", "prune proposals, pool segments and build one tree per video");
  sub->add_option("--input", a->input, "dataset JSONL")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a->out, "tree JSONL")->required();
  sub->add_option("--foreground-threshold", a->cfg.foreground_threshold, "proposal pruning threshold")
      ->capture_default_str();
  sub->add_option("--top-n", a->cfg.top_n_seed_positives, "seed positives per frame")->capture_default_str();
  sub->add_option("--clusters", a->clusters, "spatiotemporal segments per video (0: auto)")->capture_default_str();
  sub->add_option("--trim-overlap", a->cfg.trim_overlap, "redundancy trimming ratio")->capture_default_str();
  sub->add_option("--w-color", a->cfg.distance_weights.color, "appearance distance weight")->capture_default_str();
  sub->add_option("--w-shape", a->cfg.distance_weights.shape, "shape distance weight")->capture_default_str();
  sub->add_option("--w-xyt", a->cfg.distance_weights.xyt, "space-time distance weight")->capture_default_str();
  sub->add_option("--svm-c", a->cfg.svm_c, "pruning SVM regularization")->capture_default_str();
  sub->add_option("--svm-epochs", a->cfg.svm_epochs, "pruning SVM epochs")->capture_default_str();
  add_common(sub, a->seed, a->jobs);
  sub->callback([a, sub, &selected] { selected = [a, sub] { run_build_hierarchy(*a, *sub); }; });
}

// ---------------------------------------------------------------- discover-maes

struct DiscoverArgs {
  DiscoveryConfig cfg;
  int final_maes = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string input, out, diagnostics, metadata;
};

/// Node labels of every tree in the node-label space of `labels` (0 is background).
std::vector<std::vector<LabelId>> parse_node_labels(const TreeCorpus& corpus, const LabelTable& labels) {
  std::vector<std::vector<LabelId>> out;
  for (std::size_t t = 0; t < corpus.trees.size(); ++t) {
    auto z = associate_parse_labels(corpus.trees[t], corpus.annotations[t]);
    for (std::size_t i = 1; i < z.size(); ++i)
      if (z[i] > 0) z[i] = labels.id(corpus.parse_labels.name(z[i] - 1));
    out.push_back(std::move(z));
  }
  return out;
}

void run_discover(const DiscoverArgs& a, const CLI::App& app) {
  Manifest manifest("discover-maes", app);
  manifest.seed(a.seed);
  auto cfg = a.cfg;
  cfg.seed = a.seed;
  cfg.jobs = a.jobs;
  if (a.final_maes > 0) cfg.final_maes_per_action = a.final_maes;
  const auto file = load_trees(a.input);
  manifest.input(a.input);
  const auto corpus = to_corpus(file);

  MAEVocabulary vocab;
  if (file.mode == Mode::recognition) {
    for (std::size_t i = 0; i < corpus.trees.size(); ++i)
      if (corpus.action_of[i] < 0)
        throw ValidationError("tree '" + corpus.trees[i].video_id + "' carries no action label");
    vocab = discover_maes(corpus.trees, corpus.action_of, corpus.actions, cfg);
  } else {
    LabelTable space;
    space.intern("<background>");
    for (const auto& n : corpus.parse_labels.names()) space.intern(n);
    vocab = train_node_label_scorers(corpus.trees, parse_node_labels(corpus, space), corpus.parse_labels, cfg);
  }
  save_vocabulary(a.out, vocab);
  manifest.output(a.out);

  if (!a.diagnostics.empty()) {
    std::optional<SynthMetadata> meta;
    if (!a.metadata.empty()) {
      meta = load_metadata(a.metadata);
      manifest.input(a.metadata);
    }
    std::map<std::string, const SegmentTree*> by_id;
    for (const auto& t : corpus.trees) by_id[t.video_id] = &t;
    auto out = open_out(a.diagnostics);
    out << "mae,owner,size,purity\n";
    for (const auto& c : vocab.clusters) {
      std::string purity;
      if (meta && !c.members.empty()) {
        std::map<int, int> counts;
        for (const auto& m : c.members) {
          const auto* planted = meta->find(m.video_id);
          if (!planted) throw ValidationError("metadata has no video '" + m.video_id + "'");
          ++counts[planted_segment_id(*planted, by_id.at(m.video_id)->nodes.at(static_cast<std::size_t>(m.node)).member_proposals)];
        }
        int best = 0;
        for (const auto& [id, n] : counts) best = std::max(best, n);
        purity = fmt::format("{:.6f}", static_cast<double>(best) / static_cast<double>(c.members.size()));
      }
      out << vocab.maes.name(c.mae_id) << ','
          << (c.owner_action < 0 ? std::string() : vocab.actions.name(c.owner_action)) << ',' << c.members.size()
          << ',' << purity << '\n';
    }
    out.close();
    manifest.output(a.diagnostics);
  }
  manifest.write();
  logger()->info("discover-maes: {} labels, vocabulary hash {}", vocab.size(), vocab.hash());
}

void add_discover(CLI::App& app, std::function<void()>& selected) {
  auto a = std::make_shared<DiscoverArgs>();
  auto* sub = subcommand(app, "discover-maes",
                         "discover MAEs from recognition trees, or train node-label scorers from parsing trees");
  sub->add_option("--input", a->input, "tree JSONL")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a->out, "vocabulary JSON")->required();
  sub->add_option("--diagnostics", a->diagnostics, "per-MAE CSV (size, purity)");
  sub->add_option("--metadata", a->metadata, "synth metadata for purity")->check(CLI::ExistingFile);
  sub->add_option("--init-clusters", a->cfg.init_clusters_per_action, "initial clusters per action")
      ->capture_default_str();
  sub->add_option("--min-cluster-size", a->cfg.min_cluster_size, "drop smaller initial clusters")
      ->capture_default_str();
  sub->add_option("--top-k", a->cfg.top_k_detections, "detections per classifier when merging")
      ->capture_default_str();
  sub->add_option("--final-maes", a->final_maes, "MAEs per action (0: auto)")->capture_default_str();
  sub->add_option("--max-negative-ratio", a->cfg.max_negative_ratio, "negatives per positive")->capture_default_str();
  sub->add_option("--svm-c", a->cfg.svm_c, "classifier regularization")->capture_default_str();
  sub->add_option("--svm-epochs", a->cfg.svm_epochs, "classifier epochs")->capture_default_str();
  add_common(sub, a->seed, a->jobs);
  sub->callback([a, sub, &selected] { selected = [a, sub] { run_discover(*a, *sub); }; });
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  TrainConfig cfg;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string input, vocab, out, log;
};

void run_train(const TrainArgs& a, const CLI::App& app) {
  Manifest manifest("train", app);
  manifest.seed(a.seed);
  auto cfg = a.cfg;
  cfg.seed = a.seed;
  cfg.jobs = a.jobs;
  const auto file = load_trees(a.input);
  const auto vocab = load_vocabulary(a.vocab);
  manifest.input(a.input);
  manifest.input(a.vocab);
  const auto corpus = to_corpus(file);

  TrainedModel model;
  if (file.mode == Mode::recognition) {
    if (vocab.duration_feature) throw ValidationError("vocabulary holds parsing scorers, trees are recognition trees");
    std::vector<LabelId> actions;
    for (std::size_t i = 0; i < corpus.trees.size(); ++i) {
      if (corpus.action_of[i] < 0)
        throw ValidationError("tree '" + corpus.trees[i].video_id + "' carries no action label");
      actions.push_back(vocab.actions.id(corpus.actions.name(corpus.action_of[i])));
    }
    model = train_recognition(recognition_examples(corpus.trees, actions, vocab), vocab, cfg);
  } else {
    if (!vocab.duration_feature) throw ValidationError("vocabulary holds MAEs, trees are parsing trees");
    const auto examples = parsing_examples(corpus.trees, parse_node_labels(corpus, vocab.maes), vocab);
    model = train_parsing(examples, vocab, cfg);
  }
  save_model(a.out, model);
  manifest.output(a.out);
  if (!a.log.empty()) {
    auto out = open_out(a.log);
    write_training_log(out, model);
    out.close();
    manifest.output(a.log);
  }
  manifest.write();
  logger()->info("train: {} after {} iterations", model.converged ? "converged" : "stopped", model.log.size());
}

void add_train(CLI::App& app, std::function<void()>& selected) {
  auto a = std::make_shared<TrainArgs>();
  auto* sub = subcommand(app, "train", "structured SVM training");
  sub->add_option("--input", a->input, "tree JSONL with labels")->required()->check(CLI::ExistingFile);
  sub->add_option("--vocab", a->vocab, "vocabulary JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a->out, "model JSON")->required();
  sub->add_option("--log", a->log, "per-iteration CSV");
  sub->add_option("--c", a->cfg.c, "regularization trade-off")->capture_default_str();
  sub->add_option("--tolerance", a->cfg.tolerance, "constraint violation tolerance")->capture_default_str();
  sub->add_option("--max-iterations", a->cfg.max_iterations, "cutting-plane rounds")->capture_default_str();
  sub->add_option("--qp-inner", a->cfg.qp_inner, "inner QP sweeps")->capture_default_str();
  add_common(sub, a->seed, a->jobs);
  sub->callback([a, sub, &selected] { selected = [a, sub] { run_train(*a, *sub); }; });
}

// ---------------------------------------------------------------- predict / parse

struct PredictArgs {
  std::uint64_t seed = 0;
  int jobs = 1;
  double nms_iou = 0.5;
  std::string input, vocab, model, out;
};

void run_predict(const PredictArgs& a, const CLI::App& app, Mode mode) {
  Manifest manifest(mode == Mode::recognition ? "predict" : "parse", app);
  manifest.seed(a.seed);
  const auto file = load_trees(a.input);
  const auto vocab = load_vocabulary(a.vocab);
  const auto model = load_model(a.model);
  manifest.input(a.input);
  manifest.input(a.vocab);
  manifest.input(a.model);
  if (model.mode != mode)
    throw ValidationError("model is a " + to_string(model.mode) + " model; use '" +
                          (model.mode == Mode::recognition ? "predict" : "parse") + "'");
  check_vocabulary(model, vocab);

  PredictionFile out;
  out.mode = mode;
  out.vocab_hash = model.vocab_hash;
  out.predictions.resize(file.records.size());
  parallel_for(file.records.size(), a.jobs, [&](std::size_t i) {
    const auto& tree = file.records[i].tree;
    const auto scores = assign_mae_scores(vocab, tree);
    const auto result = mode == Mode::recognition ? infer(model.params, tree, scores)
                                                  : infer_parsing(model.params, tree, scores);
    auto& p = out.predictions[i];
    p.video_id = tree.video_id;
    p.score = result.score;
    if (mode == Mode::recognition) p.action = model.actions.name(result.labeling.action);
    for (LabelId z : result.labeling.node_labels)
      p.nodes.push_back(z < 0 ? std::nullopt : std::optional<std::string>(model.labels.name(z)));
    if (mode == Mode::parsing)
      for (const auto& iv : parse_to_intervals(model.params, tree, scores, result.labeling, a.nms_iou))
        p.intervals.push_back({model.labels.name(iv.label + 1), iv.span.start, iv.span.end, iv.score});
  });
  save_predictions(a.out, out);
  manifest.output(a.out);
  manifest.write();
  logger()->info("{}: {} videos", mode == Mode::recognition ? "predict" : "parse", out.predictions.size());
}

void add_predict(CLI::App& app, std::function<void()>& selected, Mode mode) {
  auto a = std::make_shared<PredictArgs>();
  auto* sub = mode == Mode::recognition
                  ? subcommand(app, "predict", "recognize the action and MAE labels of every tree")
                  : subcommand(app, "parse", "parse every tree into labeled intervals");
  sub->add_option("--input", a->input, "tree JSONL")->required()->check(CLI::ExistingFile);
  sub->add_option("--vocab", a->vocab, "vocabulary JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--model", a->model, "model JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a->out, "predictions JSONL")->required();
  if (mode == Mode::parsing)
    sub->add_option("--nms-iou", a->nms_iou, "suppression overlap for parsed intervals")->capture_default_str();
  add_common(sub, a->seed, a->jobs);
  sub->callback([a, sub, mode, &selected] { selected = [a, sub, mode] { run_predict(*a, *sub, mode); }; });
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
  std::string predictions, truth, model, out;
};

struct Truth {
  std::map<std::string, std::string> action;
  std::map<std::string, std::vector<NamedInterval>> intervals;
};

Truth load_truth(const fs::path& path) {
  Truth t;
  if (is_tree_file(path)) {
    for (const auto& r : load_trees(path).records) {
      if (r.action) t.action[r.tree.video_id] = *r.action;
      t.intervals[r.tree.video_id] = r.annotations;
    }
    return t;
  }
  const auto ds = load_dataset(path, peek_mode(path));
  for (const auto& v : ds.videos) {
    if (v.action_label) t.action[v.video_id] = ds.labels.actions.name(*v.action_label);
    auto& iv = t.intervals[v.video_id];
    if (v.parse_annotations)
      for (const auto& a : *v.parse_annotations)
        iv.push_back({ds.labels.parse_labels.name(a.label), a.start_frame, a.end_frame, a.level});
  }
  return t;
}

void run_evaluate(const EvaluateArgs& a, const CLI::App& app) {
  Manifest manifest("evaluate", app);
  manifest.seed(a.seed);
  const auto preds = load_predictions(a.predictions);
  manifest.input(a.predictions);
  if (!a.model.empty()) {
    const auto model = load_model(a.model);
    manifest.input(a.model);
    if (model.vocab_hash != preds.vocab_hash)
      throw ValidationError("vocabulary hash mismatch: model " + model.vocab_hash + ", predictions " +
                            preds.vocab_hash);
  }
  const auto truth = load_truth(a.truth);
  manifest.input(a.truth);

  auto out = open_out(a.out);
  out << "metric,label,threshold,value\n";
  if (preds.mode == Mode::recognition) {
    std::set<std::string> names;
    for (const auto& [id, name] : truth.action) names.insert(name);
    const auto table = LabelTable::sorted({names.begin(), names.end()});
    std::vector<std::pair<LabelId, LabelId>> pairs;
    for (const auto& p : preds.predictions) {
      const auto it = truth.action.find(p.video_id);
      if (it == truth.action.end()) throw ValidationError("no ground-truth action for '" + p.video_id + "'");
      const auto pred = p.action ? table.find(*p.action) : std::nullopt;
      pairs.emplace_back(pred.value_or(-1), table.id(it->second));
    }
    const auto report = per_class_accuracy(pairs);
    for (const auto& [y, acc] : report.per_class) out << "accuracy," << table.name(y) << ",," << fmt::format("{:.6f}", acc) << '\n';
    out << "accuracy,mean,," << fmt::format("{:.6f}", report.mean) << '\n';
  } else {
    std::set<std::string> names;
    std::vector<const Prediction*> covered;
    for (const auto& p : preds.predictions) {
      const auto it = truth.intervals.find(p.video_id);
      if (it == truth.intervals.end()) throw ValidationError("no ground truth for '" + p.video_id + "'");
      for (const auto& iv : it->second) names.insert(iv.label);
      for (const auto& iv : p.intervals) names.insert(iv.label);
      covered.push_back(&p);
    }
    const auto table = LabelTable::sorted({names.begin(), names.end()});
    std::vector<ScoredInterval> scored;
    std::vector<LabeledInterval> gt;
    for (const auto* p : covered) {
      for (const auto& iv : p->intervals) scored.push_back({p->video_id, table.id(iv.label), {iv.start, iv.end}, iv.score});
      for (const auto& iv : truth.intervals.at(p->video_id)) gt.push_back({p->video_id, table.id(iv.label), {iv.start, iv.end}});
    }
    const auto maps = localization_map(scored, gt, a.thresholds);
    for (std::size_t i = 0; i < maps.size(); ++i)
      out << "map,," << fmt::format("{:.2f}", a.thresholds[i]) << ',' << fmt::format("{:.6f}", maps[i]) << '\n';
  }
  out.close();
  manifest.output(a.out);
  manifest.write();
  logger()->info("evaluate: metrics written to {}", a.out);
}

void add_evaluate(CLI::App& app, std::function<void()>& selected) {
  auto a = std::make_shared<EvaluateArgs>();
  auto* sub = subcommand(app, "evaluate", "score predictions against ground truth");
  sub->add_option("--input,--predictions", a->predictions, "predictions JSONL")->required()->check(CLI::ExistingFile);
  sub->add_option("--truth", a->truth, "dataset or tree JSONL with labels")->required()->check(CLI::ExistingFile);
  sub->add_option("--model", a->model, "model JSON; its vocabulary hash must match the predictions")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", a->out, "metrics CSV")->required();
  sub->add_option("--thresholds", a->thresholds, "temporal IoU thresholds for mAP")->capture_default_str();
  add_common(sub, a->seed, a->jobs);
  sub->callback([a, sub, &selected] { selected = [a, sub] { run_evaluate(*a, *sub); }; });
}

}  // namespace

void register_commands(CLI::App& app, std::function<void()>& selected) {
  add_synth(app, selected);
  add_build_hierarchy(app, selected);
  add_discover(app, selected);
  add_train(app, selected);
  add_predict(app, selected, Mode::recognition);
  add_predict(app, selected, Mode::parsing);
  add_evaluate(app, selected);
}

}  // namespace hmae::cli
