#include "hmae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hmae/error.hpp"
#include "hmae/util.hpp"

namespace hmae {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::all: return "all";
  }
  return "all";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  if (text == "all") return Split::all;
  throw ValidationError("unknown split '" + std::string(text) + "' (expected train|test|all)");
}

void RecognitionSynthConfig::validate() const {
  if (num_classes < 1 || videos_per_class < 1 || maes_per_class < 1)
    throw ValidationError("synth: class, video and MAE counts must be >= 1");
  if (!(noise >= 0.0 && noise < 1.0)) throw ValidationError("synth: noise must lie in [0, 1)");
  if (frames < maes_per_class) throw ValidationError("synth: need at least one frame per prototype");
  if (d_a < 4 || d_b < 4 || k < 1) throw ValidationError("synth: descriptor dimensions too small");
  if (background_rate && *background_rate < 0.0) throw ValidationError("synth: background_rate must be >= 0");
}

void ParsingSynthConfig::validate() const {
  if (label_vocab_size < 1 || sequences < 1 || mean_instances_per_sequence < 1)
    throw ValidationError("synth: label, sequence and instance counts must be >= 1");
  if (label_vocab_size > 20) throw ValidationError("synth: at most 20 fine labels");
  if (!(noise >= 0.0 && noise < 1.0)) throw ValidationError("synth: noise must lie in [0, 1)");
  if (min_instance_frames < 1 || max_instance_frames < min_instance_frames)
    throw ValidationError("synth: invalid instance length range");
  if (d_a < 4 || d_b < 4 || k < 1) throw ValidationError("synth: descriptor dimensions too small");
  if (background_rate && *background_rate < 0.0) throw ValidationError("synth: background_rate must be >= 0");
  vocab.validate();
}

const PlantedVideo* SynthMetadata::find(const std::string& video_id) const {
  for (const auto& v : videos)
    if (v.video_id == video_id) return &v;
  return nullptr;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<double> normalized(std::vector<double> v) {
  normalize_l1(v);
  return v;
}

// Probability vector with most of its mass on `support` random bins.
std::vector<double> peaked_simplex(Rng& rng, std::size_t dim, std::size_t support, double floor) {
  std::vector<double> v(dim, floor);
  std::vector<std::size_t> bins(dim);
  std::iota(bins.begin(), bins.end(), 0);
  std::shuffle(bins.begin(), bins.end(), rng);
  for (std::size_t i = 0; i < std::min(support, dim); ++i) v[bins[i]] += uniform(rng, 0.5, 1.5);
  return normalized(std::move(v));
}

std::vector<double> diffuse_simplex(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = uniform(rng);
  return normalized(std::move(v));
}

struct Prototype {
  std::vector<double> bow;
  std::vector<double> appearance;
  std::vector<std::uint8_t> mask;
  int cell = 0;
  double w = 0.1, h = 0.1;
};

Prototype make_prototype(Rng& rng, std::size_t d_a, std::size_t d_b, std::size_t k, int cell) {
  Prototype p;
  p.bow = peaked_simplex(rng, d_b, 4, 0.01);
  p.appearance = peaked_simplex(rng, d_a, 2, 0.005);
  p.mask.resize(k * k);
  for (auto& m : p.mask) m = uniform(rng) < 0.5 ? 1 : 0;
  p.cell = cell;
  p.w = uniform(rng, 0.08, 0.14);
  p.h = uniform(rng, 0.08, 0.14);
  return p;
}

BBox place_box(double cx, double cy, double w, double h) {
  w = std::clamp(w, 0.01, 1.0);
  h = std::clamp(h, 0.01, 1.0);
  const double x = std::clamp(cx - 0.5 * w, 0.0, 1.0 - w);
  const double y = std::clamp(cy - 0.5 * h, 0.0, 1.0 - h);
  return {x, y, w, h};
}

struct TrackState {
  double dx = 0.0, dy = 0.0;
};

ProposalDescriptor foreground(Rng& rng, const Prototype& p, int frame, const TrackState& track, double noise) {
  ProposalDescriptor d;
  d.frame_index = frame;
  const double cx = (p.cell % 5 + 0.5) / 5.0 + track.dx + uniform(rng, -0.01, 0.01);
  const double cy = (p.cell / 5 + 0.5) / 5.0 + track.dy + uniform(rng, -0.01, 0.01);
  d.bbox = place_box(cx, cy, p.w * (1.0 + noise * uniform(rng, -0.5, 0.5)), p.h * (1.0 + noise * uniform(rng, -0.5, 0.5)));
  d.appearance_hist = p.appearance;
  d.local_bow.resize(p.bow.size());
  if (noise > 0.0) {
    const auto a = diffuse_simplex(rng, p.appearance.size());
    for (std::size_t i = 0; i < a.size(); ++i) d.appearance_hist[i] = (1.0 - noise) * p.appearance[i] + noise * a[i];
    d.appearance_hist = normalized(std::move(d.appearance_hist));
    const auto b = diffuse_simplex(rng, p.bow.size());
    for (std::size_t i = 0; i < b.size(); ++i) d.local_bow[i] = 10.0 * ((1.0 - noise) * p.bow[i] + noise * b[i]);
  } else {
    for (std::size_t i = 0; i < p.bow.size(); ++i) d.local_bow[i] = 10.0 * p.bow[i];
  }
  d.shape_feature = p.mask;
  for (auto& m : d.shape_feature)
    if (uniform(rng) < 0.5 * noise) m = 1 - m;
  d.objectness_score = uniform(rng, 0.7, 1.0);
  d.motion_score = uniform(rng, 0.6, 1.0);
  return d;
}

ProposalDescriptor background(Rng& rng, int frame, std::size_t d_a, std::size_t d_b, std::size_t k) {
  ProposalDescriptor d;
  d.frame_index = frame;
  d.bbox = place_box(uniform(rng), uniform(rng), uniform(rng, 0.06, 0.2), uniform(rng, 0.06, 0.2));
  d.appearance_hist = diffuse_simplex(rng, d_a);
  d.local_bow.resize(d_b);
  for (auto& b : d.local_bow) b = 10.0 * uniform(rng) / static_cast<double>(d_b) * 2.0;
  d.shape_feature.resize(k * k);
  for (auto& m : d.shape_feature) m = uniform(rng) < 0.5 ? 1 : 0;
  d.objectness_score = uniform(rng, 0.0, 0.4);
  d.motion_score = uniform(rng, 0.0, 0.4);
  return d;
}

int background_count(Rng& rng, double rate) {
  const double whole = std::floor(rate);
  return static_cast<int>(whole) + (uniform(rng) < rate - whole ? 1 : 0);
}

std::string padded(int v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

std::vector<Split> splits_of(Split s) {
  if (s == Split::all) return {Split::train, Split::test};
  return {s};
}

std::uint64_t split_salt(Split s) { return s == Split::train ? 0x7121 : 0x7e57; }

void finish_dataset(Dataset& ds, std::vector<std::pair<VideoRecord, PlantedVideo>>& rows, SynthMetadata& meta) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first.video_id < b.first.video_id; });
  for (auto& [video, planted] : rows) {
    validate_video(video, ds.header);
    ds.videos.push_back(std::move(video));
    meta.videos.push_back(std::move(planted));
  }
}

}  // namespace

SynthOutput generate_recognition_set(const RecognitionSynthConfig& cfg) {
  cfg.validate();
  const int C = cfg.num_classes, P = cfg.maes_per_class;
  Rng world(mix_seed(cfg.seed, 0xA11));

  std::vector<int> cells(25);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), world);
  auto cell_of = [&](int c, int p) {
    const int slot = c * P + p;
    return slot < 25 ? cells[static_cast<std::size_t>(slot)] : static_cast<int>(world() % 25);
  };
  std::vector<std::vector<Prototype>> protos(static_cast<std::size_t>(C));
  std::vector<Prototype> shared;
  for (int p = 0; p < P && cfg.shared_bows; ++p) shared.push_back(make_prototype(world, cfg.d_a, cfg.d_b, cfg.k, 0));
  for (int c = 0; c < C; ++c)
    for (int p = 0; p < P; ++p) {
      Prototype proto = cfg.shared_bows ? shared[static_cast<std::size_t>(p)]
                                        : make_prototype(world, cfg.d_a, cfg.d_b, cfg.k, 0);
      proto.cell = cell_of(c, p);
      protos[static_cast<std::size_t>(c)].push_back(std::move(proto));
    }
  std::vector<std::vector<int>> order(static_cast<std::size_t>(C));
  for (auto& o : order) {
    o.resize(static_cast<std::size_t>(P));
    std::iota(o.begin(), o.end(), 0);
    std::shuffle(o.begin(), o.end(), world);
  }

  SynthOutput out;
  auto& ds = out.dataset;
  ds.header = {cfg.d_a, cfg.d_b, cfg.k, Mode::recognition};
  std::vector<std::string> class_names;
  for (int c = 0; c < C; ++c) class_names.push_back("class" + padded(c, 2));
  ds.labels.actions = LabelTable::sorted(class_names);
  auto& meta = out.metadata;
  meta.kind = "recognition";
  meta.seed = cfg.seed;
  for (int c = 0; c < C; ++c)
    for (int p = 0; p < P; ++p) meta.prototype_names.push_back(class_names[static_cast<std::size_t>(c)] + "/p" + std::to_string(p));

  std::vector<std::pair<VideoRecord, PlantedVideo>> rows;
  for (Split split : splits_of(cfg.split))
    for (int c = 0; c < C; ++c)
      for (int v = 0; v < cfg.videos_per_class; ++v) {
        Rng rng(mix_seed(mix_seed(cfg.seed, split_salt(split)), static_cast<std::uint64_t>(c) * 100000 + v));
        VideoRecord video;
        PlantedVideo planted;
        video.video_id = to_string(split) + "-" + class_names[static_cast<std::size_t>(c)] + "-" + padded(v, 4);
        video.num_frames = cfg.frames;
        video.action_label = ds.labels.actions.id(class_names[static_cast<std::size_t>(c)]);
        planted.video_id = video.video_id;
        planted.split = split;
        std::vector<TrackState> tracks(static_cast<std::size_t>(P));
        for (auto& t : tracks) t = {uniform(rng, -0.04, 0.04), uniform(rng, -0.04, 0.04)};
        for (int f = 0; f < cfg.frames; ++f) {
          const int slot = std::min(P - 1, f * P / cfg.frames);
          const int p = order[static_cast<std::size_t>(c)][static_cast<std::size_t>(slot)];
          video.proposals.push_back(foreground(rng, protos[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)], f,
                                               tracks[static_cast<std::size_t>(p)], cfg.noise));
          planted.prototype.push_back(c * P + p);
          for (int b = background_count(rng, cfg.background_rate.value_or(5.0 * cfg.noise)); b > 0; --b) {
            video.proposals.push_back(background(rng, f, cfg.d_a, cfg.d_b, cfg.k));
            planted.prototype.push_back(-1);
          }
        }
        rows.emplace_back(std::move(video), std::move(planted));
      }
  finish_dataset(ds, rows, meta);
  return out;
}

namespace {

struct ParsingWorld {
  std::vector<Prototype> labels;
  std::vector<std::vector<int>> scripts;
};

ParsingWorld make_parsing_world(const ParsingSynthConfig& cfg) {
  Rng world(mix_seed(cfg.seed, 0xBA5E));
  ParsingWorld w;
  for (int l = 0; l < cfg.label_vocab_size; ++l) w.labels.push_back(make_prototype(world, cfg.d_a, cfg.d_b, cfg.k, 0));
  // Scripts partition the fine labels into ordered pairs (plus one singleton
  // when the count is odd), so planted composites nest over fine instances.
  // The parts of a script share one appearance and occupy horizontally
  // adjacent grid cells.
  std::vector<int> order(static_cast<std::size_t>(cfg.label_vocab_size));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), world);
  std::vector<int> slots(10);  // row * 2 + side; side 0 uses columns 0-1, side 1 columns 3-4
  std::iota(slots.begin(), slots.end(), 0);
  std::shuffle(slots.begin(), slots.end(), world);
  for (std::size_t i = 0; i < order.size(); i += 2) {
    const std::size_t script = i / 2;
    w.scripts.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(i + 2, order.size())));
    const auto& parts = w.scripts.back();
    const int slot = slots[script];
    const int base = (slot / 2) * 5 + (slot % 2) * 3;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      auto& proto = w.labels[static_cast<std::size_t>(parts[j])];
      proto.cell = base + static_cast<int>(j);
      proto.appearance = w.labels[static_cast<std::size_t>(parts[0])].appearance;
    }
  }
  return w;
}

struct Sequence {
  VideoRecord video;
  PlantedVideo planted;
  std::vector<FineInstance> instances;
};

Sequence make_sequence(const ParsingSynthConfig& cfg, const ParsingWorld& world, Split split, int index) {
  Rng rng(mix_seed(mix_seed(cfg.seed, split_salt(split) ^ 0x5E9), static_cast<std::uint64_t>(index)));
  const int target = std::max(1, cfg.mean_instances_per_sequence + static_cast<int>(rng() % 3) - 1);
  std::vector<int> labels;
  while (static_cast<int>(labels.size()) < target) {
    const auto& s = world.scripts[rng() % world.scripts.size()];
    labels.insert(labels.end(), s.begin(), s.end());
  }
  Sequence seq;
  seq.video.video_id = to_string(split) + "-seq" + padded(index, 4);
  seq.planted.video_id = seq.video.video_id;
  seq.planted.split = split;
  int frame = 0;
  for (int label : labels) {
    const int len = cfg.min_instance_frames +
                    static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.max_instance_frames - cfg.min_instance_frames + 1));
    const auto& proto = world.labels[static_cast<std::size_t>(label)];
    const TrackState track{uniform(rng, -0.04, 0.04), uniform(rng, -0.04, 0.04)};
    for (int f = frame; f < frame + len; ++f) {
      seq.video.proposals.push_back(foreground(rng, proto, f, track, cfg.noise));
      seq.planted.prototype.push_back(label);
      for (int b = background_count(rng, cfg.background_rate.value_or(5.0 * cfg.noise)); b > 0; --b) {
        seq.video.proposals.push_back(background(rng, f, cfg.d_a, cfg.d_b, cfg.k));
        seq.planted.prototype.push_back(-1);
      }
    }
    seq.instances.push_back({"f" + padded(label, 2), frame, frame + len - 1});
    frame += len;
  }
  seq.video.num_frames = frame;
  return seq;
}

}  // namespace

SynthOutput generate_parsing_set(const ParsingSynthConfig& cfg) {
  cfg.validate();
  const auto world = make_parsing_world(cfg);

  // The label vocabulary always comes from the training split.
  std::vector<std::vector<std::string>> train_sequences;
  for (int i = 0; i < cfg.sequences; ++i) {
    std::vector<std::string> names;
    for (const auto& inst : make_sequence(cfg, world, Split::train, i).instances) names.push_back(inst.label);
    train_sequences.push_back(std::move(names));
  }
  const auto vocab = compose_parse_vocabulary(train_sequences, cfg.vocab);

  SynthOutput out;
  auto& ds = out.dataset;
  ds.header = {cfg.d_a, cfg.d_b, cfg.k, Mode::parsing};
  auto& meta = out.metadata;
  meta.kind = "parsing";
  meta.seed = cfg.seed;
  meta.parse_vocabulary = vocab;
  for (int l = 0; l < cfg.label_vocab_size; ++l) meta.prototype_names.push_back("f" + padded(l, 2));

  std::map<std::string, LabelId> provisional;
  for (std::size_t i = 0; i < vocab.size(); ++i) provisional[vocab[i].name] = static_cast<LabelId>(i);

  std::vector<std::pair<VideoRecord, PlantedVideo>> rows;
  std::vector<std::vector<ParseInterval>> raw;
  for (Split split : splits_of(cfg.split))
    for (int i = 0; i < cfg.sequences; ++i) {
      auto seq = make_sequence(cfg, world, split, i);
      raw.push_back(annotate_sequence(seq.instances, vocab, provisional));
      rows.emplace_back(std::move(seq.video), std::move(seq.planted));
    }
  std::set<std::string> used;
  for (const auto& r : raw)
    for (const auto& a : r) used.insert(vocab[static_cast<std::size_t>(a.label)].name);
  ds.labels.parse_labels = LabelTable::sorted({used.begin(), used.end()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto& a : raw[r]) a.label = ds.labels.parse_labels.id(vocab[static_cast<std::size_t>(a.label)].name);
    rows[r].first.parse_annotations = std::move(raw[r]);
  }
  finish_dataset(ds, rows, meta);
  return out;
}

std::string metadata_to_json(const SynthMetadata& meta) {
  json videos = json::array();
  for (const auto& v : meta.videos)
    videos.push_back({{"video_id", v.video_id}, {"split", to_string(v.split)}, {"prototype", v.prototype}});
  json vocab = json::array();
  for (const auto& c : meta.parse_vocabulary)
    vocab.push_back({{"name", c.name}, {"parts", c.parts}, {"support", c.support}});
  json j{{"kind", meta.kind},
         {"seed", meta.seed},
         {"prototype_names", meta.prototype_names},
         {"parse_vocabulary", std::move(vocab)},
         {"videos", std::move(videos)}};
  return j.dump(1);
}

SynthMetadata metadata_from_json(const std::string& text) {
  SynthMetadata meta;
  try {
    const auto j = json::parse(text);
    meta.kind = j.at("kind").get<std::string>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.prototype_names = j.at("prototype_names").get<std::vector<std::string>>();
    for (const auto& c : j.at("parse_vocabulary"))
      meta.parse_vocabulary.push_back(
          {c.at("parts").get<std::vector<std::string>>(), c.at("name").get<std::string>(), c.at("support").get<int>()});
    for (const auto& v : j.at("videos"))
      meta.videos.push_back({v.at("video_id").get<std::string>(), parse_split(v.at("split").get<std::string>()),
                             v.at("prototype").get<std::vector<int>>()});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid synth metadata: ") + e.what());
  }
  return meta;
}

void save_metadata(const std::filesystem::path& path, const SynthMetadata& meta) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << metadata_to_json(meta) << '\n';
}

SynthMetadata load_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open metadata '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return metadata_from_json(ss.str());
}

int planted_segment_id(const PlantedVideo& video, const std::vector<int>& members) {
  std::map<int, int> counts;
  for (int m : members) ++counts[video.prototype.at(static_cast<std::size_t>(m))];
  int best = -1, best_count = -1;
  for (const auto& [id, n] : counts)
    if (n > best_count) {
      best = id;
      best_count = n;
    }
  return best;
}

InferenceResult brute_force_map(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores,
                                const LossSpec& loss) {
  const std::size_t M = tree.num_segments();
  std::vector<std::pair<LabelId, std::vector<LabelId>>> classes;
  if (params.mode == Mode::recognition) {
    for (std::size_t y = 0; y < params.layout.num_classes; ++y) {
      std::vector<LabelId> own;
      for (std::size_t h = 0; h < params.owner.size(); ++h)
        if (params.owner[h] == static_cast<LabelId>(y)) own.push_back(static_cast<LabelId>(h));
      classes.emplace_back(static_cast<LabelId>(y), std::move(own));
    }
  } else {
    std::vector<LabelId> all(params.layout.num_labels);
    std::iota(all.begin(), all.end(), 0);
    classes.emplace_back(-1, std::move(all));
  }
  double total = 0.0;
  for (const auto& [y, own] : classes) total += std::pow(static_cast<double>(std::max<std::size_t>(own.size(), 1)), M);
  if (total > 1e7) throw ValidationError("brute_force_map: search space too large");

  InferenceResult best;
  bool have = false;
  auto consider = [&](Labeling&& cand, double value) {
    if (!have || value > best.score || (value == best.score && tie_break_less(cand, best.labeling))) {
      best.labeling = std::move(cand);
      best.score = value;
      have = true;
    }
  };
  for (const auto& [y, own] : classes) {
    const double action_loss = (loss.y_true && *loss.y_true != y) ? 1.0 : 0.0;
    if (own.empty() && M > 0) {
      Labeling lab{y, std::vector<LabelId>(tree.nodes.size(), -1)};
      consider(std::move(lab), root_potential(params, tree, y) + action_loss);
      continue;
    }
    std::vector<std::size_t> digit(M, 0);
    for (;;) {
      Labeling lab{y, std::vector<LabelId>(tree.nodes.size(), -1)};
      for (std::size_t i = 0; i < M; ++i) lab.node_labels[i + 1] = own[digit[i]];
      double value = score(params, tree, scores, lab) + action_loss;
      if (loss.z_true) value += parsing_loss(*loss.z_true, lab.node_labels);
      consider(std::move(lab), value);
      std::size_t pos = M;
      while (pos > 0) {
        --pos;
        if (++digit[pos] < own.size()) break;
        digit[pos] = 0;
        if (pos == 0) {
          pos = M + 1;
          break;
        }
      }
      if (M == 0 || pos == M + 1) break;
    }
  }
  return best;
}

}  // namespace hmae
