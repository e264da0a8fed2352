#include "hmae/tree_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hmae/error.hpp"

namespace hmae {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError("invalid " + what + ": " + e.what());
  }
}

// Calls f(parsed, line_number) for every non-blank line.
template <class F>
void for_each_json_line(std::istream& in, const std::string& what, F&& f) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(text), line);
    } catch (const json::exception& e) {
      throw ValidationError(what + " line " + std::to_string(line) + ": " + e.what());
    }
  }
}

json segment_to_json(const SpatioTemporalSegment& s) {
  return {{"segment_id", s.segment_id},
          {"members", s.member_proposals},
          {"span", {s.time_span.start, s.time_span.end}},
          {"bbox", {s.mean_bbox.x, s.mean_bbox.y, s.mean_bbox.w, s.mean_bbox.h}},
          {"bow", s.bow},
          {"appearance", s.appearance}};
}

SpatioTemporalSegment segment_from_json(const json& j) {
  SpatioTemporalSegment s;
  s.segment_id = j.at("segment_id").get<int>();
  s.member_proposals = j.at("members").get<std::vector<int>>();
  const auto span = j.at("span").get<std::vector<int>>();
  if (span.size() != 2) throw ValidationError("segment span must have two entries");
  s.time_span = {span[0], span[1]};
  const auto box = j.at("bbox").get<std::vector<double>>();
  if (box.size() != 4) throw ValidationError("segment bbox must have four entries");
  s.mean_bbox = {box[0], box[1], box[2], box[3]};
  s.bow = j.at("bow").get<std::vector<double>>();
  s.appearance = j.at("appearance").get<std::vector<double>>();
  return s;
}

json classifier_to_json(const LinearSvmModel& m) {
  return {{"weights", m.weights}, {"bias", m.bias}, {"c", m.c}};
}

LinearSvmModel classifier_from_json(const json& j) {
  return {j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>(), j.at("c").get<double>()};
}

json nullable_name(const LabelTable& table, LabelId id) {
  return id < 0 ? json(nullptr) : json(table.name(id));
}

}  // namespace

TreeRecord make_tree_record(const VideoRecord& video, const LabelSpaces& labels, SegmentTree tree) {
  TreeRecord r;
  r.tree = std::move(tree);
  if (video.action_label) r.action = labels.actions.name(*video.action_label);
  if (video.parse_annotations)
    for (const auto& a : *video.parse_annotations)
      r.annotations.push_back({labels.parse_labels.name(a.label), a.start_frame, a.end_frame, a.level});
  return r;
}

void write_trees(std::ostream& out, const TreeFile& file) {
  out << json{{"format", "hmae-trees"}, {"mode", to_string(file.mode)}}.dump() << '\n';
  for (const auto& r : file.records) {
    json nodes = json::array();
    for (const auto& n : r.tree.nodes) nodes.push_back(segment_to_json(n));
    json j{{"video_id", r.tree.video_id},
           {"num_frames", r.tree.num_frames},
           {"parent", r.tree.parent},
           {"nodes", std::move(nodes)}};
    if (r.action) j["action"] = *r.action;
    if (!r.annotations.empty()) {
      json ann = json::array();
      for (const auto& a : r.annotations)
        ann.push_back({{"label", a.label}, {"start_frame", a.start}, {"end_frame", a.end}, {"level", a.level}});
      j["annotations"] = std::move(ann);
    }
    out << j.dump() << '\n';
  }
}

TreeFile read_trees(std::istream& in) {
  TreeFile file;
  bool have_header = false;
  for_each_json_line(in, "tree file", [&](const json& j, std::size_t line) {
    if (!have_header) {
      if (j.value("format", "") != "hmae-trees")
        throw ValidationError("tree file line " + std::to_string(line) + ": missing hmae-trees header");
      file.mode = parse_mode(j.at("mode").get<std::string>());
      have_header = true;
      return;
    }
    TreeRecord r;
    r.tree.video_id = j.at("video_id").get<std::string>();
    r.tree.num_frames = j.at("num_frames").get<int>();
    r.tree.parent = j.at("parent").get<std::vector<int>>();
    for (const auto& n : j.at("nodes")) r.tree.nodes.push_back(segment_from_json(n));
    if (j.contains("action")) r.action = j.at("action").get<std::string>();
    if (j.contains("annotations"))
      for (const auto& a : j.at("annotations"))
        r.annotations.push_back({a.at("label").get<std::string>(), a.at("start_frame").get<int>(),
                                 a.at("end_frame").get<int>(), a.at("level").get<int>()});
    try {
      r.tree.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("tree file line " + std::to_string(line) + " ('" + r.tree.video_id + "'): " + e.what());
    }
    file.records.push_back(std::move(r));
  });
  if (!have_header) throw ValidationError("tree file is empty");
  return file;
}

void save_trees(const std::filesystem::path& path, const TreeFile& file) {
  auto out = open_out(path);
  write_trees(out, file);
}

TreeFile load_trees(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_trees(in);
}

TreeCorpus to_corpus(const TreeFile& file) {
  TreeCorpus c;
  std::set<std::string> actions, parse;
  for (const auto& r : file.records) {
    if (r.action) actions.insert(*r.action);
    for (const auto& a : r.annotations) parse.insert(a.label);
  }
  c.actions = LabelTable::sorted({actions.begin(), actions.end()});
  c.parse_labels = LabelTable::sorted({parse.begin(), parse.end()});
  for (const auto& r : file.records) {
    c.trees.push_back(r.tree);
    c.action_of.push_back(r.action ? c.actions.id(*r.action) : -1);
    std::vector<ParseInterval> ann;
    for (const auto& a : r.annotations) ann.push_back({c.parse_labels.id(a.label), a.start, a.end, a.level});
    c.annotations.push_back(std::move(ann));
  }
  return c;
}

std::string vocabulary_to_json(const MAEVocabulary& vocab) {
  json maes = json::array();
  for (const auto& c : vocab.clusters) {
    json members = json::array();
    for (const auto& m : c.members) members.push_back({m.video_id, m.node});
    maes.push_back({{"name", vocab.maes.name(c.mae_id)},
                    {"owner", nullable_name(vocab.actions, c.owner_action)},
                    {"members", std::move(members)},
                    {"classifier", classifier_to_json(c.classifier)}});
  }
  json j{{"format", "hmae-vocabulary"},
         {"hash", vocab.hash()},
         {"feature_dim", vocab.feature_dim},
         {"duration_feature", vocab.duration_feature},
         {"actions", vocab.actions.names()},
         {"maes", std::move(maes)}};
  return j.dump(1);
}

MAEVocabulary vocabulary_from_json(const std::string& text) {
  return guarded("vocabulary", [&] {
    const auto j = json::parse(text);
    if (j.value("format", "") != "hmae-vocabulary") throw ValidationError("not a vocabulary file");
    MAEVocabulary v;
    v.feature_dim = j.at("feature_dim").get<std::size_t>();
    v.duration_feature = j.at("duration_feature").get<bool>();
    v.actions = LabelTable(j.at("actions").get<std::vector<std::string>>());
    for (const auto& m : j.at("maes")) {
      MaeCluster c;
      c.mae_id = v.maes.intern(m.at("name").get<std::string>());
      if (static_cast<std::size_t>(c.mae_id) != v.clusters.size()) throw ValidationError("duplicate MAE name");
      c.owner_action = m.at("owner").is_null() ? -1 : v.actions.id(m.at("owner").get<std::string>());
      for (const auto& ref : m.at("members")) c.members.push_back({ref.at(0).get<std::string>(), ref.at(1).get<int>()});
      c.classifier = classifier_from_json(m.at("classifier"));
      if (c.classifier.weights.size() != v.feature_dim + (v.duration_feature ? 1 : 0))
        throw ValidationError("classifier dimension differs from feature_dim");
      v.clusters.push_back(std::move(c));
    }
    const auto stored = j.at("hash").get<std::string>();
    if (stored != v.hash())
      throw ValidationError("vocabulary hash mismatch: file says " + stored + ", contents hash to " + v.hash());
    return v;
  });
}

void save_vocabulary(const std::filesystem::path& path, const MAEVocabulary& vocab) {
  auto out = open_out(path);
  out << vocabulary_to_json(vocab) << '\n';
}

MAEVocabulary load_vocabulary(const std::filesystem::path& path) { return vocabulary_from_json(slurp(path)); }

std::string model_to_json(const TrainedModel& model) {
  const auto& p = model.params;
  const auto& L = p.layout;
  auto block = [&](std::size_t count, std::size_t width, auto offset) {
    json rows = json::array();
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t o = offset(static_cast<LabelId>(i));
      rows.push_back(std::vector<double>(p.w.begin() + static_cast<std::ptrdiff_t>(o),
                                         p.w.begin() + static_cast<std::ptrdiff_t>(o + width)));
    }
    return rows;
  };
  json owner = json::array();
  for (LabelId o : p.owner) owner.push_back(nullable_name(model.actions, o));
  json j{{"format", "hmae-model"},
         {"mode", to_string(model.mode)},
         {"vocab_hash", model.vocab_hash},
         {"actions", model.actions.names()},
         {"labels", model.labels.names()},
         {"owner", std::move(owner)},
         {"root_dim", L.root_dim},
         {"converged", model.converged},
         {"alpha", block(L.num_labels, 2, [&](LabelId h) { return L.alpha(h); })},
         {"beta_spatial", block(L.num_labels, kSpatialBins, [&](LabelId h) { return L.beta_spatial(h); })},
         {"beta_temporal", block(L.num_labels, kTemporalBins, [&](LabelId h) { return L.beta_temporal(h); })},
         {"eta", block(L.num_classes, L.root_dim, [&](LabelId y) { return L.eta(y); })},
         {"slacks", model.slacks}};
  return j.dump(1);
}

TrainedModel model_from_json(const std::string& text) {
  return guarded("model", [&] {
    const auto j = json::parse(text);
    if (j.value("format", "") != "hmae-model") throw ValidationError("not a model file");
    TrainedModel m;
    m.mode = parse_mode(j.at("mode").get<std::string>());
    m.vocab_hash = j.at("vocab_hash").get<std::string>();
    m.actions = LabelTable(j.at("actions").get<std::vector<std::string>>());
    m.labels = LabelTable(j.at("labels").get<std::vector<std::string>>());
    m.converged = j.at("converged").get<bool>();
    m.slacks = j.at("slacks").get<std::vector<double>>();
    if (m.mode == Mode::recognition) {
      std::vector<LabelId> owner;
      for (const auto& o : j.at("owner")) owner.push_back(m.actions.id(o.get<std::string>()));
      m.params = ModelParams::recognition(std::move(owner), m.actions.size(), j.at("root_dim").get<std::size_t>());
    } else {
      m.params = ModelParams::parsing(m.labels.size());
    }
    const auto& L = m.params.layout;
    if (L.num_labels != m.labels.size()) throw ValidationError("owner table and label table differ in size");
    auto fill = [&](const char* key, std::size_t count, std::size_t width, auto offset) {
      const auto rows = j.at(key).get<std::vector<std::vector<double>>>();
      if (rows.size() != count) throw ValidationError(std::string("model block '") + key + "' has the wrong length");
      for (std::size_t i = 0; i < count; ++i) {
        if (rows[i].size() != width) throw ValidationError(std::string("model block '") + key + "' has the wrong width");
        std::copy(rows[i].begin(), rows[i].end(), m.params.w.begin() + static_cast<std::ptrdiff_t>(offset(static_cast<LabelId>(i))));
      }
    };
    fill("alpha", L.num_labels, 2, [&](LabelId h) { return L.alpha(h); });
    fill("beta_spatial", L.num_labels, kSpatialBins, [&](LabelId h) { return L.beta_spatial(h); });
    fill("beta_temporal", L.num_labels, kTemporalBins, [&](LabelId h) { return L.beta_temporal(h); });
    fill("eta", L.num_classes, L.root_dim, [&](LabelId y) { return L.eta(y); });
    m.params.validate();
    return m;
  });
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  auto out = open_out(path);
  out << model_to_json(model) << '\n';
}

TrainedModel load_model(const std::filesystem::path& path) { return model_from_json(slurp(path)); }

void check_vocabulary(const TrainedModel& model, const MAEVocabulary& vocab) {
  if (model.vocab_hash != vocab.hash())
    throw ValidationError("vocabulary hash mismatch: model expects " + model.vocab_hash + ", vocabulary is " +
                          vocab.hash());
}

void write_predictions(std::ostream& out, const PredictionFile& file) {
  out << json{{"format", "hmae-predictions"}, {"mode", to_string(file.mode)}, {"vocab_hash", file.vocab_hash}}.dump()
      << '\n';
  for (const auto& p : file.predictions) {
    json nodes = json::array();
    for (const auto& n : p.nodes) nodes.push_back(n ? json(*n) : json(nullptr));
    json j{{"video_id", p.video_id}, {"score", p.score}, {"nodes", std::move(nodes)}};
    if (p.action) j["action"] = *p.action;
    if (file.mode == Mode::parsing) {
      json iv = json::array();
      for (const auto& i : p.intervals)
        iv.push_back({{"label", i.label}, {"start_frame", i.start}, {"end_frame", i.end}, {"score", i.score}});
      j["intervals"] = std::move(iv);
    }
    out << j.dump() << '\n';
  }
}

PredictionFile read_predictions(std::istream& in) {
  PredictionFile file;
  bool have_header = false;
  for_each_json_line(in, "predictions", [&](const json& j, std::size_t line) {
    if (!have_header) {
      if (j.value("format", "") != "hmae-predictions")
        throw ValidationError("predictions line " + std::to_string(line) + ": missing hmae-predictions header");
      file.mode = parse_mode(j.at("mode").get<std::string>());
      file.vocab_hash = j.at("vocab_hash").get<std::string>();
      have_header = true;
      return;
    }
    Prediction p;
    p.video_id = j.at("video_id").get<std::string>();
    p.score = j.at("score").get<double>();
    for (const auto& n : j.at("nodes"))
      p.nodes.push_back(n.is_null() ? std::nullopt : std::optional<std::string>(n.get<std::string>()));
    if (j.contains("action")) p.action = j.at("action").get<std::string>();
    if (j.contains("intervals"))
      for (const auto& i : j.at("intervals"))
        p.intervals.push_back({i.at("label").get<std::string>(), i.at("start_frame").get<int>(),
                               i.at("end_frame").get<int>(), i.at("score").get<double>()});
    file.predictions.push_back(std::move(p));
  });
  if (!have_header) throw ValidationError("predictions file is empty");
  return file;
}

void save_predictions(const std::filesystem::path& path, const PredictionFile& file) {
  auto out = open_out(path);
  write_predictions(out, file);
}

PredictionFile load_predictions(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_predictions(in);
}

}  // namespace hmae
