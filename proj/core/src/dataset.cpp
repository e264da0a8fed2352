#include "hmae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "hmae/error.hpp"
#include "hmae/log.hpp"

namespace hmae {

using nlohmann::json;

std::string to_string(Mode mode) {
  return mode == Mode::recognition ? "recognition" : "parsing";
}

Mode parse_mode(std::string_view text) {
  if (text == "recognition") return Mode::recognition;
  if (text == "parsing") return Mode::parsing;
  throw ValidationError("unknown mode '" + std::string(text) + "' (expected recognition|parsing)");
}

namespace {

constexpr double kSimplexTol = 1e-6;
constexpr double kBoxTol = 1e-6;

struct RawVideo {
  std::size_t line = 0;
  VideoRecord record;
  std::optional<std::string> action;
  std::vector<std::string> parse_names;
};

const json& field(const json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw DatasetError(line, name, "missing");
  return *it;
}

template <class T>
T as(const json& value, const char* name, std::size_t line) {
  try {
    return value.get<T>();
  } catch (const json::exception& e) {
    throw DatasetError(line, name, std::string("wrong type: ") + e.what());
  }
}

std::vector<double> number_array(const json& value, const char* name, std::size_t line) {
  if (!value.is_array()) throw DatasetError(line, name, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_number()) throw DatasetError(line, name, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void check_dim(std::size_t line, const char* name, std::size_t got, std::size_t want,
               const char* header_key) {
  if (got != want)
    throw DatasetError(line, name,
                       "inconsistent descriptor dimension: record has " + std::to_string(got) +
                           ", header " + header_key + " declares " + std::to_string(want));
}

DatasetHeader parse_header(const json& j) {
  constexpr std::size_t line = 1;
  if (!j.is_object()) throw DatasetError(line, "header", "expected a JSON object");
  DatasetHeader h;
  h.d_a = as<std::size_t>(field(j, "d_a", line), "d_a", line);
  h.d_b = as<std::size_t>(field(j, "d_b", line), "d_b", line);
  h.k = as<std::size_t>(field(j, "k", line), "k", line);
  try {
    h.mode = parse_mode(as<std::string>(field(j, "mode", line), "mode", line));
  } catch (const DatasetError&) {
    throw;
  } catch (const ValidationError& e) {
    throw DatasetError(line, "mode", e.what());
  }
  if (h.d_a == 0) throw DatasetError(line, "d_a", "must be positive");
  if (h.d_b == 0) throw DatasetError(line, "d_b", "must be positive");
  if (h.k == 0) throw DatasetError(line, "k", "must be positive");
  return h;
}

ProposalDescriptor parse_proposal(const json& p, std::size_t line) {
  if (!p.is_object()) throw DatasetError(line, "proposals", "expected objects");
  ProposalDescriptor d;
  d.frame_index = as<int>(field(p, "frame_index", line), "frame_index", line);
  const auto box = number_array(field(p, "bbox", line), "bbox", line);
  if (box.size() != 4) throw DatasetError(line, "bbox", "expected [x, y, w, h]");
  d.bbox = {box[0], box[1], box[2], box[3]};
  d.appearance_hist = number_array(field(p, "appearance_hist", line), "appearance_hist", line);
  const auto& shape = field(p, "shape_feature", line);
  if (!shape.is_array()) throw DatasetError(line, "shape_feature", "expected an array");
  d.shape_feature.reserve(shape.size());
  for (const auto& s : shape) {
    const int v = as<int>(s, "shape_feature", line);
    if (v != 0 && v != 1) throw DatasetError(line, "shape_feature", "mask entries must be 0 or 1");
    d.shape_feature.push_back(static_cast<std::uint8_t>(v));
  }
  d.local_bow = number_array(field(p, "local_bow", line), "local_bow", line);
  d.objectness_score = as<double>(field(p, "objectness_score", line), "objectness_score", line);
  d.motion_score = as<double>(field(p, "motion_score", line), "motion_score", line);
  return d;
}

RawVideo parse_video(const json& j, std::size_t line) {
  if (!j.is_object()) throw DatasetError(line, "video", "expected a JSON object");
  RawVideo raw;
  raw.line = line;
  auto& v = raw.record;
  v.video_id = as<std::string>(field(j, "video_id", line), "video_id", line);
  if (v.video_id.empty()) throw DatasetError(line, "video_id", "must be non-empty");
  v.num_frames = as<int>(field(j, "num_frames", line), "num_frames", line);
  const auto& props = field(j, "proposals", line);
  if (!props.is_array()) throw DatasetError(line, "proposals", "expected an array");
  for (const auto& p : props) v.proposals.push_back(parse_proposal(p, line));
  if (auto it = j.find("action_label"); it != j.end() && !it->is_null())
    raw.action = as<std::string>(*it, "action_label", line);
  if (auto it = j.find("parse_annotations"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DatasetError(line, "parse_annotations", "expected an array");
    std::vector<ParseInterval> intervals;
    for (const auto& a : *it) {
      if (!a.is_object()) throw DatasetError(line, "parse_annotations", "expected objects");
      raw.parse_names.push_back(as<std::string>(field(a, "label", line), "label", line));
      ParseInterval pi;
      pi.start_frame = as<int>(field(a, "start_frame", line), "start_frame", line);
      pi.end_frame = as<int>(field(a, "end_frame", line), "end_frame", line);
      pi.level = a.contains("level") ? as<int>(a.at("level"), "level", line) : 1;
      intervals.push_back(pi);
    }
    v.parse_annotations = std::move(intervals);
  }
  return raw;
}

json to_json(const ProposalDescriptor& d) {
  json shape = json::array();
  for (auto s : d.shape_feature) shape.push_back(static_cast<int>(s));
  return json{{"frame_index", d.frame_index},
              {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
              {"appearance_hist", d.appearance_hist},
              {"shape_feature", std::move(shape)},
              {"local_bow", d.local_bow},
              {"objectness_score", d.objectness_score},
              {"motion_score", d.motion_score}};
}

}  // namespace

void validate_video(const VideoRecord& v, const DatasetHeader& h, std::size_t line) {
  if (v.num_frames <= 0) throw DatasetError(line, "num_frames", "must be positive");
  for (const auto& p : v.proposals) {
    if (p.frame_index < 0 || p.frame_index >= v.num_frames)
      throw DatasetError(line, "frame_index",
                         std::to_string(p.frame_index) + " outside [0, num_frames)");
    const auto& b = p.bbox;
    for (double c : {b.x, b.y, b.w, b.h})
      if (!std::isfinite(c) || c < 0.0 || c > 1.0)
        throw DatasetError(line, "bbox", "components must lie in [0,1]");
    if (b.x + b.w > 1.0 + kBoxTol || b.y + b.h > 1.0 + kBoxTol)
      throw DatasetError(line, "bbox", "box extends past the frame");

    check_dim(line, "appearance_hist", p.appearance_hist.size(), h.d_a, "d_a");
    double sum = 0.0;
    for (double a : p.appearance_hist) {
      if (!std::isfinite(a) || a < 0.0)
        throw DatasetError(line, "appearance_hist", "entries must be finite and >= 0");
      sum += a;
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
      throw DatasetError(line, "appearance_hist",
                         "must sum to 1 (got " + std::to_string(sum) + ")");

    check_dim(line, "shape_feature", p.shape_feature.size(), h.shape_dim(), "k*k");
    check_dim(line, "local_bow", p.local_bow.size(), h.d_b, "d_b");
    for (double c : p.local_bow)
      if (!std::isfinite(c) || c < 0.0)
        throw DatasetError(line, "local_bow", "entries must be finite and >= 0");
    if (!std::isfinite(p.objectness_score))
      throw DatasetError(line, "objectness_score", "must be finite");
    if (!std::isfinite(p.motion_score)) throw DatasetError(line, "motion_score", "must be finite");
  }
  if (v.parse_annotations) {
    for (const auto& a : *v.parse_annotations) {
      if (a.start_frame < 0 || a.start_frame > a.end_frame || a.end_frame >= v.num_frames)
        throw DatasetError(line, "parse_annotations",
                           "interval [" + std::to_string(a.start_frame) + ", " +
                               std::to_string(a.end_frame) + "] invalid for " +
                               std::to_string(v.num_frames) + " frames");
    }
  }
}

Dataset read_dataset(std::istream& in, Mode mode) {
  Dataset ds;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  std::vector<RawVideo> raws;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DatasetError(line, have_header ? "video" : "header", std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      if (line != 1) throw DatasetError(line, "header", "header must be the first line");
      ds.header = parse_header(j);
      if (ds.header.mode != mode)
        throw DatasetError(line, "mode",
                           "file declares " + to_string(ds.header.mode) + ", requested " + to_string(mode));
      have_header = true;
      continue;
    }
    raws.push_back(parse_video(j, line));
  }
  if (!have_header) throw DatasetError(1, "header", "missing header line");

  std::set<std::string> actions, parse_labels;
  for (const auto& r : raws) {
    if (r.action) actions.insert(*r.action);
    parse_labels.insert(r.parse_names.begin(), r.parse_names.end());
  }
  ds.labels.actions = LabelTable::sorted({actions.begin(), actions.end()});
  ds.labels.parse_labels = LabelTable::sorted({parse_labels.begin(), parse_labels.end()});

  std::set<std::string> seen;
  for (auto& r : raws) {
    if (!seen.insert(r.record.video_id).second)
      throw DatasetError(r.line, "video_id", "duplicate id '" + r.record.video_id + "'");
    if (r.action) r.record.action_label = ds.labels.actions.id(*r.action);
    if (r.record.parse_annotations)
      for (std::size_t i = 0; i < r.parse_names.size(); ++i)
        (*r.record.parse_annotations)[i].label = ds.labels.parse_labels.id(r.parse_names[i]);
    validate_video(r.record, ds.header, r.line);
    ds.videos.push_back(std::move(r.record));
  }
  std::sort(ds.videos.begin(), ds.videos.end(),
            [](const VideoRecord& a, const VideoRecord& b) { return a.video_id < b.video_id; });
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Mode mode) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in, mode);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << json{{"d_a", ds.header.d_a}, {"d_b", ds.header.d_b}, {"k", ds.header.k},
              {"mode", to_string(ds.header.mode)}}
             .dump()
      << '\n';
  for (const auto& v : ds.videos) {
    json props = json::array();
    for (const auto& p : v.proposals) props.push_back(to_json(p));
    json j{{"video_id", v.video_id}, {"num_frames", v.num_frames}, {"proposals", std::move(props)}};
    if (v.action_label) j["action_label"] = ds.labels.actions.name(*v.action_label);
    if (v.parse_annotations) {
      json ann = json::array();
      for (const auto& a : *v.parse_annotations)
        ann.push_back({{"label", ds.labels.parse_labels.name(a.label)},
                       {"start_frame", a.start_frame},
                       {"end_frame", a.end_frame},
                       {"level", a.level}});
      j["parse_annotations"] = std::move(ann);
    }
    out << j.dump() << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  write_dataset(out, ds);
}

bool normalize_l1(std::vector<double>& v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (v.empty()) return true;
  if (!(total > 0.0)) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
    return false;
  }
  for (auto& x : v) x /= total;
  return true;
}

std::vector<double> aggregate_bow(std::span<const ProposalDescriptor> proposals,
                                  std::span<const int> members) {
  if (members.empty()) throw ValidationError("aggregate_bow: empty member list");
  std::vector<double> sum(proposals[static_cast<std::size_t>(members.front())].local_bow.size(), 0.0);
  for (int m : members) {
    const auto& bow = proposals[static_cast<std::size_t>(m)].local_bow;
    if (bow.size() != sum.size()) throw ValidationError("aggregate_bow: mixed BoW dimensions");
    for (std::size_t d = 0; d < bow.size(); ++d) sum[d] += bow[d];
  }
  if (!normalize_l1(sum))
    logger()->warn("aggregate_bow: all-zero BoW over {} proposals, using the uniform vector",
                   members.size());
  return sum;
}

std::vector<double> aggregate_bow(std::span<const ProposalDescriptor> members) {
  std::vector<int> all(members.size());
  std::iota(all.begin(), all.end(), 0);
  return aggregate_bow(members, all);
}

std::vector<double> mean_appearance(std::span<const ProposalDescriptor> proposals,
                                    std::span<const int> members) {
  if (members.empty()) throw ValidationError("mean_appearance: empty member list");
  std::vector<double> mean(proposals[static_cast<std::size_t>(members.front())].appearance_hist.size(), 0.0);
  for (int m : members) {
    const auto& a = proposals[static_cast<std::size_t>(m)].appearance_hist;
    for (std::size_t d = 0; d < a.size(); ++d) mean[d] += a[d];
  }
  for (auto& x : mean) x /= static_cast<double>(members.size());
  return mean;
}

}  // namespace hmae
