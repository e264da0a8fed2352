#include <doctest.h>

#include <cmath>
#include <map>

#include "generators.hpp"
#include "hmae/error.hpp"
#include "hmae/parse_vocab.hpp"
#include "hmae/synth.hpp"

using namespace hmae;

namespace {

std::vector<double> track_bow(const VideoRecord& v, const PlantedVideo& planted, int proto) {
  std::vector<int> members;
  for (std::size_t i = 0; i < v.proposals.size(); ++i)
    if (planted.prototype[i] == proto) members.push_back(static_cast<int>(i));
  return aggregate_bow(v.proposals, members);
}

std::vector<std::vector<std::string>> repeat(const std::vector<std::string>& seq, int times) {
  return std::vector<std::vector<std::string>>(static_cast<std::size_t>(times), seq);
}

bool has(const std::vector<ComposedLabel>& vocab, const std::string& name) {
  return std::any_of(vocab.begin(), vocab.end(), [&](const ComposedLabel& c) { return c.name == name; });
}

}  // namespace

TEST_CASE("zero noise reproduces prototype bows exactly") {
  RecognitionSynthConfig cfg;
  cfg.num_classes = 2;
  cfg.videos_per_class = 4;
  cfg.noise = 0.0;
  cfg.split = Split::train;
  const auto out = generate_recognition_set(cfg);
  std::map<int, std::vector<double>> first;
  for (const auto& v : out.dataset.videos) {
    const auto& planted = *out.metadata.find(v.video_id);
    std::set<int> protos;
    for (int p : planted.prototype)
      if (p >= 0) protos.insert(p);
    for (int p : protos) {
      const auto bow = track_bow(v, planted, p);
      auto [it, fresh] = first.emplace(p, bow);
      if (!fresh)
        for (std::size_t d = 0; d < bow.size(); ++d) CHECK(bow[d] == doctest::Approx(it->second[d]).epsilon(1e-12));
    }
  }
  CHECK(first.size() == 6);
}

TEST_CASE("shared prototypes leave the video bag indistinguishable across classes") {
  RecognitionSynthConfig cfg;
  cfg.num_classes = 2;
  cfg.videos_per_class = 40;
  cfg.shared_bows = true;
  cfg.split = Split::train;
  cfg.seed = 7;
  const auto out = generate_recognition_set(cfg);
  std::vector<std::vector<double>> bags[2];
  for (const auto& v : out.dataset.videos) bags[*v.action_label].push_back(aggregate_bow(v.proposals));
  // Welch statistic per codeword; Bonferroni over the 32 codewords at 1%.
  for (std::size_t d = 0; d < cfg.d_b; ++d) {
    double mean[2] = {}, var[2] = {};
    for (int c = 0; c < 2; ++c) {
      for (const auto& b : bags[c]) mean[c] += b[d];
      mean[c] /= static_cast<double>(bags[c].size());
      for (const auto& b : bags[c]) var[c] += (b[d] - mean[c]) * (b[d] - mean[c]);
      var[c] /= static_cast<double>(bags[c].size() - 1);
    }
    const double se = std::sqrt(var[0] / bags[0].size() + var[1] / bags[1].size());
    const double t = se > 0 ? (mean[0] - mean[1]) / se : 0.0;
    CHECK(std::abs(t) < 3.6);
  }
}

TEST_CASE("generators are deterministic and emit valid records") {
  RecognitionSynthConfig rc;
  rc.num_classes = 3;
  rc.videos_per_class = 3;
  rc.seed = 11;
  const auto a = generate_recognition_set(rc);
  CHECK(a.dataset == generate_recognition_set(rc).dataset);
  CHECK(a.metadata == generate_recognition_set(rc).metadata);
  CHECK(a.dataset.videos.size() == 18);
  for (const auto& v : a.dataset.videos) {
    CHECK_NOTHROW(validate_video(v, a.dataset.header));
    CHECK(a.metadata.find(v.video_id)->prototype.size() == v.proposals.size());
  }
  rc.seed = 12;
  CHECK_FALSE(a.dataset == generate_recognition_set(rc).dataset);

  ParsingSynthConfig pc;
  pc.sequences = 6;
  pc.vocab.min_support = 1;
  const auto p = generate_parsing_set(pc);
  CHECK(p.dataset == generate_parsing_set(pc).dataset);
  for (const auto& v : p.dataset.videos) CHECK_NOTHROW(validate_video(v, p.dataset.header));
}

TEST_CASE("metadata survives JSON") {
  RecognitionSynthConfig rc;
  rc.num_classes = 2;
  rc.videos_per_class = 2;
  const auto a = generate_recognition_set(rc);
  CHECK(metadata_from_json(metadata_to_json(a.metadata)) == a.metadata);
  ParsingSynthConfig pc;
  pc.sequences = 20;
  const auto p = generate_parsing_set(pc);
  CHECK(metadata_from_json(metadata_to_json(p.metadata)) == p.metadata);
}

TEST_CASE("parsing annotations recover the planted instances") {
  ParsingSynthConfig cfg;
  cfg.label_vocab_size = 2;
  cfg.mean_instances_per_sequence = 1;
  cfg.sequences = 12;
  cfg.noise = 0.0;
  cfg.split = Split::train;
  const auto out = generate_parsing_set(cfg);
  const auto& names = out.dataset.labels.parse_labels;
  for (const auto& v : out.dataset.videos) {
    const auto& planted = *out.metadata.find(v.video_id);
    REQUIRE(v.parse_annotations.has_value());
    std::vector<std::string> frame_label(static_cast<std::size_t>(v.num_frames));
    int covered = 0;
    for (const auto& a : *v.parse_annotations) {
      if (a.level != 1) continue;
      for (int f = a.start_frame; f <= a.end_frame; ++f) {
        CHECK(frame_label[static_cast<std::size_t>(f)].empty());
        frame_label[static_cast<std::size_t>(f)] = names.name(a.label);
        ++covered;
      }
    }
    CHECK(covered == v.num_frames);
    for (std::size_t i = 0; i < v.proposals.size(); ++i) {
      const int proto = planted.prototype[i];
      if (proto < 0) continue;
      CHECK(frame_label[static_cast<std::size_t>(v.proposals[i].frame_index)] ==
            out.metadata.prototype_names[static_cast<std::size_t>(proto)]);
    }
  }
}

TEST_CASE("composed labels need more than the minimum support") {
  ParseVocabConfig cfg;
  auto seqs = repeat({"a", "b"}, 12);
  for (auto& s : repeat({"c", "d"}, 9)) seqs.push_back(s);
  for (auto& s : repeat({"e", "f"}, 10)) seqs.push_back(s);
  const auto vocab = compose_parse_vocabulary(seqs, cfg);
  CHECK(has(vocab, "a-b"));
  CHECK(has(vocab, "a"));
  CHECK_FALSE(has(vocab, "c-d"));
  CHECK_FALSE(has(vocab, "c"));
  CHECK_FALSE(has(vocab, "e-f"));
  CHECK(compose_name({"x", "y", "z"}) == "x-y-z");
}

TEST_CASE("composition respects the maximum length and counts every position") {
  ParseVocabConfig cfg;
  cfg.min_support = 0;
  cfg.max_length = 2;
  const auto vocab = compose_parse_vocabulary({{"a", "a", "a"}}, cfg);
  REQUIRE(vocab.size() == 2);
  CHECK(vocab[0].name == "a");
  CHECK(vocab[0].support == 3);
  CHECK(vocab[1].name == "a-a");
  CHECK(vocab[1].support == 2);
}

TEST_CASE("annotated n-grams span their parts") {
  const std::vector<FineInstance> inst{{"a", 0, 4}, {"b", 5, 9}, {"a", 10, 12}};
  const std::vector<ComposedLabel> vocab{{{"a"}, "a", 11}, {{"a", "b"}, "a-b", 11}};
  const std::map<std::string, LabelId> ids{{"a", 0}, {"a-b", 1}};
  const auto ann = annotate_sequence(inst, vocab, ids);
  REQUIRE(ann.size() == 3);
  CHECK(ann[0] == ParseInterval{0, 0, 4, 1});
  CHECK(ann[1] == ParseInterval{1, 0, 9, 2});
  CHECK(ann[2] == ParseInterval{0, 10, 12, 1});
}

TEST_CASE("planted identity is the modal prototype") {
  PlantedVideo v;
  v.prototype = {2, 2, 1, 1, 1, -1};
  CHECK(planted_segment_id(v, {0, 1, 2, 3, 4}) == 1);
  CHECK(planted_segment_id(v, {0, 2}) == 1);
}

TEST_CASE("synth configuration guards") {
  RecognitionSynthConfig rc;
  rc.noise = 1.0;
  CHECK_THROWS_AS(rc.validate(), ValidationError);
  rc.noise = 0.1;
  rc.d_b = 0;
  CHECK_THROWS_AS(rc.validate(), ValidationError);
  ParsingSynthConfig pc;
  pc.sequences = 0;
  CHECK_THROWS_AS(pc.validate(), ValidationError);
  CHECK(parse_split("test") == Split::test);
  CHECK_THROWS_AS(parse_split("dev"), ValidationError);
}
