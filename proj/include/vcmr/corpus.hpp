// Copyright 2026 The VCMR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Corpus data model, the "VCMF" feature format, the JSON-lines manifest, and
// the synthetic corpus generator.

#ifndef VCMR_CORPUS_HPP_
#define VCMR_CORPUS_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vcmr {

// Raw per-frame input features, float32 row-major as stored on disk.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kMaxSubtitleTokens = 64;

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inclusive on both ends.
struct FrameSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  friend bool operator==(const FrameSpan&, const FrameSpan&) = default;
};

// Frames [start_frame, end_frame) carry this sentence.
struct SubtitleSpan {
  std::vector<int> tokens;
  int start_frame = 0;
  int end_frame = 0;

  int frame_count() const { return end_frame - start_frame; }
  friend bool operator==(const SubtitleSpan&, const SubtitleSpan&) = default;
};

struct VideoRecord {
  std::string video_id;
  int n_frames = 0;
  std::string feature_path;  // relative to the manifest directory
  std::vector<SubtitleSpan> subtitles;

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct QueryRecord {
  std::string query_id;
  std::vector<int> tokens;
  std::string target_video_id;
  FrameSpan moment;
  std::string split = "train";
  std::vector<int> concepts;  // generator provenance, empty for real data

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

// Everything needed to rebuild the generator's nearest-neighbour oracle.
struct GeneratorRecipe {
  std::uint64_t seed = 0;
  int n_concepts = 0;            // total, query concepts first
  int background_concepts = 0;   // trailing concepts used only off-moment
  int tokens_per_concept = 0;
  int dim = 0;
  double noise_sigma = 0.1;
  Eigen::MatrixXd concept_vectors;  // n_concepts x dim, unit rows
  Eigen::MatrixXd projection;       // dim x dim

  // Latent vector of a concept set: normalized sum of its concept rows.
  Eigen::VectorXd latent(const std::vector<int>& concepts) const;
  // Noise-free frame feature for a concept set.
  Eigen::VectorXd feature_of(const std::vector<int>& concepts) const;

  friend bool operator==(const GeneratorRecipe&, const GeneratorRecipe&);
};

struct CorpusManifest {
  std::vector<VideoRecord> videos;
  std::vector<QueryRecord> queries;
  std::optional<GeneratorRecipe> recipe;

  const VideoRecord* find_video(const std::string& id) const;
  int video_index(const std::string& id) const;  // -1 when absent
  std::vector<const QueryRecord*> split(const std::string& name) const;

  friend bool operator==(const CorpusManifest&,
                         const CorpusManifest&) = default;
};

// VCMF: "VCMF", u32 LE rows, u32 LE dim, rows*dim float32 LE row-major.
void write_features(std::ostream& out, const FeatureMatrix& m);
void write_features(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_features(std::istream& in, const std::string& source);
FeatureMatrix read_features(const std::filesystem::path& path);
// Reads only the header; returns {rows, dim}.
std::pair<std::uint32_t, std::uint32_t> read_feature_header(
    const std::filesystem::path& path);

// Throws CorpusError naming the offending record.
void validate_video(const VideoRecord& video);
void validate_manifest(const CorpusManifest& manifest);

CorpusManifest parse_manifest(std::istream& in,
                              const std::filesystem::path& root);
CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path,
                   const CorpusManifest& manifest);
std::string manifest_to_jsonl(const CorpusManifest& manifest);

// Loads every video's features in manifest order.
std::vector<FeatureMatrix> load_all_features(
    const CorpusManifest& manifest, const std::filesystem::path& root);

// Splits a video's features into per-sentence frame groups. The groups
// concatenate back to `features` exactly.
std::vector<std::pair<SubtitleSpan, FeatureMatrix>> align_frames_to_subtitles(
    const VideoRecord& video, const FeatureMatrix& features);

struct SyntheticCorpusOptions {
  int n_videos = 50;
  int frames_per_video = 32;
  int dim = 16;
  int vocab_size = 64;
  std::uint64_t seed = 7;
  int queries_per_video = 2;   // planted moments per video
  int queries_per_moment = 3;  // independent token draws per moment
  double val_fraction = 0.2;
  double noise_sigma = 0.1;
  int n_concepts = 0;  // query concepts; 0 picks max(4, vocab_size / 4)
  int background_concepts = 4;
};

struct SyntheticCorpus {
  CorpusManifest manifest;
  std::vector<FeatureMatrix> features;  // parallel to manifest.videos
};

// Each video is a sequence of concept segments, one subtitle per segment.
// Planted moments carry a concept pair unique in the corpus; background
// segments carry a single concept from a separate background pool. Every
// planted moment is described by queries_per_moment queries with
// independently drawn tokens.
SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusOptions& opts);

// Writes manifest.jsonl and features/<video_id>.vcmf under `dir`.
void save_corpus(const std::filesystem::path& dir,
                 const SyntheticCorpus& corpus);

struct LoadedCorpus {
  CorpusManifest manifest;
  std::vector<FeatureMatrix> features;
};
LoadedCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace vcmr

#endif  // VCMR_CORPUS_HPP_
