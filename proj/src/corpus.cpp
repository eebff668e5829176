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

#include "vcmr/corpus.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace vcmr {
namespace {

using json = nlohmann::json;

constexpr std::array<char, 4> kFeatureMagic = {'V', 'C', 'M', 'F'};
constexpr std::size_t kFeatureHeaderBytes = 12;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff),
                         static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff),
                         static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

// Reads up to n bytes; returns how many arrived.
std::size_t read_bytes(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

std::pair<std::uint32_t, std::uint32_t> parse_header(std::istream& in,
                                                      const std::string& src) {
  unsigned char header[kFeatureHeaderBytes];
  const std::size_t got = read_bytes(in, header, kFeatureHeaderBytes);
  if (got < 4 || !std::equal(kFeatureMagic.begin(), kFeatureMagic.end(),
                             reinterpret_cast<const char*>(header))) {
    throw FormatError(src + ": bad magic, expected \"VCMF\"");
  }
  if (got < kFeatureHeaderBytes) {
    throw FormatError(src + ": truncated header, expected " +
                      std::to_string(kFeatureHeaderBytes) + " bytes, got " +
                      std::to_string(got));
  }
  return {get_u32(header + 4), get_u32(header + 8)};
}

json span_to_json(const SubtitleSpan& s) {
  return json{{"tokens", s.tokens},
              {"start_frame", s.start_frame},
              {"end_frame", s.end_frame}};
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw CorpusError("generator: " + field + " not an array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols =
      rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) {
      throw CorpusError("generator: ragged matrix in " + field);
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json video_to_json(const VideoRecord& v) {
  json subs = json::array();
  for (const auto& s : v.subtitles) subs.push_back(span_to_json(s));
  return json{{"kind", "video"},
              {"video_id", v.video_id},
              {"n_frames", v.n_frames},
              {"feature_path", v.feature_path},
              {"subtitles", std::move(subs)}};
}

json query_to_json(const QueryRecord& q) {
  json j{{"kind", "query"},
         {"query_id", q.query_id},
         {"tokens", q.tokens},
         {"target_video_id", q.target_video_id},
         {"moment", {{"start", q.moment.start}, {"end", q.moment.end}}},
         {"split", q.split}};
  if (!q.concepts.empty()) j["concepts"] = q.concepts;
  return j;
}

json recipe_to_json(const GeneratorRecipe& r) {
  return json{{"kind", "generator"},
              {"seed", r.seed},
              {"n_concepts", r.n_concepts},
              {"background_concepts", r.background_concepts},
              {"tokens_per_concept", r.tokens_per_concept},
              {"dim", r.dim},
              {"noise_sigma", r.noise_sigma},
              {"concept_vectors", matrix_to_json(r.concept_vectors)},
              {"projection", matrix_to_json(r.projection)}};
}

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  if (!j.contains(name)) {
    throw CorpusError(where + ": missing field \"" + name + "\"");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw CorpusError(where + ": bad field \"" + name + "\": " + e.what());
  }
}

VideoRecord video_from_json(const json& j, std::size_t line) {
  const std::string where = "line " + std::to_string(line);
  VideoRecord v;
  v.video_id = field<std::string>(j, "video_id", where);
  const std::string vwhere = "video " + v.video_id;
  v.n_frames = field<int>(j, "n_frames", vwhere);
  v.feature_path = field<std::string>(j, "feature_path", vwhere);
  for (const auto& s : field<json>(j, "subtitles", vwhere)) {
    SubtitleSpan span;
    span.tokens = field<std::vector<int>>(s, "tokens", vwhere);
    span.start_frame = field<int>(s, "start_frame", vwhere);
    span.end_frame = field<int>(s, "end_frame", vwhere);
    v.subtitles.push_back(std::move(span));
  }
  return v;
}

QueryRecord query_from_json(const json& j, std::size_t line) {
  const std::string where = "line " + std::to_string(line);
  QueryRecord q;
  q.query_id = field<std::string>(j, "query_id", where);
  const std::string qwhere = "query " + q.query_id;
  q.tokens = field<std::vector<int>>(j, "tokens", qwhere);
  q.target_video_id = field<std::string>(j, "target_video_id", qwhere);
  const json moment = field<json>(j, "moment", qwhere);
  q.moment.start = field<int>(moment, "start", qwhere);
  q.moment.end = field<int>(moment, "end", qwhere);
  if (j.contains("split")) q.split = field<std::string>(j, "split", qwhere);
  if (j.contains("concepts")) {
    q.concepts = field<std::vector<int>>(j, "concepts", qwhere);
  }
  return q;
}

GeneratorRecipe recipe_from_json(const json& j) {
  const std::string where = "generator";
  GeneratorRecipe r;
  r.seed = field<std::uint64_t>(j, "seed", where);
  r.n_concepts = field<int>(j, "n_concepts", where);
  if (j.contains("background_concepts")) {
    r.background_concepts = field<int>(j, "background_concepts", where);
  }
  r.tokens_per_concept = field<int>(j, "tokens_per_concept", where);
  r.dim = field<int>(j, "dim", where);
  r.noise_sigma = field<double>(j, "noise_sigma", where);
  r.concept_vectors =
      matrix_from_json(field<json>(j, "concept_vectors", where), "concept_vectors");
  r.projection = matrix_from_json(field<json>(j, "projection", where), "projection");
  return r;
}

}  // namespace

Eigen::VectorXd GeneratorRecipe::latent(const std::vector<int>& concepts) const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(concept_vectors.cols());
  for (int c : concepts) z += concept_vectors.row(c).transpose();
  return z.normalized();
}

Eigen::VectorXd GeneratorRecipe::feature_of(
    const std::vector<int>& concepts) const {
  return projection * latent(concepts);
}

bool operator==(const GeneratorRecipe& a, const GeneratorRecipe& b) {
  auto same = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return a.seed == b.seed && a.n_concepts == b.n_concepts &&
         a.background_concepts == b.background_concepts &&
         a.tokens_per_concept == b.tokens_per_concept && a.dim == b.dim &&
         a.noise_sigma == b.noise_sigma &&
         same(a.concept_vectors, b.concept_vectors) &&
         same(a.projection, b.projection);
}

const VideoRecord* CorpusManifest::find_video(const std::string& id) const {
  const int i = video_index(id);
  return i < 0 ? nullptr : &videos[static_cast<std::size_t>(i)];
}

int CorpusManifest::video_index(const std::string& id) const {
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].video_id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<const QueryRecord*> CorpusManifest::split(
    const std::string& name) const {
  std::vector<const QueryRecord*> out;
  for (const auto& q : queries) {
    if (q.split == name) out.push_back(&q);
  }
  return out;
}

void write_features(std::ostream& out, const FeatureMatrix& m) {
  out.write(kFeatureMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      put_u32(out, std::bit_cast<std::uint32_t>(m(i, j)));
    }
  }
}

void write_features(const std::filesystem::path& path,
                    const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  write_features(out, m);
  if (!out) throw FormatError("write failed: " + path.string());
}

FeatureMatrix read_features(std::istream& in, const std::string& source) {
  const auto [rows, dim] = parse_header(in, source);
  const std::size_t expected =
      static_cast<std::size_t>(rows) * static_cast<std::size_t>(dim) * 4;
  std::vector<unsigned char> payload(expected);
  const std::size_t got = read_bytes(in, payload.data(), expected);
  if (got != expected) {
    throw FormatError(source + ": truncated payload, expected " +
                      std::to_string(expected + kFeatureHeaderBytes) +
                      " bytes, got " +
                      std::to_string(got + kFeatureHeaderBytes));
  }
  FeatureMatrix m(rows, dim);
  const unsigned char* p = payload.data();
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j, p += 4) {
      const float v = std::bit_cast<float>(get_u32(p));
      if (!std::isfinite(v)) {
        throw FormatError(source + ": non-finite value at row " +
                          std::to_string(i) + ", column " + std::to_string(j));
      }
      m(i, j) = v;
    }
  }
  return m;
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing feature file: " + path.string());
  return read_features(in, path.string());
}

std::pair<std::uint32_t, std::uint32_t> read_feature_header(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing feature file: " + path.string());
  return parse_header(in, path.string());
}

void validate_video(const VideoRecord& v) {
  const std::string who = "video " + v.video_id + ": ";
  if (v.video_id.empty()) throw CorpusError("video with empty video_id");
  if (v.n_frames < 1) throw CorpusError(who + "n_frames must be >= 1");
  int cursor = 0;
  for (std::size_t i = 0; i < v.subtitles.size(); ++i) {
    const auto& s = v.subtitles[i];
    const std::string sub = who + "subtitle " + std::to_string(i) + " ";
    if (s.start_frame < 0 || s.end_frame > v.n_frames ||
        s.start_frame >= s.end_frame) {
      throw CorpusError(sub + "span [" + std::to_string(s.start_frame) + ", " +
                        std::to_string(s.end_frame) +
                        ") outside video frame range [0, " +
                        std::to_string(v.n_frames) + ")");
    }
    if (s.start_frame < cursor) {
      throw CorpusError(sub + "overlaps or is out of order");
    }
    if (s.start_frame > cursor) {
      throw CorpusError(sub + "leaves a coverage gap at frame " +
                        std::to_string(cursor));
    }
    if (s.tokens.empty() ||
        static_cast<int>(s.tokens.size()) > kMaxSubtitleTokens) {
      throw CorpusError(sub + "token count must be in [1, " +
                        std::to_string(kMaxSubtitleTokens) + "]");
    }
    cursor = s.end_frame;
  }
  if (cursor != v.n_frames) {
    throw CorpusError(who + "subtitles do not cover frames [" +
                      std::to_string(cursor) + ", " +
                      std::to_string(v.n_frames) + ")");
  }
}

void validate_manifest(const CorpusManifest& m) {
  std::set<std::string> video_ids;
  for (const auto& v : m.videos) {
    validate_video(v);
    if (!video_ids.insert(v.video_id).second) {
      throw CorpusError("duplicate video_id " + v.video_id);
    }
  }
  std::set<std::string> query_ids;
  for (const auto& q : m.queries) {
    const std::string who = "query " + q.query_id + ": ";
    if (q.query_id.empty()) throw CorpusError("query with empty query_id");
    if (!query_ids.insert(q.query_id).second) {
      throw CorpusError("duplicate query_id " + q.query_id);
    }
    if (q.tokens.empty()) throw CorpusError(who + "empty token list");
    const VideoRecord* v = m.find_video(q.target_video_id);
    if (!v) {
      throw CorpusError(who + "unknown target video " + q.target_video_id);
    }
    if (q.moment.start < 0 || q.moment.start > q.moment.end ||
        q.moment.end >= v->n_frames) {
      throw CorpusError(who + "moment [" + std::to_string(q.moment.start) +
                        ", " + std::to_string(q.moment.end) +
                        "] outside video " + v->video_id);
    }
  }
}

std::string manifest_to_jsonl(const CorpusManifest& m) {
  std::ostringstream out;
  if (m.recipe) out << recipe_to_json(*m.recipe).dump() << '\n';
  for (const auto& v : m.videos) out << video_to_json(v).dump() << '\n';
  for (const auto& q : m.queries) out << query_to_json(q).dump() << '\n';
  return out.str();
}

void save_manifest(const std::filesystem::path& path,
                   const CorpusManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot open for writing: " + path.string());
  out << manifest_to_jsonl(m);
}

CorpusManifest parse_manifest(std::istream& in,
                              const std::filesystem::path& root) {
  CorpusManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError("line " + std::to_string(line_no) +
                        ": invalid JSON: " + e.what());
    }
    const auto kind = field<std::string>(j, "kind", "line " + std::to_string(line_no));
    if (kind == "video") {
      m.videos.push_back(video_from_json(j, line_no));
    } else if (kind == "query") {
      m.queries.push_back(query_from_json(j, line_no));
    } else if (kind == "generator") {
      if (m.recipe) throw CorpusError("more than one generator record");
      m.recipe = recipe_from_json(j);
    } else {
      throw CorpusError("line " + std::to_string(line_no) + ": unknown kind \"" +
                        kind + "\"");
    }
  }
  validate_manifest(m);
  for (const auto& v : m.videos) {
    const auto path = root / v.feature_path;
    if (!std::filesystem::exists(path)) {
      throw CorpusError("video " + v.video_id + ": missing feature file " +
                        path.string());
    }
    const auto [rows, dim] = read_feature_header(path);
    if (static_cast<int>(rows) != v.n_frames) {
      throw CorpusError("video " + v.video_id + ": feature file has " +
                        std::to_string(rows) + " rows, n_frames is " +
                        std::to_string(v.n_frames));
    }
    (void)dim;
  }
  return m;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open manifest: " + path.string());
  return parse_manifest(in, path.parent_path());
}

std::vector<FeatureMatrix> load_all_features(
    const CorpusManifest& manifest, const std::filesystem::path& root) {
  std::vector<FeatureMatrix> out;
  out.reserve(manifest.videos.size());
  std::optional<Eigen::Index> dim;
  for (const auto& v : manifest.videos) {
    out.push_back(read_features(root / v.feature_path));
    if (dim && out.back().cols() != *dim) {
      throw CorpusError("video " + v.video_id +
                        ": feature dim differs from the rest of the corpus");
    }
    dim = out.back().cols();
  }
  return out;
}

std::vector<std::pair<SubtitleSpan, FeatureMatrix>> align_frames_to_subtitles(
    const VideoRecord& video, const FeatureMatrix& features) {
  validate_video(video);
  if (features.rows() != video.n_frames) {
    throw CorpusError("video " + video.video_id + ": feature rows (" +
                      std::to_string(features.rows()) + ") != n_frames (" +
                      std::to_string(video.n_frames) + ")");
  }
  std::vector<std::pair<SubtitleSpan, FeatureMatrix>> groups;
  groups.reserve(video.subtitles.size());
  for (const auto& s : video.subtitles) {
    groups.emplace_back(s, features.middleRows(s.start_frame, s.frame_count()));
  }
  return groups;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusOptions& o) {
  if (o.n_videos < 1 || o.frames_per_video < 1 || o.vocab_size < 1) {
    throw CorpusError("generator: counts must be >= 1");
  }
  if (o.dim < 4) throw CorpusError("generator: dim must be >= 4");
  if (o.queries_per_video < 0 || o.queries_per_moment < 1) {
    throw CorpusError("generator: query counts out of range");
  }
  if (o.background_concepts < 1) {
    throw CorpusError("generator: background_concepts must be >= 1");
  }
  const int n_query_concepts =
      o.n_concepts > 0 ? o.n_concepts : std::max(4, o.vocab_size / 4);
  if (n_query_concepts < 2) throw CorpusError("generator: need >= 2 query concepts");
  const int n_concepts = n_query_concepts + o.background_concepts;
  if (o.vocab_size < n_concepts) {
    throw CorpusError("generator: vocab_size " + std::to_string(o.vocab_size) +
                      " < number of concepts " + std::to_string(n_concepts));
  }

  std::mt19937_64 rng(o.seed);
  auto uniform_int = [&rng](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  std::normal_distribution<double> normal(0.0, 1.0);

  GeneratorRecipe recipe;
  recipe.seed = o.seed;
  recipe.n_concepts = n_concepts;
  recipe.background_concepts = o.background_concepts;
  recipe.tokens_per_concept = o.vocab_size / n_concepts;
  recipe.dim = o.dim;
  recipe.noise_sigma = o.noise_sigma;
  recipe.concept_vectors.resize(n_concepts, o.dim);
  for (int c = 0; c < n_concepts; ++c) {
    for (int j = 0; j < o.dim; ++j) recipe.concept_vectors(c, j) = normal(rng);
    recipe.concept_vectors.row(c).normalize();
  }
  // Random rotation: Q factor of a Gaussian matrix, signs fixed by R's diagonal.
  Eigen::MatrixXd gaussian(o.dim, o.dim);
  for (int i = 0; i < o.dim; ++i) {
    for (int j = 0; j < o.dim; ++j) gaussian(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < o.dim; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  recipe.projection = q;

  std::vector<std::array<int, 2>> pairs;
  for (int a = 0; a < n_query_concepts; ++a) {
    for (int b = a + 1; b < n_query_concepts; ++b) pairs.push_back({a, b});
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  std::size_t next_pair = 0;

  auto draw_token = [&](const std::vector<int>& concepts) {
    const int c = concepts[static_cast<std::size_t>(
        uniform_int(0, static_cast<int>(concepts.size()) - 1))];
    return c * recipe.tokens_per_concept +
           uniform_int(0, recipe.tokens_per_concept - 1);
  };

  std::uniform_real_distribution<double> noise(-o.noise_sigma, o.noise_sigma);
  const int frames = o.frames_per_video;
  const int min_len = std::max(1, frames / 8);
  const int max_len = std::max(min_len, frames / 4);

  SyntheticCorpus out;
  out.manifest.recipe = recipe;
  int query_counter = 0;
  for (int vi = 0; vi < o.n_videos; ++vi) {
    char id[16];
    std::snprintf(id, sizeof(id), "v%04d", vi);
    VideoRecord video;
    video.video_id = id;
    video.n_frames = frames;
    video.feature_path = std::string("features/") + id + ".vcmf";

    std::vector<std::pair<int, int>> segments;  // [start, end)
    for (int at = 0; at < frames;) {
      int len = uniform_int(min_len, max_len);
      if (frames - at - len < min_len) len = frames - at;
      segments.emplace_back(at, at + len);
      at += len;
    }

    std::vector<std::size_t> order(segments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_planted =
        std::min(order.size(), static_cast<std::size_t>(o.queries_per_video));

    std::vector<std::vector<int>> segment_concepts(segments.size());
    for (std::size_t s = 0; s < segments.size(); ++s) {
      segment_concepts[s] = {uniform_int(n_query_concepts, n_concepts - 1)};
    }
    std::vector<std::size_t> planted(order.begin(),
                                     order.begin() + static_cast<long>(n_planted));
    std::sort(planted.begin(), planted.end());
    for (std::size_t s : planted) {
      const auto& pr = pairs[next_pair++ % pairs.size()];
      segment_concepts[s] = {pr[0], pr[1]};
    }

    FeatureMatrix feats(frames, o.dim);
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const Eigen::VectorXd clean = recipe.feature_of(segment_concepts[s]);
      for (int f = segments[s].first; f < segments[s].second; ++f) {
        for (int j = 0; j < o.dim; ++j) {
          feats(f, j) = static_cast<float>(clean(j) + noise(rng));
        }
      }
      SubtitleSpan sub;
      sub.start_frame = segments[s].first;
      sub.end_frame = segments[s].second;
      const int n_tokens = uniform_int(2, 5);
      for (int t = 0; t < n_tokens; ++t) {
        sub.tokens.push_back(draw_token(segment_concepts[s]));
      }
      video.subtitles.push_back(std::move(sub));
    }

    for (std::size_t s : planted) {
      for (int r = 0; r < o.queries_per_moment; ++r) {
        QueryRecord q;
        char qid[16];
        std::snprintf(qid, sizeof(qid), "q%05d", query_counter++);
        q.query_id = qid;
        q.target_video_id = video.video_id;
        q.moment = {segments[s].first, segments[s].second - 1};
        q.concepts = segment_concepts[s];
        // Every concept of the moment appears at least once.
        for (int c : q.concepts) q.tokens.push_back(draw_token({c}));
        const int n_tokens = uniform_int(4, 6);
        while (static_cast<int>(q.tokens.size()) < n_tokens) {
          q.tokens.push_back(draw_token(q.concepts));
        }
        std::shuffle(q.tokens.begin(), q.tokens.end(), rng);
        out.manifest.queries.push_back(std::move(q));
      }
    }

    out.manifest.videos.push_back(std::move(video));
    out.features.push_back(std::move(feats));
  }

  std::vector<std::size_t> qorder(out.manifest.queries.size());
  for (std::size_t i = 0; i < qorder.size(); ++i) qorder[i] = i;
  std::shuffle(qorder.begin(), qorder.end(), rng);
  const auto n_val = static_cast<std::size_t>(
      std::floor(o.val_fraction * static_cast<double>(qorder.size())));
  for (std::size_t i = 0; i < n_val; ++i) {
    out.manifest.queries[qorder[i]].split = "val";
  }
  return out;
}

void save_corpus(const std::filesystem::path& dir,
                 const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir / "features");
  for (std::size_t i = 0; i < corpus.manifest.videos.size(); ++i) {
    write_features(dir / corpus.manifest.videos[i].feature_path,
                   corpus.features[i]);
  }
  save_manifest(dir / "manifest.jsonl", corpus.manifest);
}

LoadedCorpus load_corpus(const std::filesystem::path& dir) {
  LoadedCorpus c;
  c.manifest = load_manifest(dir / "manifest.jsonl");
  c.features = load_all_features(c.manifest, dir);
  return c;
}

}  // namespace vcmr
