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

#include "doctest.h"
#include "test_util.hpp"
#include "vcmr/corpus.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

using namespace vcmr;
using vcmr::testing::scratch_dir;

namespace {

std::string bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

VideoRecord simple_video() {
  VideoRecord v;
  v.video_id = "a";
  v.n_frames = 6;
  v.feature_path = "features/a.vcmf";
  v.subtitles = {{{1, 2}, 0, 2}, {{3}, 2, 6}};
  return v;
}

CorpusManifest simple_manifest() {
  CorpusManifest m;
  m.videos.push_back(simple_video());
  QueryRecord q;
  q.query_id = "q";
  q.tokens = {1, 3};
  q.target_video_id = "a";
  q.moment = {2, 4};
  m.queries.push_back(q);
  return m;
}

}  // namespace

TEST_CASE("feature files round-trip bit-exactly") {
  FeatureMatrix m(5, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> normal;
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  m(0, 0) = -0.0f;
  m(1, 1) = std::numeric_limits<float>::denorm_min();
  const auto dir = scratch_dir("vcmf");
  write_features(dir / "x.vcmf", m);
  const FeatureMatrix back = read_features(dir / "x.vcmf");
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 3);
  CHECK(std::memcmp(back.data(), m.data(), sizeof(float) * m.size()) == 0);
  write_features(dir / "y.vcmf", back);
  CHECK(bytes_of(dir / "x.vcmf") == bytes_of(dir / "y.vcmf"));
  CHECK(read_feature_header(dir / "x.vcmf") == std::pair<std::uint32_t, std::uint32_t>{5, 3});
}

TEST_CASE("feature file layout is magic, rows, dim, little-endian floats") {
  FeatureMatrix m(1, 2);
  m << 1.0f, -2.0f;
  std::ostringstream out;
  write_features(out, m);
  const std::string s = out.str();
  REQUIRE(s.size() == 4 + 4 + 4 + 8);
  CHECK(s.substr(0, 4) == "VCMF");
  CHECK(static_cast<unsigned char>(s[4]) == 1);
  CHECK(static_cast<unsigned char>(s[8]) == 2);
  float first = 0.0f;
  std::memcpy(&first, s.data() + 12, 4);
  CHECK(first == 1.0f);
}

TEST_CASE("malformed feature files are rejected") {
  FeatureMatrix m = FeatureMatrix::Ones(2, 2);
  std::ostringstream out;
  write_features(out, m);
  const std::string good = out.str();

  std::istringstream bad_magic("XXXX" + good.substr(4));
  CHECK_THROWS_AS(read_features(bad_magic, "t"), FormatError);
  std::istringstream short_header(good.substr(0, 6));
  CHECK_THROWS_AS(read_features(short_header, "t"), FormatError);
  std::istringstream short_payload(good.substr(0, good.size() - 1));
  CHECK_THROWS_AS(read_features(short_payload, "t"), FormatError);

  std::string nan_payload = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_payload.data() + 12, &nan, 4);
  std::istringstream with_nan(nan_payload);
  CHECK_THROWS_AS(read_features(with_nan, "t"), FormatError);
  CHECK_THROWS_AS(read_features(std::filesystem::path("/nonexistent/x.vcmf")), FormatError);
}

TEST_CASE("a well-formed manifest validates") {
  CHECK_NOTHROW(validate_manifest(simple_manifest()));
}

TEST_CASE("each class of malformed record is rejected") {
  auto expect_bad = [](CorpusManifest m, const char* fragment) {
    try {
      validate_manifest(m);
      FAIL("accepted a manifest that should fail: " << fragment);
    } catch (const CorpusError& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  CorpusManifest m = simple_manifest();

  auto gap = m;
  gap.videos[0].subtitles[1].start_frame = 3;
  expect_bad(gap, "gap");
  auto overlap = m;
  overlap.videos[0].subtitles[1].start_frame = 1;
  expect_bad(overlap, "overlaps");
  auto outside = m;
  outside.videos[0].subtitles[1].end_frame = 7;
  expect_bad(outside, "outside");
  auto uncovered = m;
  uncovered.videos[0].subtitles[1].end_frame = 5;
  expect_bad(uncovered, "do not cover");
  auto no_tokens = m;
  no_tokens.videos[0].subtitles[0].tokens.clear();
  expect_bad(no_tokens, "token count");
  auto long_sub = m;
  long_sub.videos[0].subtitles[0].tokens.assign(kMaxSubtitleTokens + 1, 1);
  expect_bad(long_sub, "token count");
  auto no_frames = m;
  no_frames.videos[0].n_frames = 0;
  expect_bad(no_frames, "n_frames");
  auto dup_video = m;
  dup_video.videos.push_back(dup_video.videos[0]);
  expect_bad(dup_video, "duplicate video_id");
  auto dup_query = m;
  dup_query.queries.push_back(dup_query.queries[0]);
  expect_bad(dup_query, "duplicate query_id");
  auto empty_query = m;
  empty_query.queries[0].tokens.clear();
  expect_bad(empty_query, "empty token list");
  auto orphan = m;
  orphan.queries[0].target_video_id = "zzz";
  expect_bad(orphan, "unknown target video");
  auto past_end = m;
  past_end.queries[0].moment = {4, 6};
  expect_bad(past_end, "moment");
  auto inverted = m;
  inverted.queries[0].moment = {4, 3};
  expect_bad(inverted, "moment");
}

TEST_CASE("manifest parsing rejects bad lines and missing features") {
  const auto dir = scratch_dir("parse");
  std::istringstream bad_json("{\"kind\": \"video\",");
  CHECK_THROWS_AS(parse_manifest(bad_json, dir), CorpusError);
  std::istringstream bad_kind("{\"kind\": \"clip\"}");
  CHECK_THROWS_AS(parse_manifest(bad_kind, dir), CorpusError);
  std::istringstream missing_field("{\"kind\": \"video\", \"video_id\": \"a\"}");
  CHECK_THROWS_AS(parse_manifest(missing_field, dir), CorpusError);

  const std::string text = manifest_to_jsonl(simple_manifest());
  std::istringstream no_file(text);
  CHECK_THROWS_WITH_AS(parse_manifest(no_file, dir), doctest::Contains("missing feature file"),
                       CorpusError);

  std::filesystem::create_directories(dir / "features");
  write_features(dir / "features/a.vcmf", FeatureMatrix::Zero(5, 2));
  std::istringstream wrong_rows(text);
  CHECK_THROWS_WITH_AS(parse_manifest(wrong_rows, dir), doctest::Contains("rows"), CorpusError);

  write_features(dir / "features/a.vcmf", FeatureMatrix::Zero(6, 2));
  std::istringstream ok(text);
  CHECK(parse_manifest(ok, dir) == simple_manifest());
}

TEST_CASE("frames align to subtitle spans and concatenate back") {
  FeatureMatrix f(6, 2);
  for (int i = 0; i < 12; ++i) f.data()[i] = static_cast<float>(i);
  const auto groups = align_frames_to_subtitles(simple_video(), f);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].second.rows() == 2);
  CHECK(groups[1].second.rows() == 4);
  FeatureMatrix joined(6, 2);
  joined << groups[0].second, groups[1].second;
  CHECK(joined == f);
  CHECK_THROWS_AS(align_frames_to_subtitles(simple_video(), FeatureMatrix::Zero(5, 2)),
                  CorpusError);
}

TEST_CASE("generated corpus round-trips through disk") {
  SyntheticCorpusOptions o;
  o.n_videos = 6;
  const SyntheticCorpus c = generate_synthetic_corpus(o);
  const auto dir = scratch_dir("roundtrip");
  save_corpus(dir, c);
  const LoadedCorpus back = load_corpus(dir);
  CHECK(back.manifest == c.manifest);
  REQUIRE(back.features.size() == c.features.size());
  for (std::size_t i = 0; i < c.features.size(); ++i) CHECK(back.features[i] == c.features[i]);
}

TEST_CASE("generator is deterministic in its seed") {
  SyntheticCorpusOptions o;
  o.n_videos = 8;
  const auto a = generate_synthetic_corpus(o);
  const auto b = generate_synthetic_corpus(o);
  CHECK(manifest_to_jsonl(a.manifest) == manifest_to_jsonl(b.manifest));
  for (std::size_t i = 0; i < a.features.size(); ++i) CHECK(a.features[i] == b.features[i]);
  o.seed = 8;
  const auto c = generate_synthetic_corpus(o);
  CHECK(manifest_to_jsonl(a.manifest) != manifest_to_jsonl(c.manifest));

  const auto da = scratch_dir("det_a");
  const auto db = scratch_dir("det_b");
  save_corpus(da, a);
  save_corpus(db, b);
  CHECK(bytes_of(da / "manifest.jsonl") == bytes_of(db / "manifest.jsonl"));
  CHECK(bytes_of(da / "features/v0003.vcmf") == bytes_of(db / "features/v0003.vcmf"));
}

TEST_CASE("generator output respects its own recipe") {
  const auto c = generate_synthetic_corpus({});
  CHECK_NOTHROW(validate_manifest(c.manifest));
  REQUIRE(c.manifest.recipe.has_value());
  const GeneratorRecipe& r = *c.manifest.recipe;
  CHECK(r.noise_sigma == 0.1);
  CHECK(r.n_concepts - r.background_concepts >= 4);
  CHECK(c.manifest.videos.size() == 50);
  const Eigen::MatrixXd pp = r.projection.transpose() * r.projection;
  CHECK(pp.isIdentity(1e-9));
  int val = 0;
  for (const auto& q : c.manifest.queries) {
    val += q.split == "val";
    for (int t : q.tokens) {
      const int concept_of = t / r.tokens_per_concept;
      CHECK(std::find(q.concepts.begin(), q.concepts.end(), concept_of) != q.concepts.end());
    }
    const int v = c.manifest.video_index(q.target_video_id);
    const auto& feats = c.features[static_cast<std::size_t>(v)];
    const Eigen::VectorXd clean = r.feature_of(q.concepts);
    for (int f = q.moment.start; f <= q.moment.end; ++f) {
      const Eigen::VectorXd row = feats.row(f).transpose().cast<double>();
      CHECK((row - clean).cwiseAbs().maxCoeff() <= r.noise_sigma + 1e-6);
    }
  }
  CHECK(val > 0);
}

TEST_CASE("nearest-neighbour oracle finds the right video for most queries") {
  const auto c = generate_synthetic_corpus({});
  const GeneratorRecipe& r = *c.manifest.recipe;
  int hits = 0;
  for (const auto& q : c.manifest.queries) {
    const Eigen::VectorXd target = r.feature_of(q.concepts).normalized();
    int best_video = -1;
    double best = -2.0;
    for (std::size_t v = 0; v < c.manifest.videos.size(); ++v) {
      for (const auto& s : c.manifest.videos[v].subtitles) {
        const Eigen::VectorXd mean = c.features[v]
                                         .middleRows(s.start_frame, s.frame_count())
                                         .cast<double>()
                                         .colwise()
                                         .mean()
                                         .transpose();
        const double cosine = mean.normalized().dot(target);
        if (cosine > best) {
          best = cosine;
          best_video = static_cast<int>(v);
        }
      }
    }
    hits += best_video == c.manifest.video_index(q.target_video_id);
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(c.manifest.queries.size());
  MESSAGE("oracle rank-1 rate " << rate);
  CHECK(rate >= 0.9);
}

TEST_CASE("generator rejects a vocabulary smaller than the concept count") {
  SyntheticCorpusOptions o;
  o.vocab_size = 8;
  o.n_concepts = 16;
  CHECK_THROWS_AS(generate_synthetic_corpus(o), CorpusError);
  o = {};
  o.n_videos = 0;
  CHECK_THROWS_AS(generate_synthetic_corpus(o), CorpusError);
}
