// Copyright 2026 The modecollapse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <modecollapse/export.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <unistd.h>

namespace modecollapse {
namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

BasinMap small_basin() {
  BasinMap map;
  map.R = 3.0;
  map.w_star = 2.0 / 3.0;
  map.w1 = 2.0 / 3.0;
  map.grid_n = 4;
  map.axis = cell_centers(4);
  map.labels.assign(16, BasinLabel::global_min);
  for (int k : {5, 6, 9, 10}) map.labels[k] = BasinLabel::collapse;
  map.labels[0] = BasinLabel::flipped;
  map.labels[15] = BasinLabel::undecided;
  map.boundary = detail::collapse_boundary(map);
  return map;
}

TrajectoryRecord short_trajectory() {
  ProblemSpec spec;
  spec.R = 2.0;
  FlowConfig fc;
  fc.max_steps = 200;
  fc.record_every = 20;
  return integrate(SummaryState::with_weight(0.3, -0.2, 0.1, spec.w_star), spec, fc);
}

RcSweep small_rc_sweep() {
  CollapseOracle oracle = [](double R, std::uint64_t seed, int) {
    return CollapseTrial{seed != 2 && R > 1.0 + 0.5 * static_cast<double>(seed), true};
  };
  RcSweep sweep;
  for (int d : {8, 32}) sweep.push_back(rc_binary_search(d, Family::gmm, {0, 1, 2}, oracle));
  return sweep;
}

QuasiSweep small_quasi_sweep() {
  QuasiSweep sweep;
  for (double R : {1.8, 2.0}) {
    QuasiRun run;
    run.R = R;
    run.seed = 3;
    run.verdict = QuasiVerdict::quasi_recovered;
    run.episode = {true, 1.0, 1.0 + std::exp(R * R), std::exp(R * R), -R * R, 40};
    run.record = short_trajectory();
    sweep.runs.push_back(run);
  }
  QuasiRun plain;
  plain.R = 1.0;
  plain.record = short_trajectory();
  sweep.runs.push_back(plain);
  sweep.fit = fit_quasi(sweep.runs, {1.0, 1.8, 2.0});
  return sweep;
}

std::vector<Result> all_results() {
  ProblemSpec spec;
  spec.R = 3.0;
  return {short_trajectory(), FixedPointList(analytic_fixed_points(spec, spec.w_star)),
          small_basin(), small_quasi_sweep(), small_rc_sweep()};
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("modecollapse-export-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST(Format, Parse) {
  EXPECT_EQ(parse_format("csv"), Format::csv);
  EXPECT_EQ(parse_format("json"), Format::json);
  EXPECT_EQ(parse_format("svg_plot"), Format::svg);
  EXPECT_THROW(parse_format("png"), ConfigError);
}

TEST(BasinCsv, HeaderAndOneRowPerCell) {
  const auto lines = lines_of(render(small_basin(), Format::csv));
  ASSERT_EQ(lines.size(), 17u);
  EXPECT_EQ(lines[0], "m1_0,m2_0,label");
  EXPECT_EQ(lines[1], "-0.75,-0.75,flipped");
  EXPECT_EQ(lines[6], "-0.25,-0.25,collapse");
  EXPECT_EQ(lines[16], "0.75,0.75,undecided");
}

TEST(TrajectoryCsv, Schema) {
  const TrajectoryRecord rec = short_trajectory();
  const auto lines = lines_of(render(rec, Format::csv));
  ASSERT_EQ(lines.size(), rec.size() + 1);
  EXPECT_EQ(lines[0], "t,m1,m2,s,w1,w2,detP,rhs_norm");
}

TEST(RcJson, RequiredFields) {
  const nlohmann::json j = to_json(small_rc_sweep().front());
  EXPECT_EQ(j.at("d").get<int>(), 8);
  EXPECT_EQ(j.at("family").get<std::string>(), "gmm");
  EXPECT_NEAR(j.at("R_c").get<double>(), 1.25, 0.01);
  EXPECT_EQ(j.at("per_seed_thresholds").size(), 2u);
  EXPECT_EQ(j.at("seeds_never_collapsing"), nlohmann::json::array({2}));
}

TEST(RcJson, NoCollapsingSeedGivesNullRadius) {
  CollapseOracle never = [](double, std::uint64_t, int) { return CollapseTrial{false, true}; };
  const RcSearchResult r = rc_binary_search(8, Family::gmm, {0}, never);
  const nlohmann::json j = to_json(r);
  EXPECT_TRUE(j.at("R_c").is_null());
  EXPECT_TRUE(std::isnan(rc_from_json(j).R_c));
}

TEST(ResultJson, RoundTripsEveryType) {
  for (const Result& result : all_results()) {
    const std::string text = render(result, Format::json);
    const Result back = result_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(back.index(), result.index());
    EXPECT_EQ(render(back, Format::json), text);
  }
}

TEST(ResultJson, RejectsMalformedInput) {
  EXPECT_THROW(result_from_json(nlohmann::json{{"type", "movie"}}), ConfigError);
  EXPECT_THROW(result_from_json(nlohmann::json{{"type", "basin"}}), ConfigError);
  EXPECT_THROW(result_from_json(nlohmann::json::array()), ConfigError);
}

TEST_F(TempDir, RepeatedExportIsByteIdentical) {
  int k = 0;
  for (const Result& result : all_results()) {
    for (Format format : {Format::csv, Format::json, Format::svg}) {
      const auto a = dir_ / ("a" + std::to_string(k));
      const auto b = dir_ / ("b" + std::to_string(k));
      ++k;
      std::ostringstream sink;
      export_result(result, a.string(), format, sink);
      export_result(result, b.string(), format, sink);
      const std::string text = slurp(a);
      EXPECT_FALSE(text.empty());
      EXPECT_EQ(text, slurp(b));
      EXPECT_TRUE(sink.str().empty());
    }
  }
}

TEST_F(TempDir, SvgIsWellFormedDocument) {
  for (const Result& result : all_results()) {
    const std::string text = render(result, Format::svg);
    EXPECT_EQ(text.rfind("<?xml", 0), 0u);
    EXPECT_NE(text.find("<svg"), std::string::npos);
    EXPECT_NE(text.find("</svg>\n"), std::string::npos);
    EXPECT_EQ(text.find("nan"), std::string::npos);
  }
}

TEST_F(TempDir, ReadBackFromDisk) {
  const auto path = dir_ / "basin.json";
  std::ostringstream sink;
  export_result(small_basin(), path.string(), Format::json, sink);
  const Result back = read_result_json(path.string());
  ASSERT_TRUE(std::holds_alternative<BasinMap>(back));
  const BasinMap& map = std::get<BasinMap>(back);
  EXPECT_EQ(map.grid_n, 4);
  EXPECT_EQ(map.count(BasinLabel::collapse), 4u);
  EXPECT_EQ(map.boundary.size(), 1u);
}

TEST_F(TempDir, DashWritesToStream) {
  std::ostringstream sink;
  export_result(small_basin(), "-", Format::csv, sink);
  EXPECT_EQ(sink.str(), render(small_basin(), Format::csv));
}

TEST_F(TempDir, IoErrors) {
  std::ostringstream sink;
  EXPECT_THROW(export_result(small_basin(), (dir_ / "missing" / "x.csv").string(), Format::csv,
                             sink),
               IoError);
  EXPECT_THROW(read_result_json((dir_ / "absent.json").string()), IoError);
  std::ofstream((dir_ / "bad.json").string()) << "{not json";
  EXPECT_THROW(read_result_json((dir_ / "bad.json").string()), ConfigError);
}

}  // namespace
}  // namespace modecollapse
