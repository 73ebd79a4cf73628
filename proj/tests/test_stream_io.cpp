// Copyright 2026 The OTCD Authors
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

#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "otcd/stream_io.hpp"
#include "test_support.hpp"

namespace otcd {
namespace {

using testing::make_object;
using testing::make_script;
using testing::small_header;

Scenario sample_scenario(int frames = 26) {
  auto a = make_object(1, {60.3, 80.7, 33.1, 61.9}, 1.37, -0.41, 1.013);
  auto b = make_object(2, {200, 120, 40, 40}, -2.2, 0.3, 1.0, std::min(3, frames - 1), std::min(20, frames - 1));
  if (frames > 10) b.occlusions = {{7, 9}};
  MotionScript s = make_script(frames, {a, b});
  s.camera_dx = 0.6;
  return generate_scenario(s, small_header(), 17);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    read_scenario(in);
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

TEST(ScenarioIo, RoundTripIsLosslessAndByteStable) {
  const Scenario sc = sample_scenario();
  std::ostringstream first;
  write_scenario(sc, first);
  std::istringstream in(first.str());
  const Scenario back = read_scenario(in);
  EXPECT_EQ(back, sc);
  std::ostringstream second;
  write_scenario(back, second);
  EXPECT_EQ(second.str(), first.str());
}

TEST(ScenarioIo, HeaderRecordIsFirstLine) {
  std::ostringstream out;
  write_scenario(sample_scenario(), out);
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), 2u + 26u);
  EXPECT_NE(lines[0].find("\"format\":\"otcd-scenario\""), std::string::npos);
  EXPECT_NE(lines[0].find("\"gop\":12"), std::string::npos);
  EXPECT_EQ(lines[2].find("mv_x"), std::string::npos);  // I-frames omit motion
  EXPECT_NE(lines[3].find("mv_x"), std::string::npos);
}

TEST(ScenarioIo, TruncatedFileNamesLastCompleteFrame) {
  std::ostringstream out;
  write_scenario(sample_scenario(), out);
  auto lines = lines_of(out.str());
  // Keep frames 0..9 and half of frame 10.
  std::vector<std::string> cut(lines.begin(), lines.begin() + 2 + 10);
  cut.push_back(lines[12].substr(0, lines[12].size() / 2));
  const std::string err = error_of(join(cut));
  EXPECT_NE(err.find("truncated"), std::string::npos) << err;
  EXPECT_NE(err.find("last complete frame is 9"), std::string::npos) << err;
  cut.pop_back();
  EXPECT_NE(error_of(join(cut)).find("last complete frame is 9"), std::string::npos);
}

TEST(ScenarioIo, GopViolationIsReported) {
  std::ostringstream out;
  write_scenario(sample_scenario(), out);
  auto lines = lines_of(out.str());
  std::string& f12 = lines[2 + 12];
  const auto pos = f12.find("\"kind\":\"I\"");
  ASSERT_NE(pos, std::string::npos);
  f12.replace(pos, 10, "\"kind\":\"P\"");
  const std::string err = error_of(join(lines));
  EXPECT_NE(err.find("frame 12"), std::string::npos) << err;
  EXPECT_NE(err.find("gop"), std::string::npos) << err;
}

TEST(ScenarioIo, NonMonotoneIndexIsReported) {
  std::ostringstream out;
  write_scenario(sample_scenario(), out);
  auto lines = lines_of(out.str());
  std::swap(lines[2 + 4], lines[2 + 5]);
  EXPECT_NE(error_of(join(lines)).find("frame 4: non-monotone"), std::string::npos);
}

TEST(ScenarioIo, GridMismatchIsReported) {
  Scenario sc = sample_scenario(4);
  sc.frames[2].mv_x.pop_back();
  std::ostringstream out;
  write_scenario(sc, out);
  const std::string err = error_of(out.str());
  EXPECT_NE(err.find("frame 2: grid size mismatch"), std::string::npos) << err;
}

TEST(ScenarioIo, MalformedHeaderIsReported) {
  EXPECT_NE(error_of("{\"format\":\"other\"}\n").find("malformed header"), std::string::npos);
  EXPECT_NE(error_of("not json\n").find("malformed header"), std::string::npos);
  EXPECT_NE(error_of("").find("empty"), std::string::npos);
}

TEST(ScenarioIo, NegativeResidualIsReported) {
  Scenario sc = sample_scenario(4);
  sc.frames[1].residual[0] = -1.0;
  std::ostringstream out;
  write_scenario(sc, out);
  EXPECT_NE(error_of(out.str()).find("frame 1: negative residual"), std::string::npos);
}

TEST(MotChallenge, RowFormat) {
  const TrackRow r{1, 1, {10, 10, 4, 8}, 1.0};
  EXPECT_EQ(format_motchallenge_row(r), "1,1,8.00,6.00,4.00,8.00,1.00,-1,-1,-1");
}

TEST(MotChallenge, EmptySetGivesEmptyFile) {
  std::ostringstream out;
  write_motchallenge({}, out);
  EXPECT_TRUE(out.str().empty());
  std::istringstream in("");
  EXPECT_TRUE(read_motchallenge(in).empty());
}

TEST(MotChallenge, RoundTrip) {
  const std::vector<TrackRow> rows = {{1, 1, {10, 10, 4, 8}, 1.0},
                                      {1, 7, {100.5, 50.25, 20.5, 41.5}, 0.5},
                                      {3, 2, {12, 14, 6, 6}, 0.97}};
  std::ostringstream out;
  write_motchallenge(rows, out);
  std::istringstream in(out.str());
  EXPECT_EQ(read_motchallenge(in), rows);
}

TEST(MotChallenge, RejectsFrameZeroOnWrite) {
  std::ostringstream out;
  EXPECT_THROW(write_motchallenge({{0, 1, {1, 1, 1, 1}, 1.0}}, out), std::invalid_argument);
}

TEST(MotChallenge, MalformedLineNamesLine) {
  std::istringstream in("1,1,0,0,4,4,1,-1,-1,-1\n\n2,1,0,zero,4,4\n");
  try {
    read_motchallenge(in);
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::istringstream short_line("1,2,3\n");
  EXPECT_THROW(read_motchallenge(short_line), FormatError);
}

TEST(MotChallenge, SixFieldDetectionsDefaultConfidence) {
  std::istringstream in("4,-1,10,20,30,40\n");
  const auto rows = read_motchallenge(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].conf, 1.0);
  EXPECT_EQ(rows[0].box, BBox::from_corner(10, 20, 30, 40));
}

TEST(GtRows, OnlyVisibleEntriesOneBased) {
  const Scenario sc = sample_scenario();
  const auto rows = gt_rows(sc);
  std::size_t visible = 0;
  for (const auto& e : sc.gt) visible += e.visible;
  EXPECT_EQ(rows.size(), visible);
  EXPECT_EQ(rows.front().frame, 1);
}

}  // namespace
}  // namespace otcd
