#include <random>
#include <sstream>

#include "crftrack/error.hpp"
#include "crftrack/io.hpp"
#include "crftrack/scenario.hpp"
#include "doctest.h"

using namespace crftrack;

namespace {

TrackFile parse(const std::string& text) {
  std::istringstream in(text);
  return parse_mot(in);
}

std::string write(const TrackFile& t) {
  std::ostringstream out;
  write_mot(out, t);
  return out.str();
}

// Error message for malformed input, or empty when parsing succeeds.
std::string format_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFormat);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("parse a MOT line") {
  const TrackFile t = parse("1,1,10.0,20.0,30.0,60.0,0.98,-1,-1,-1\n");
  REQUIRE(t.records.size() == 1);
  const TrackRecord& r = t.records[0];
  CHECK(r.frame == 1);
  CHECK(r.id == 1);
  CHECK(r.box.left == 10.0);
  CHECK(r.box.top == 20.0);
  CHECK(r.box.width == 30.0);
  CHECK(r.box.height == 60.0);
  CHECK(r.score == 0.98);
  CHECK(parse("").empty());
  CHECK(parse("\n  \n").empty());
}

TEST_CASE("records are sorted by frame then id") {
  const TrackFile t = parse("2,1,0,0,1,1,1,-1,-1,-1\n1,5,0,0,1,1,1,-1,-1,-1\n1,2,0,0,1,1,1,-1,-1,-1\n");
  CHECK(t.is_sorted_unique());
  CHECK(t.records[0].id == 2);
  CHECK(t.records[1].id == 5);
  CHECK(t.records[2].frame == 2);
}

TEST_CASE("malformed lines report their line number") {
  CHECK(format_error("1,1,10,20,0,60,0.9,-1,-1,-1") == "line 1: non-positive width");
  CHECK(format_error("\n1,1,10,20,5,-1,0.9,-1,-1,-1") == "line 2: non-positive height");
  CHECK(format_error("1,1,10,20,5,6,0.9,-1,-1").starts_with("line 1: expected 10 fields"));
  CHECK(format_error("1,x,10,20,5,6,0.9,-1,-1,-1").starts_with("line 1: id"));
  CHECK(format_error("1,1,10,abc,5,6,0.9,-1,-1,-1").starts_with("line 1: top"));
  CHECK(format_error("1,1,10,20,5,6,nan,-1,-1,-1").starts_with("line 1: score"));
  CHECK(format_error("0,1,10,20,5,6,0.9,-1,-1,-1") == "line 1: frame must be >= 1");
  CHECK(format_error("1,1,1,1,1,1,1,-1,-1,-1\n1,2,1,1,1,1,1,-1,-1,-1\n1,1,2,2,2,2,1,-1,-1,-1")
            .starts_with("line 3: duplicate"));
}

TEST_CASE("fixed formatting") {
  CHECK(format_fixed(1.005, 2) == "1.00");
  CHECK(format_fixed(0.125, 2) == "0.13");
  CHECK(format_fixed(-0.125, 2) == "-0.13");
  CHECK(format_fixed(2.5, 0) == "3");
  CHECK(format_fixed(0.98, 4) == "0.9800");
  CHECK(format_fixed(-0.001, 2) == "0.00");
  CHECK(format_fixed(123456.785, 2) == "123456.79");
  CHECK_THROWS_AS(format_fixed(std::numeric_limits<double>::infinity(), 2), Error);
}

TEST_CASE("write uses declared precision") {
  TrackFile t;
  t.records.push_back({2, 7, {1.005, 20.0, 30.456, 60.0}, 0.98765, {-1, -1, -1}});
  CHECK(write(t) == "2,7,1.00,20.00,30.46,60.00,0.9877,-1,-1,-1\n");
  CHECK(write(TrackFile{}).empty());
}

TEST_CASE("round trip is the identity at declared precision") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> px(-50.0, 2000.0), size(1.0, 300.0), score(0.0, 1.0);
  TrackFile t;
  for (int f = 1; f <= 40; ++f) {
    for (int id = 1; id <= 6; ++id) {
      t.records.push_back({f, id, {px(rng), px(rng), size(rng), size(rng)}, score(rng), {-1, -1, -1}});
    }
  }
  const std::string once = write(t);
  const TrackFile back = parse(once);
  CHECK(write(back) == once);
  CHECK(parse(write(back)) == back);
}

TEST_CASE("generated scenario files round trip") {
  ScenarioSpec spec;
  spec.num_frames = 60;
  spec.camera_pan = {{1, 1.5, 0.0}};
  spec.drift_events = {{20, 0, 1}};
  spec.noise = 0.5;
  spec.seed = 3;
  const Scenario s = generate_scenario(spec);
  for (const TrackFile* f : {&s.hypotheses, &s.ground_truth}) {
    CHECK(parse(write(*f)) == *f);
  }
}

TEST_CASE("seqinfo") {
  std::istringstream in("[Sequence]\nname=demo\nimWidth=640\nimHeight=480\nframeRate=25\nseqLength=100\n");
  const SequenceInfo s = parse_seqinfo(in);
  CHECK(s.ctx.image_width == 640.0);
  CHECK(s.ctx.image_height == 480.0);
  CHECK(s.ctx.frame_rate == 25.0);
  CHECK(s.length == 100);
  std::ostringstream out;
  write_seqinfo(out, s);
  std::istringstream again(out.str());
  const SequenceInfo t = parse_seqinfo(again);
  CHECK(t.ctx.image_width == 640.0);
  CHECK(t.length == 100);

  std::istringstream missing("imWidth=640\n");
  CHECK_THROWS_AS(parse_seqinfo(missing), Error);
}

TEST_CASE("parameter files") {
  const ModelParams p = read_params(CRFTRACK_DEFAULT_PARAMS);
  CHECK(p.theta_u == 0.98);
  CHECK(p.theta_b == 0.12);
  CHECK(p.features.alpha1 == 1.05);
  CHECK(p.features.alpha2 == 1.20);
  CHECK(p.features.beta == 10.80);
  CHECK(p.pre_threshold == 0.4);
  CHECK(p.short_threshold == 0.5);
  CHECK(p.node_budget == 10);

  std::ostringstream out;
  write_params(out, p);
  std::istringstream in(out.str());
  const ModelParams q = parse_params(in);
  CHECK(q.theta_u == p.theta_u);
  CHECK(q.features.beta == p.features.beta);
  CHECK(q.bp.tolerance == p.bp.tolerance);
  CHECK(q.node_budget == p.node_budget);

  std::istringstream partial("theta_u=2.5\n");
  const ModelParams r = parse_params(partial);
  CHECK(r.theta_u == 2.5);
  CHECK(r.theta_b == 0.12);

  std::istringstream unknown("theta_u=1\ngamma=3\n");
  try {
    parse_params(unknown);
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFormat);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream bad_budget("node_budget=0\n");
  CHECK_THROWS_AS(parse_params(bad_budget), Error);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::kFormat) == 2);
  CHECK(exit_code(ErrorKind::kValidation) == 2);
  CHECK(exit_code(ErrorKind::kNumerical) == 3);
  CHECK(exit_code(ErrorKind::kCapacity) == 4);
}
