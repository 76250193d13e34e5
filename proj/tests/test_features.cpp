#include <cmath>
#include <random>

#include "crftrack/error.hpp"
#include "crftrack/features.hpp"
#include "doctest.h"

using namespace crftrack;

namespace {

// Window whose boxes have the given centers and heights, oldest first.
HypothesisWindow window_of(std::vector<Vec2> centers, std::vector<double> heights,
                           double width = 40.0, double score = 0.9) {
  HypothesisWindow w;
  w.tracklet_id = 1;
  w.score = score;
  w.length = centers.size();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    w.boxes.push_back({centers[k].x - width / 2.0, centers[k].y - heights[k] / 2.0, width, heights[k]});
  }
  return w;
}

HypothesisWindow sized(std::vector<std::pair<double, double>> wh, double score) {
  HypothesisWindow w;
  w.tracklet_id = 1;
  w.score = score;
  w.length = wh.size();
  for (auto [width, height] : wh) w.boxes.push_back({100.0, 100.0, width, height});
  return w;
}

FrameContext rate(double omega) { return {1920.0, 1080.0, omega}; }

HypothesisWindow random_window(std::mt19937_64& rng, TrackletId id) {
  std::uniform_real_distribution<double> pos(100.0, 1500.0), size(60.0, 200.0), jitter(-3.0, 3.0);
  HypothesisWindow w;
  w.tracklet_id = id;
  w.length = 3;
  w.score = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  Box b{pos(rng), pos(rng) / 2.0, size(rng) / 2.5, size(rng)};
  for (int k = 0; k < 3; ++k) {
    w.boxes.push_back(b);
    b.left += jitter(rng);
    b.top += jitter(rng);
    b.height += jitter(rng);
    b.width += jitter(rng) / 3.0;
  }
  return w;
}

}  // namespace

TEST_CASE("aspect ratio change") {
  CHECK(aspect_ratio_change(sized({{10, 20}, {10, 20}}, 0.9)) == 1.0);
  CHECK(aspect_ratio_change(sized({{10, 20}, {15, 20}}, 0.9)) == doctest::Approx(1.5));
  CHECK(aspect_ratio_change(sized({{12, 30}, {8, 32}}, 0.9)) == doctest::Approx(0.625));
  CHECK_THROWS_AS(aspect_ratio_change(sized({{10, 20}}, 0.9)), Error);
}

TEST_CASE("velocity change") {
  const std::vector<double> h{50, 50, 50};
  const Vec2 a = velocity_change(window_of({{0, 0}, {1, 0}, {2, 0}}, h), rate(30));
  CHECK(a.x == 0.0);
  CHECK(a.y == 0.0);
  const Vec2 b = velocity_change(window_of({{0, 0}, {1, 0}, {3, 0}}, h), rate(2));
  CHECK(b.x == doctest::Approx(4.0));
  CHECK(b.y == 0.0);
  const Vec2 c = velocity_change(window_of({{5, 5}, {5, 5}, {5, 5}}, h), rate(25));
  CHECK(c.x == 0.0);
  CHECK(c.y == 0.0);
  try {
    velocity_change(window_of({{0, 0}, {1, 0}}, {50, 50}), rate(30));
    FAIL("expected insufficient history");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientHistory);
  }
}

TEST_CASE("height change rate") {
  const FeatureParams p;
  const std::vector<Vec2> c{{0, 0}, {0, 0}, {0, 0}};
  CHECK(height_change_rate(window_of(c, {100, 100, 100}), rate(30), p) == 0.0);
  CHECK(height_change_rate(window_of(c, {100, 110, 121}), rate(1), p) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(height_change_rate(window_of(c, {100, 110, 115}), rate(1), p) ==
        doctest::Approx((5.0 / 110.0 - 0.1) / 0.1));
  // Constant then growing height: the denominator falls back to epsilon.
  CHECK(height_change_rate(window_of(c, {100, 100, 110}), rate(1), p) == doctest::Approx(0.1 / 1e-3));
  // Shrinking then constant: negative denominator keeps its sign.
  CHECK(height_change_rate(window_of(c, {100, 90, 90}), rate(1), p) ==
        doctest::Approx((0.0 + 0.1) / -0.1));
}

TEST_CASE("boundary flag") {
  const FrameContext ctx;
  CHECK(boundary_flag({10, 10, 50, 100}, ctx) == 1);
  CHECK(boundary_flag({-5, 10, 50, 100}, ctx) == 0);
  CHECK(boundary_flag({1900, 10, 50, 100}, ctx) == 0);
  CHECK(boundary_flag({1870, 980, 50, 100}, ctx) == 1);
  CHECK(boundary_flag({10, 981, 50, 100}, ctx) == 0);
}

TEST_CASE("unary feature") {
  const FeatureParams p;
  CHECK(unary_feature(sized({{10, 20}, {10, 20}}, 1.0), kActive, p) == 0.0);
  CHECK(unary_feature(sized({{10, 20}, {10, 20}}, 0.97), kInactive, p) == doctest::Approx(2.02));
  CHECK(unary_feature(sized({{10, 20}, {12, 20}}, 0.5), kActive, p) == doctest::Approx(0.74));
  // The high-score penalty switches on strictly above the cut.
  CHECK(unary_feature(sized({{10, 20}, {10, 20}}, 0.95), kInactive, p) == doctest::Approx(0.95));
}

TEST_CASE("unary feature is monotone in the score") {
  const FeatureParams p;
  double prev0 = -1.0, prev1 = 1e9;
  for (int k = 0; k <= 100; ++k) {
    const auto w = sized({{10, 20}, {11, 20}}, k / 100.0);
    const double u0 = unary_feature(w, kInactive, p);
    const double u1 = unary_feature(w, kActive, p);
    CHECK(u0 >= prev0);
    CHECK(u1 <= prev1);
    CHECK(u0 >= 0.0);
    CHECK(u1 >= 0.0);
    prev0 = u0;
    prev1 = u1;
  }
}

TEST_CASE("binary feature") {
  const FeatureParams p;
  const FrameContext ctx = rate(1);
  // Same heights, constant height history; i accelerates by 4 px/frame^2.
  const auto wi = window_of({{500, 500}, {500, 500}, {504, 500}}, {100, 100, 100});
  const auto wj = window_of({{800, 500}, {800, 500}, {800, 500}}, {100, 100, 100});
  CHECK(binary_feature(wi, wj, kInactive, kActive, p, ctx) == 0.0);
  CHECK(binary_feature(wi, wj, kActive, kInactive, p, ctx) == 0.0);
  CHECK(binary_feature(wi, wj, kInactive, kInactive, p, ctx) == 0.0);
  CHECK(binary_feature(wi, wj, kActive, kActive, p, ctx) == doctest::Approx(16.0 / 200.0));
  CHECK(binary_feature(wi, wi, kActive, kActive, p, ctx) == 0.0);

  const PairTable t = binary_feature_table(wi, wj, p, ctx);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == 0.0);
  CHECK(t[2] == 0.0);
}

TEST_CASE("height term counts only when both boxes are inside the image") {
  const FeatureParams p;
  const FrameContext ctx = rate(1);
  const auto grow = window_of({{500, 500}, {500, 500}, {500, 500}}, {100, 110, 115});
  const auto flat = window_of({{800, 500}, {800, 500}, {800, 500}}, {100, 100, 100});
  const double inside = binary_feature(grow, flat, kActive, kActive, p, ctx);
  const double expected = p.beta * std::abs((5.0 / 110.0 - 0.1) / 0.1);
  CHECK(inside == doctest::Approx(expected));

  auto edge = flat;
  for (auto& b : edge.boxes) b.left = 1900.0;
  CHECK(binary_feature(grow, edge, kActive, kActive, p, ctx) == 0.0);
}

TEST_CASE("center distance unary") {
  CHECK(unary_feature_center_distance(2.0, 1.3, kInactive, 1.2) == 0.5);
  CHECK(unary_feature_center_distance(10.0, 1.3, kInactive, 1.2) == doctest::Approx(0.1));
  CHECK(unary_feature_center_distance(7.0, 1.0, kActive, 1.2) == 0.0);
  CHECK(unary_feature_center_distance(7.0, 1.5, kActive, 2.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(unary_feature_center_distance(0.0, 1.0, kInactive, 1.2), Error);
}

TEST_CASE("binary feature is symmetric and non-negative") {
  std::mt19937_64 rng(99);
  const FeatureParams p;
  const FrameContext ctx;
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_window(rng, 1);
    const auto b = random_window(rng, 2);
    const PairTable ab = binary_feature_table(a, b, p, ctx);
    const PairTable ba = binary_feature_table(b, a, p, ctx);
    CHECK(ab[3] == ba[3]);
    CHECK(ab[3] >= 0.0);
    for (Label y : {kInactive, kActive}) CHECK(unary_feature(a, y, p) >= 0.0);
  }
}

TEST_CASE("camera pan leaves every feature unchanged") {
  std::mt19937_64 rng(4);
  const FeatureParams p;
  const FrameContext ctx{100000.0, 100000.0, 30.0};  // keep boxes inside after the shift
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_window(rng, 1);
    auto b = random_window(rng, 2);
    auto pa = a, pb = b;
    const double dx = 7.0, dy = -3.0;
    for (int k = 0; k < 3; ++k) {
      // Pan accumulates over frames and moves every object alike.
      for (auto* w : {&pa, &pb}) {
        w->boxes[k].left += dx * k + 50.0;
        w->boxes[k].top += dy * k + 50.0;
      }
    }
    const Vec2 va = velocity_change(a, ctx), vb = velocity_change(b, ctx);
    const Vec2 pva = velocity_change(pa, ctx), pvb = velocity_change(pb, ctx);
    CHECK((pva.x - pvb.x) == doctest::Approx(va.x - vb.x).epsilon(1e-9));
    CHECK((pva.y - pvb.y) == doctest::Approx(va.y - vb.y).epsilon(1e-9));
    CHECK(aspect_ratio_change(pa) == aspect_ratio_change(a));
    CHECK(height_change_rate(pa, ctx, p) == height_change_rate(a, ctx, p));
    CHECK(binary_feature_table(pa, pb, p, ctx)[3] ==
          doctest::Approx(binary_feature_table(a, b, p, ctx)[3]).epsilon(1e-9));
  }
}

TEST_CASE("equal relative displacement zeroes the velocity term") {
  const FeatureParams p;
  const FrameContext ctx;
  // Both objects share displacement changes; heights constant, so the height
  // term is zero as well.
  const auto a = window_of({{300, 400}, {310, 402}, {325, 401}}, {120, 120, 120});
  const auto b = window_of({{900, 600}, {910, 602}, {925, 601}}, {150, 150, 150});
  CHECK(binary_feature(a, b, kActive, kActive, p, ctx) == 0.0);
}

TEST_CASE("window validation") {
  HypothesisWindow w = sized({{10, 20}, {10, 20}, {10, 20}}, 0.5);
  CHECK_NOTHROW(w.validate());
  w.length = 2;
  CHECK_THROWS_AS(w.validate(), Error);
  w.length = 7;
  CHECK_NOTHROW(w.validate());
  w.score = 1.5;
  CHECK_THROWS_AS(w.validate(), Error);
  w.score = 0.5;
  w.boxes[0].width = 0.0;
  CHECK_THROWS_AS(w.validate(), Error);
}
