#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "crftrack/error.hpp"
#include "crftrack/training.hpp"
#include "doctest.h"
#include "support/samples.hpp"

using namespace crftrack;
using crftrack::testing::baseline_runs;
using crftrack::testing::random_sample;

namespace {

HypothesisWindow steady(TrackletId id, double score, double x = 400.0) {
  HypothesisWindow w;
  w.tracklet_id = id;
  w.score = score;
  w.length = 10;
  for (int k = 0; k < 3; ++k) w.boxes.push_back({x + 2.0 * k, 300.0, 50.0, 120.0});
  return w;
}

TrainingSample single(double score, Label gold) {
  TrainingSample s;
  s.windows = {steady(1, score)};
  s.gold = {{1, gold}};
  s.provenance = {"one", 1, gold == kInactive};
  return s;
}

TrackRecord rec(int frame, TrackletId id, double left, double score = 0.95) {
  return {frame, id, {left, 300.0, 50.0, 120.0}, score, {-1, -1, -1}};
}

// Probability of label 1 for the lone node of `single`.
double p_active(const ModelParams& p, double score) {
  const double e0 = p.theta_u * score;
  const double e1 = p.theta_u * (1.0 - score);
  return std::exp(-e1) / (std::exp(-e0) + std::exp(-e1));
}

}  // namespace

TEST_CASE("single node likelihoods") {
  ModelParams p;
  p.theta_u = 0.0;
  CHECK(log_likelihood(p, single(0.9, kActive), InferenceMode::kExact) ==
        doctest::Approx(-std::numbers::ln2).epsilon(1e-14));

  const ModelParams table;
  const double expected = -0.098 - std::log(std::exp(-0.882) + std::exp(-0.098));
  CHECK(log_likelihood(table, single(0.9, kActive), InferenceMode::kExact) ==
        doctest::Approx(expected).epsilon(1e-14));

  const std::vector<TrainingSample> twice{single(0.9, kActive), single(0.9, kActive)};
  CHECK(log_likelihood(table, twice, InferenceMode::kExact) ==
        doctest::Approx(2.0 * expected).epsilon(1e-14));

  try {
    log_likelihood(table, single(0.9, kActive), InferenceMode::kLoopyBp);
    FAIL("expected unsupported mode");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupportedMode);
  }
}

TEST_CASE("single node gradient") {
  const ModelParams p;
  for (double score : {0.45, 0.7, 0.9}) {
    const double p1 = p_active(p, score);
    const double phi0 = score, phi1 = 1.0 - score;
    for (auto mode : {InferenceMode::kExact, InferenceMode::kLoopyBp}) {
      const Gradient g = gradient(p, single(score, kActive), mode);
      CHECK(g.theta_u == doctest::Approx(-phi1 + (1.0 - p1) * phi0 + p1 * phi1).epsilon(1e-12));
      CHECK(g.theta_b == 0.0);
    }
  }
  ModelParams hot = p;
  hot.theta_u = 200.0;
  CHECK(std::abs(gradient(hot, single(0.9, kActive), InferenceMode::kExact).theta_u) < 1e-12);
}

TEST_CASE("gradients agree with finite differences") {
  std::mt19937_64 rng(314);
  const ModelParams p;
  double worst = 0.0;
  for (int k = 0; k < 120; ++k) {
    const TrainingSample s = random_sample(rng, 1 + k % 10);
    const GradientCheck c = finite_diff_check(p, s, 1e-5);
    worst = std::max(worst, c.max_relative_error);
    const Gradient bp = gradient(p, s, InferenceMode::kLoopyBp);
    CHECK(std::isfinite(bp.theta_u));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("featureless sample has zero gradient") {
  // Score 0.5 with an unchanged aspect ratio and a lone node.
  HypothesisWindow w = steady(1, 0.5);
  TrainingSample s;
  s.windows = {w};
  s.gold = {{1, kActive}};
  ModelParams p;
  p.features.alpha1 = 0.0;
  const GradientCheck c = finite_diff_check(p, s, 1e-5);
  CHECK(c.analytic.theta_u == 0.0);
  CHECK(c.analytic.theta_b == 0.0);
  CHECK(c.max_relative_error == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("finite difference error grows with the step") {
  std::mt19937_64 rng(5);
  const ModelParams p;
  TrainingSample s = random_sample(rng, 6);
  double prev = 0.0;
  for (double h : {1e-4, 1e-2, 1e-1, 1.0}) {
    const double e = finite_diff_check(p, s, h).max_relative_error;
    CHECK(e >= prev);
    prev = e;
  }
  CHECK(prev > 1e-4);
}

TEST_CASE("gold labels and negatives") {
  // One target; the run's tracklet slides off it at frame 5 (IoU 0.2).
  TrackFile gt, runf;
  for (int f = 1; f <= 6; ++f) gt.records.push_back(rec(f, 1, 100));
  const double shift = 50.0 * (1.0 - 0.2) / 1.2;
  for (int f = 1; f <= 6; ++f) runf.records.push_back(rec(f, 1, f >= 5 ? 100 + shift : 100));
  const auto gold = gold_labels(runf, gt);
  CHECK(gold.at({4, 1}) == kActive);
  CHECK(gold.at({5, 1}) == kInactive);
  CHECK(gold.at({6, 1}) == kInactive);

  const std::vector<SequenceRun> runs{{"s", runf, gt, FrameContext{}}};
  const auto data = generate_dataset(runs, ModelParams{}, TrainConfig{});
  // Frames 5 and 6 are negative; frames 3 and 4 are the only positives.
  REQUIRE(data.size() == 4);
  std::size_t negatives = 0;
  for (const auto& s : data) {
    if (s.provenance.negative) {
      ++negatives;
      CHECK(s.gold.at(1) == kInactive);
    }
  }
  CHECK(negatives == 2);

  // A tracklet that outlives its target turns gold 0.
  TrackFile shortgt;
  for (int f = 1; f <= 4; ++f) shortgt.records.push_back(rec(f, 1, 100));
  TrackFile longrun;
  for (int f = 1; f <= 6; ++f) longrun.records.push_back(rec(f, 3, 100));
  CHECK(gold_labels(longrun, shortgt).at({5, 3}) == kInactive);
}

TEST_CASE("no drift means no dataset") {
  TrackFile gt;
  for (int f = 1; f <= 8; ++f) gt.records.push_back(rec(f, 1, 100 + f));
  const std::vector<SequenceRun> runs{{"clean", gt, gt, FrameContext{}}};
  CHECK(generate_dataset(runs, ModelParams{}, TrainConfig{}).empty());
}

TEST_CASE("positive ratio and determinism") {
  const auto runs = baseline_runs({0, 1}, ModelParams{});
  const auto count = [](const std::vector<TrainingSample>& d) {
    std::size_t neg = 0;
    for (const auto& s : d) neg += s.provenance.negative;
    return std::pair(neg, d.size() - neg);
  };
  TrainConfig all;
  all.positive_ratio = 100000;
  const auto [negatives, available] = count(generate_dataset(runs, ModelParams{}, all));
  CHECK(negatives > 0);
  CHECK(available > 0);
  for (std::size_t ratio : {0u, 1u, 3u, 5u}) {
    TrainConfig c;
    c.positive_ratio = ratio;
    c.shuffle_seed = 17;
    const auto a = generate_dataset(runs, ModelParams{}, c);
    const auto b = generate_dataset(runs, ModelParams{}, c);
    const auto [neg, pos] = count(a);
    CHECK(neg == negatives);
    CHECK(pos == std::min(ratio * negatives, available));
    std::ostringstream sa, sb;
    write_dataset(sa, a);
    write_dataset(sb, b);
    CHECK(sa.str() == sb.str());
  }
}

TEST_CASE("dataset round trip") {
  std::mt19937_64 rng(2);
  std::vector<TrainingSample> data;
  for (int k = 0; k < 20; ++k) data.push_back(random_sample(rng, 1 + k % 5));
  std::ostringstream out;
  write_dataset(out, data);
  std::istringstream in(out.str());
  const auto back = parse_dataset(in);
  REQUIRE(back.size() == data.size());
  const ModelParams p;
  for (std::size_t k = 0; k < data.size(); ++k) {
    CHECK(back[k].gold == data[k].gold);
    CHECK(log_likelihood(p, back[k], InferenceMode::kExact) ==
          log_likelihood(p, data[k], InferenceMode::kExact));
  }
  std::ostringstream again;
  write_dataset(again, back);
  CHECK(again.str() == out.str());

  std::istringstream broken("sample s 1 negative\ncontext 1920 1080 30\nwindow 1 3 0.9 1 0 0 1 1\nend\n");
  CHECK_THROWS_AS(parse_dataset(broken), Error);
}

TEST_CASE("training") {
  const auto runs = baseline_runs({0, 1}, ModelParams{});
  const auto data = generate_dataset(runs, ModelParams{}, TrainConfig{});
  ModelParams init;
  init.theta_u = 0.5;
  init.theta_b = 0.5;

  TrainConfig still;
  still.learning_rate = 0.0;
  still.epochs = 3;
  const TrainResult frozen = sgd_train(data, init, still);
  CHECK(frozen.params.theta_u == init.theta_u);
  CHECK(frozen.params.theta_b == init.theta_b);
  CHECK(frozen.trace.size() == 4);

  TrainConfig c;
  c.epochs = 5;
  c.shuffle_seed = 9;
  const TrainResult a = sgd_train(data, init, c);
  const TrainResult b = sgd_train(data, init, c);
  CHECK(a.params.theta_u == b.params.theta_u);
  CHECK(a.params.theta_b == b.params.theta_b);
  CHECK(a.trace == b.trace);
  CHECK(a.trace.back() > a.trace.front());
  CHECK(a.params.features.beta == init.features.beta);
  CHECK_THROWS_AS(sgd_train({}, init, c), Error);

  // One small full-batch step never lowers the likelihood.
  Gradient total;
  for (const auto& s : data) {
    const Gradient g = gradient(init, s, InferenceMode::kExact);
    total.theta_u += g.theta_u;
    total.theta_b += g.theta_b;
  }
  ModelParams next = init;
  next.theta_u += 1e-5 * total.theta_u;
  next.theta_b += 1e-5 * total.theta_b;
  CHECK(log_likelihood(next, data, InferenceMode::kExact) >=
        log_likelihood(init, data, InferenceMode::kExact));
}

TEST_CASE("frame files") {
  FrameInput f{FrameContext{640, 480, 25}, {steady(3, 0.9), steady(8, 0.6, 200)}};
  std::ostringstream out;
  write_frame(out, f);
  std::istringstream in(out.str());
  const FrameInput back = parse_frame(in);
  CHECK(back.ctx == f.ctx);
  REQUIRE(back.windows.size() == 2);
  CHECK(back.windows[1].tracklet_id == 8);
  CHECK(back.windows[1].boxes == f.windows[1].boxes);
}
