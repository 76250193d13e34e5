#pragma once

#include <random>
#include <string>
#include <vector>

#include "crftrack/scenario.hpp"
#include "crftrack/tracker.hpp"
#include "crftrack/training.hpp"

namespace crftrack::testing {

// Frame with `n` CRF-eligible windows of mixed kinematics and random gold
// labels.
inline TrainingSample random_sample(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TrainingSample s;
  s.provenance = {"random", 1, false};
  for (std::size_t k = 0; k < n; ++k) {
    HypothesisWindow w;
    w.tracklet_id = static_cast<TrackletId>(k + 1);
    w.length = 3 + static_cast<std::size_t>(u(rng) * 20.0);
    w.score = 0.4 + 0.6 * u(rng);
    double left = 50.0 + 1700.0 * u(rng);
    double top = 50.0 + 800.0 * u(rng);
    double height = 80.0 + 120.0 * u(rng);
    double width = height * (0.35 + 0.15 * u(rng));
    const double vx = 4.0 * u(rng) - 2.0;
    for (int t = 0; t < 3; ++t) {
      w.boxes.push_back({left, top, width, height});
      left += vx + 0.05 * (u(rng) - 0.5);
      top += 0.05 * (u(rng) - 0.5);
      height += 0.2 * (u(rng) - 0.5);
      width += 0.2 * (u(rng) - 0.5);
    }
    s.gold[w.tracklet_id] = u(rng) < 0.3 ? kInactive : kActive;
    s.provenance.negative = s.provenance.negative || s.gold[w.tracklet_id] == kInactive;
    s.windows.push_back(std::move(w));
  }
  return s;
}

// Drift battery scenario: 8 targets, pan, four boundary-drift events.
inline ScenarioSpec battery_spec(std::uint64_t seed) {
  ScenarioSpec s;
  s.num_frames = 120;
  s.num_targets = 8;
  s.camera_pan = {{1, 1.5, 0.0}, {60, 1.0, 0.25}};
  s.drift_events = {{20, 0, 1}, {45, 2, 3}, {70, 4, 5}, {95, 6, 7}};
  s.seed = seed;
  return s;
}

// Baseline runs of battery scenarios, ready for dataset generation.
inline std::vector<SequenceRun> baseline_runs(const std::vector<std::uint64_t>& seeds,
                                              const ModelParams& params) {
  std::vector<SequenceRun> runs;
  for (std::uint64_t seed : seeds) {
    const Scenario sc = generate_scenario(battery_spec(seed));
    const RunResult r =
        run(sc.hypotheses, params, sc.info.ctx, {TrackMode::kThresholdOnly, InferenceMode::kExact});
    runs.push_back({"seq" + std::to_string(seed), r.output, sc.ground_truth, sc.info.ctx});
  }
  return runs;
}

}  // namespace crftrack::testing
