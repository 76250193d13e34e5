#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "crftrack/io.hpp"

namespace crftrack {

/// At `frame` the victim's hypothesis starts sliding onto the neighbor.
/// The victim leaves the image at that frame; the neighbor becomes visible
/// two frames later, once the slide is complete.
struct DriftEvent {
  int frame = 0;
  std::size_t victim = 0;
  std::size_t neighbor = 0;
};

/// Camera pan in pixels per frame, effective from `start_frame` on.
struct PanSegment {
  int start_frame = 1;
  double dx = 0.0;
  double dy = 0.0;
};

struct ScenarioSpec {
  int num_frames = 120;
  double image_width = 1920.0;
  double image_height = 1080.0;
  double frame_rate = 30.0;
  std::size_t num_targets = 8;
  std::vector<PanSegment> camera_pan;
  std::vector<DriftEvent> drift_events;
  double noise = 0.0;    // std of hypothesis box jitter, pixels
  int drift_linger = 8;  // frames the drifted hypothesis stays on the neighbor
  std::uint64_t seed = 0;

  void validate() const;
};

struct Scenario {
  TrackFile hypotheses;    // ids are regression chains
  TrackFile ground_truth;  // ids are target identities
  SequenceInfo info;
};

/// Constant-velocity targets under camera pan. Deterministic in the seed;
/// the static-camera trajectories of targets not involved in drift events do
/// not depend on the pan.
Scenario generate_scenario(const ScenarioSpec& spec);

/// key=value scenario file. Repeatable keys: `camera_pan = dx,dy` or
/// `camera_pan = frame:dx,dy`, and `drift_event = frame,victim,neighbor`.
ScenarioSpec parse_scenario_spec(std::istream& in);
ScenarioSpec read_scenario_spec(const std::filesystem::path& path);
void write_scenario_spec(std::ostream& out, const ScenarioSpec& spec);

}  // namespace crftrack
