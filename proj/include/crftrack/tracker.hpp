#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "crftrack/crf_model.hpp"
#include "crftrack/features.hpp"
#include "crftrack/io.hpp"

namespace crftrack {

enum class TrackMode { kThresholdOnly, kCrf };

enum class Decision {
  kKept,                  // labeled active by the CRF or the baseline threshold
  kInactivatedThreshold,  // score rule (pre-threshold, short tracklet, baseline)
  kInactivatedCrf,
  kBypass,                // kept without entering the CRF
  kStarted,               // new tracklet from an unsuppressed detection
  kLost,                  // no hypothesis this frame
};

const char* to_string(Decision d);

/// Rolling state of one active tracklet.
struct Tracklet {
  std::deque<Box> boxes;    // at most 3, oldest first
  std::deque<double> scores;
  std::size_t length = 0;   // frames tracked so far
};

struct TrackerState {
  std::map<TrackletId, Tracklet> active;
  std::map<TrackletId, int> inactive;  // id -> frame of inactivation
  TrackletId next_id = 1;
};

/// A regressed box for an active tracklet, or a new detection when
/// `tracklet` is empty.
struct Hypothesis {
  std::optional<TrackletId> tracklet;
  Box box;
  double score = 0.0;
};

struct TrackletOutcome {
  TrackletId id = 0;
  Box box;
  double score = 0.0;
  Decision decision = Decision::kKept;
};

struct FrameResult {
  int frame = 0;
  std::vector<TrackletOutcome> records;  // sorted by id
  /// (index into the frame's hypotheses, new tracklet id) for detections
  /// that started a tracklet.
  std::vector<std::pair<std::size_t, TrackletId>> started;
};

struct TrackerOptions {
  TrackMode mode = TrackMode::kCrf;
  InferenceMode inference = InferenceMode::kLoopyBp;
  /// Called in CRF mode with the windows handed to decide_inactivation.
  std::function<void(int frame, const std::vector<HypothesisWindow>&)> on_windows;
};

/// Advances the tracker by one frame.
///
/// Active tracklets without a hypothesis are lost. Threshold-only mode
/// inactivates scores below the short threshold; CRF mode defers to
/// decide_inactivation. Detections are then suppressed greedily (score
/// descending) against kept tracklets and each other at IoU >= 0.5; the rest
/// start tracklets with fresh ids. Inactivated ids are never reused or
/// revived.
FrameResult step(TrackerState& state, int frame, const std::vector<Hypothesis>& hypotheses,
                 const ModelParams& params, const FrameContext& ctx,
                 const TrackerOptions& options);

struct RunResult {
  TrackFile output;
  std::vector<FrameResult> frames;
};

/// Runs the tracker over a hypothesis file whose ids are regression chains:
/// a chain id seen for the first time is a detection; once it starts a
/// tracklet, later rows of that chain extend it; rows of chains whose
/// tracklet was inactivated are dropped; suppressed chains retry as
/// detections on later frames. Output ids are tracker ids.
RunResult run(const TrackFile& hypotheses, const ModelParams& params, const FrameContext& ctx,
              const TrackerOptions& options);

void write_decisions(std::ostream& out, const std::vector<FrameResult>& frames);

}  // namespace crftrack
