#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "crftrack/crf_model.hpp"
#include "crftrack/features.hpp"
#include "crftrack/io.hpp"

namespace crftrack {

struct Provenance {
  std::string sequence;
  int frame = 0;
  bool negative = false;
};

/// One frame's CRF nodes with their gold labels. `windows` holds exactly the
/// tracklets that enter the CRF, so re-assembling them reproduces the nodes.
struct TrainingSample {
  FrameContext ctx;
  std::vector<HypothesisWindow> windows;
  std::map<TrackletId, Label> gold;
  Provenance provenance;

  void validate() const;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  std::size_t epochs = 30;
  std::size_t positive_ratio = 3;
  std::uint64_t shuffle_seed = 0;
  InferenceMode inference = InferenceMode::kExact;

  void validate() const;
};

/// Output of the threshold-only tracker on one sequence, with its ground
/// truth.
struct SequenceRun {
  std::string name;
  TrackFile run;
  TrackFile ground_truth;
  FrameContext ctx;
};

/// Each tracklet of a run is owned by the GT trajectory it overlaps most
/// (IoU >= 0.5) at its first frame. A node's gold label is 1 while its box
/// keeps IoU >= 0.5 with the owner's box, and 0 otherwise, including after
/// the owner has left. Frames with a gold-0 CRF node are negatives; positives
/// are drawn from the frames whose nodes are all gold 1, at most
/// `positive_ratio` per negative. Samples come back ordered by sequence and
/// frame. No negatives gives an empty dataset.
std::vector<TrainingSample> generate_dataset(const std::vector<SequenceRun>& runs,
                                             const ModelParams& params,
                                             const TrainConfig& config);

/// Gold label of a tracklet at every frame of the run, keyed (frame, id).
std::map<std::pair<int, TrackletId>, Label> gold_labels(const TrackFile& run,
                                                        const TrackFile& ground_truth);

/// Sum over samples of -E(gold) - log Z. Z counts real nodes only. Throws
/// kUnsupportedMode for loopy BP.
double log_likelihood(const ModelParams& params, const std::vector<TrainingSample>& samples,
                      InferenceMode mode);
double log_likelihood(const ModelParams& params, const TrainingSample& sample,
                      InferenceMode mode);

struct Gradient {
  double theta_u = 0.0;
  double theta_b = 0.0;
};

/// d log-likelihood / d theta: model expectation of each feature minus its
/// gold value. Expectations use exact marginals or sum-product beliefs.
Gradient gradient(const ModelParams& params, const TrainingSample& sample, InferenceMode mode);

struct TrainResult {
  ModelParams params;
  /// Exact log-likelihood of the whole dataset before training and after
  /// each epoch (epochs + 1 entries).
  std::vector<double> trace;
};

/// Per-sample ascent on theta_u and theta_b; the other parameters are held.
/// Throws kNumerical naming the sample when a gradient is not finite.
TrainResult sgd_train(const std::vector<TrainingSample>& samples, const ModelParams& init,
                      const TrainConfig& config);

struct GradientCheck {
  Gradient analytic;
  Gradient numeric;
  double max_relative_error = 0.0;  // |a - n| / max(|a|, |n|, 1)
};

/// Exact-mode gradient against centered differences of the log-likelihood.
GradientCheck finite_diff_check(const ModelParams& params, const TrainingSample& sample,
                                double h);

// Line-oriented dataset file:
//   sample <sequence> <frame> negative|positive
//   context <width> <height> <fps>
//   window <id> <length> <score> <gold> <left top width height>...
//   end
// One box per stored frame, oldest first. Frame files for single-frame
// inference use the same context and window lines without the gold field.
void write_dataset(std::ostream& out, const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> parse_dataset(std::istream& in);
std::vector<TrainingSample> read_dataset(const std::filesystem::path& path);

struct FrameInput {
  FrameContext ctx;
  std::vector<HypothesisWindow> windows;
};

void write_frame(std::ostream& out, const FrameInput& frame);
FrameInput parse_frame(std::istream& in);
FrameInput read_frame(const std::filesystem::path& path);

/// Windows of every tracklet present at `frame` in a track file, rebuilt from
/// the tracklet's consecutive rows up to that frame.
std::vector<HypothesisWindow> windows_at(const TrackFile& track, int frame);

}  // namespace crftrack
