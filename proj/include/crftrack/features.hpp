#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "crftrack/factor_graph.hpp"

namespace crftrack {

using TrackletId = std::int64_t;

/// Axis-aligned box in pixels, MOT convention (top-left corner + size).
struct Box {
  double left = 0.0;
  double top = 0.0;
  double width = 1.0;
  double height = 1.0;

  double center_x() const { return left + width / 2.0; }
  double center_y() const { return top + height / 2.0; }
  double right() const { return left + width; }
  double bottom() const { return top + height; }
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Recent observations of one tracklet. `boxes` is chronological (oldest
/// first) and holds min(length, 3) entries; the last one is frame t.
struct HypothesisWindow {
  TrackletId tracklet_id = 0;
  std::vector<Box> boxes;
  double score = 0.0;
  std::size_t length = 0;

  const Box& current() const;
  /// Box `back` frames before the current one (0 = current).
  const Box& at(std::size_t back) const;
  bool has_history(std::size_t frames) const { return boxes.size() >= frames; }
  void validate() const;
};

struct FrameContext {
  double image_width = 1920.0;
  double image_height = 1080.0;
  double frame_rate = 30.0;

  void validate() const;
  friend bool operator==(const FrameContext&, const FrameContext&) = default;
};

struct FeatureParams {
  double alpha1 = 1.05;
  double alpha2 = 1.20;
  double beta = 10.80;
  double high_score_cut = 0.95;
  double epsilon_dl = 1e-3;

  void validate() const;
  friend bool operator==(const FeatureParams&, const FeatureParams&) = default;
};

// Kinematic quantities. Each throws kInsufficientHistory when the window is
// too short (2 boxes for the aspect ratio, 3 for the rest).

/// (w/h at t) / (w/h at t-1).
double aspect_ratio_change(const HypothesisWindow& window);

/// Frame-rate scaled change of center velocity, pixels / s^2.
Vec2 velocity_change(const HypothesisWindow& window, const FrameContext& ctx);

/// Frame-rate scaled change of the relative height change rate. The
/// denominator is clamped away from zero by `epsilon_dl`, keeping its sign
/// (sign(0) = +1).
double height_change_rate(const HypothesisWindow& window, const FrameContext& ctx,
                          const FeatureParams& params);

/// 0 if the box reaches outside the image, else 1.
int boundary_flag(const Box& box, const FrameContext& ctx);

/// Unary penalty: label 0 costs the score (plus alpha1 above the high-score
/// cut); label 1 costs the missing score plus alpha2 times the aspect ratio
/// deviation.
double unary_feature(const HypothesisWindow& window, Label label, const FeatureParams& params);

/// Pairwise penalty, non-zero only for the label pair (1,1).
double binary_feature(const HypothesisWindow& first, const HypothesisWindow& second,
                      Label first_label, Label second_label, const FeatureParams& params,
                      const FrameContext& ctx);

/// Alternate unary for trackers that predict a center offset: label 0 costs
/// 1/distance, label 1 costs alpha * |1 - aspect change|.
double unary_feature_center_distance(double distance, double aspect_change, Label label,
                                     double alpha);

UnaryTable unary_feature_table(const HypothesisWindow& window, const FeatureParams& params);
PairTable binary_feature_table(const HypothesisWindow& first, const HypothesisWindow& second,
                               const FeatureParams& params, const FrameContext& ctx);

}  // namespace crftrack
