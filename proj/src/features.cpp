#include "crftrack/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crftrack/error.hpp"

namespace crftrack {

namespace {

void require_history(const HypothesisWindow& window, std::size_t frames) {
  if (!window.has_history(frames)) {
    fail(ErrorKind::kInsufficientHistory,
         "tracklet " + std::to_string(window.tracklet_id) + " needs " + std::to_string(frames) +
             " frames of history, has " + std::to_string(window.boxes.size()));
  }
}

// Relative height change between two consecutive frames, per second.
double relative_height_rate(const Box& now, const Box& before, double frame_rate) {
  return frame_rate * (now.height - before.height) / before.height;
}

}  // namespace

bool Box::valid() const {
  return std::isfinite(left) && std::isfinite(top) && std::isfinite(width) &&
         std::isfinite(height) && width > 0.0 && height > 0.0;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left, b.left);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.width * a.height + b.width * b.height - inter);
}

const Box& HypothesisWindow::current() const { return at(0); }

const Box& HypothesisWindow::at(std::size_t back) const {
  require_history(*this, back + 1);
  return boxes[boxes.size() - 1 - back];
}

void HypothesisWindow::validate() const {
  if (boxes.empty() || boxes.size() > 3) {
    fail(ErrorKind::kValidation, "tracklet " + std::to_string(tracklet_id) +
                                     " window must hold 1 to 3 boxes");
  }
  if (boxes.size() != std::min<std::size_t>(length, 3)) {
    fail(ErrorKind::kValidation, "tracklet " + std::to_string(tracklet_id) +
                                     " window size does not match its length");
  }
  if (!(score >= 0.0 && score <= 1.0)) {
    fail(ErrorKind::kValidation, "tracklet " + std::to_string(tracklet_id) + " score outside [0,1]");
  }
  for (const Box& b : boxes) {
    if (!b.valid()) {
      fail(ErrorKind::kValidation, "tracklet " + std::to_string(tracklet_id) + " has an invalid box");
    }
  }
}

void FrameContext::validate() const {
  if (!(image_width > 0.0 && image_height > 0.0 && frame_rate > 0.0)) {
    fail(ErrorKind::kValidation, "frame context values must be positive");
  }
}

void FeatureParams::validate() const {
  if (!(alpha1 >= 0.0 && alpha2 >= 0.0 && beta >= 0.0)) {
    fail(ErrorKind::kValidation, "alpha1, alpha2 and beta must be non-negative");
  }
  if (!(high_score_cut >= 0.0 && high_score_cut <= 1.0)) {
    fail(ErrorKind::kValidation, "high_score_cut must lie in [0,1]");
  }
  if (!(epsilon_dl > 0.0)) fail(ErrorKind::kValidation, "epsilon_dl must be positive");
}

double aspect_ratio_change(const HypothesisWindow& window) {
  require_history(window, 2);
  const Box& now = window.at(0);
  const Box& before = window.at(1);
  return (now.width / now.height) / (before.width / before.height);
}

Vec2 velocity_change(const HypothesisWindow& window, const FrameContext& ctx) {
  require_history(window, 3);
  const Box& p0 = window.at(2);
  const Box& p1 = window.at(1);
  const Box& p2 = window.at(0);
  const double w = ctx.frame_rate;
  const Vec2 v_prev{w * (p1.center_x() - p0.center_x()), w * (p1.center_y() - p0.center_y())};
  const Vec2 v_now{w * (p2.center_x() - p1.center_x()), w * (p2.center_y() - p1.center_y())};
  return {w * (v_now.x - v_prev.x), w * (v_now.y - v_prev.y)};
}

double height_change_rate(const HypothesisWindow& window, const FrameContext& ctx,
                          const FeatureParams& params) {
  require_history(window, 3);
  const double w = ctx.frame_rate;
  const double dh_prev = relative_height_rate(window.at(1), window.at(2), w);
  const double dh_now = relative_height_rate(window.at(0), window.at(1), w);
  const double sign = dh_prev < 0.0 ? -1.0 : 1.0;
  const double denom = sign * std::max(std::abs(dh_prev), params.epsilon_dl);
  return w * (dh_now - dh_prev) / denom;
}

int boundary_flag(const Box& box, const FrameContext& ctx) {
  const bool outside = box.left < 0.0 || box.top < 0.0 || box.right() > ctx.image_width ||
                       box.bottom() > ctx.image_height;
  return outside ? 0 : 1;
}

double unary_feature(const HypothesisWindow& window, Label label, const FeatureParams& params) {
  const double s = window.score;
  if (label == kInactive) {
    return s + (s > params.high_score_cut ? params.alpha1 : 0.0);
  }
  return (1.0 - s) + params.alpha2 * std::abs(1.0 - aspect_ratio_change(window));
}

double binary_feature(const HypothesisWindow& first, const HypothesisWindow& second,
                      Label first_label, Label second_label, const FeatureParams& params,
                      const FrameContext& ctx) {
  if (first_label != kActive || second_label != kActive) return 0.0;
  return binary_feature_table(first, second, params, ctx)[pair_index(kActive, kActive)];
}

double unary_feature_center_distance(double distance, double aspect_change, Label label,
                                     double alpha) {
  if (!(distance > 0.0)) fail(ErrorKind::kValidation, "center distance must be positive");
  if (label == kInactive) return 1.0 / distance;
  return alpha * std::abs(1.0 - aspect_change);
}

UnaryTable unary_feature_table(const HypothesisWindow& window, const FeatureParams& params) {
  return {unary_feature(window, kInactive, params), unary_feature(window, kActive, params)};
}

PairTable binary_feature_table(const HypothesisWindow& first, const HypothesisWindow& second,
                               const FeatureParams& params, const FrameContext& ctx) {
  const Vec2 dv_i = velocity_change(first, ctx);
  const Vec2 dv_j = velocity_change(second, ctx);
  const double tau = 1.0 / (first.current().height + second.current().height);
  const double dx = dv_i.x - dv_j.x;
  const double dy = dv_i.y - dv_j.y;
  const double motion = tau * dx * dx + tau * dy * dy;

  const int kappa = boundary_flag(first.current(), ctx) * boundary_flag(second.current(), ctx);
  double size = 0.0;
  if (kappa != 0) {
    size = params.beta *
           std::abs(height_change_rate(first, ctx, params) - height_change_rate(second, ctx, params));
  }
  PairTable table{};
  table[pair_index(kActive, kActive)] = motion + size;
  return table;
}

}  // namespace crftrack
