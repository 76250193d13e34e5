#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "crftrack/factor_graph.hpp"
#include "crftrack/features.hpp"

namespace crftrack {

enum class InferenceMode { kExact, kLoopyBp };

/// Shared CRF weights, feature hyperparameters and workflow thresholds.
/// Defaults are the published trained values.
struct ModelParams {
  double theta_u = 0.98;
  double theta_b = 0.12;
  FeatureParams features;
  std::size_t node_budget = 10;
  double pre_threshold = 0.4;
  double short_threshold = 0.5;
  std::size_t min_crf_length = 3;
  BpConfig bp;

  void validate() const;
};

/// A frame's CRF plus the bookkeeping of which tracklets bypassed it.
///
/// Real nodes occupy variables [0, node_map.size()); the remaining variables
/// up to the node budget are dummies. Pair factors exist only between real
/// nodes: zero tables touching dummies are left out.
struct FrameAssembly {
  FactorGraph graph;
  std::vector<TrackletId> node_map;
  std::vector<TrackletId> bypass_active;
  std::vector<TrackletId> bypass_inactive;
  std::vector<UnaryTable> unary_features;  // per real node
  std::vector<PairTable> pair_features;    // parallel to graph.pairs()

  std::size_t real_count() const { return node_map.size(); }
  std::size_t dummy_count() const { return graph.num_vars() - node_map.size(); }
};

FrameAssembly assemble_frame_graph(std::span<const HypothesisWindow> windows,
                                   const ModelParams& params, const FrameContext& ctx);

/// Why a tracklet got its label.
enum class DecisionSource {
  kPreThreshold,   // score below the pre-threshold
  kShortTracklet,  // too short for the CRF, short threshold applied
  kFiltered,       // surplus high-score hypothesis kept out of the CRF
  kCrf,
};

struct NodeDecision {
  Label label = kActive;
  DecisionSource source = DecisionSource::kCrf;
};

using FrameDecisions = std::map<TrackletId, NodeDecision>;

/// MAP labels for the real nodes of an assembly, in node order.
std::vector<Label> crf_labels(const FrameAssembly& assembly, InferenceMode mode,
                              const BpConfig& bp);

FrameDecisions decide_inactivation(std::span<const HypothesisWindow> windows,
                                   const ModelParams& params, const FrameContext& ctx,
                                   InferenceMode mode, const BpConfig& bp);

/// Total energy of a labeling of the real nodes; exp(-energy) is the
/// unnormalized probability of that labeling.
double labeling_energy(const FrameAssembly& assembly, const std::map<TrackletId, Label>& labels);

}  // namespace crftrack
