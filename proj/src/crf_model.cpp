#include "crftrack/crf_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "crftrack/error.hpp"

namespace crftrack {

void ModelParams::validate() const {
  features.validate();
  bp.validate();
  if (node_budget < 1) fail(ErrorKind::kValidation, "node_budget must be >= 1");
  if (!(pre_threshold >= 0.0 && pre_threshold <= 1.0) ||
      !(short_threshold >= 0.0 && short_threshold <= 1.0)) {
    fail(ErrorKind::kValidation, "thresholds must lie in [0,1]");
  }
  if (!std::isfinite(theta_u) || !std::isfinite(theta_b)) {
    fail(ErrorKind::kValidation, "theta_u and theta_b must be finite");
  }
  if (min_crf_length < 3) fail(ErrorKind::kValidation, "min_crf_length must be >= 3");
}

FrameAssembly assemble_frame_graph(std::span<const HypothesisWindow> windows,
                                   const ModelParams& params, const FrameContext& ctx) {
  params.validate();
  ctx.validate();
  std::set<TrackletId> seen;
  for (const HypothesisWindow& w : windows) {
    w.validate();
    if (!seen.insert(w.tracklet_id).second) {
      fail(ErrorKind::kValidation, "duplicate tracklet id " + std::to_string(w.tracklet_id));
    }
  }

  FrameAssembly out;
  std::vector<const HypothesisWindow*> eligible;
  for (const HypothesisWindow& w : windows) {
    if (w.score < params.pre_threshold) {
      out.bypass_inactive.push_back(w.tracklet_id);
    } else if (w.length < params.min_crf_length) {
      auto& bucket = w.score < params.short_threshold ? out.bypass_inactive : out.bypass_active;
      bucket.push_back(w.tracklet_id);
    } else {
      eligible.push_back(&w);
    }
  }

  // Lowest scores enter the CRF; ties go to the smaller id.
  std::sort(eligible.begin(), eligible.end(), [](const auto* a, const auto* b) {
    if (a->score != b->score) return a->score < b->score;
    return a->tracklet_id < b->tracklet_id;
  });
  if (eligible.size() > params.node_budget) {
    for (std::size_t k = params.node_budget; k < eligible.size(); ++k) {
      out.bypass_active.push_back(eligible[k]->tracklet_id);
    }
    eligible.resize(params.node_budget);
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const auto* a, const auto* b) { return a->tracklet_id < b->tracklet_id; });
  std::sort(out.bypass_active.begin(), out.bypass_active.end());
  std::sort(out.bypass_inactive.begin(), out.bypass_inactive.end());

  const std::size_t n = eligible.size();
  out.graph = FactorGraph(params.node_budget);
  for (std::size_t v = n; v < params.node_budget; ++v) out.graph.set_real(v, false);
  for (std::size_t v = 0; v < n; ++v) {
    out.node_map.push_back(eligible[v]->tracklet_id);
    const UnaryTable phi = unary_feature_table(*eligible[v], params.features);
    out.unary_features.push_back(phi);
    const UnaryTable energy{params.theta_u * phi[0], params.theta_u * phi[1]};
    if (!std::isfinite(energy[0]) || !std::isfinite(energy[1])) {
      fail(ErrorKind::kNumerical,
           "unary energy overflows for tracklet " + std::to_string(eligible[v]->tracklet_id));
    }
    out.graph.set_unary(v, energy);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const PairTable phi = binary_feature_table(*eligible[i], *eligible[j], params.features, ctx);
      PairTable energy{};
      for (std::size_t k = 0; k < 4; ++k) {
        energy[k] = params.theta_b * phi[k];
        if (!std::isfinite(energy[k])) {
          fail(ErrorKind::kNumerical, "pair energy overflows for tracklets " +
                                          std::to_string(eligible[i]->tracklet_id) + " and " +
                                          std::to_string(eligible[j]->tracklet_id));
        }
      }
      out.graph.add_pair(i, j, energy);
      out.pair_features.push_back(phi);
    }
  }
  return out;
}

std::vector<Label> crf_labels(const FrameAssembly& assembly, InferenceMode mode,
                              const BpConfig& bp) {
  const InferenceResult result = mode == InferenceMode::kExact
                                     ? exact_inference(assembly.graph)
                                     : max_product(assembly.graph, bp);
  return {result.map_labels.begin(),
          result.map_labels.begin() + static_cast<std::ptrdiff_t>(assembly.real_count())};
}

FrameDecisions decide_inactivation(std::span<const HypothesisWindow> windows,
                                   const ModelParams& params, const FrameContext& ctx,
                                   InferenceMode mode, const BpConfig& bp) {
  const FrameAssembly assembly = assemble_frame_graph(windows, params, ctx);
  FrameDecisions out;
  for (const HypothesisWindow& w : windows) {
    if (w.score < params.pre_threshold) {
      out[w.tracklet_id] = {kInactive, DecisionSource::kPreThreshold};
    } else if (w.length < params.min_crf_length) {
      out[w.tracklet_id] = {w.score < params.short_threshold ? kInactive : kActive,
                            DecisionSource::kShortTracklet};
    }
  }
  for (TrackletId id : assembly.bypass_active) {
    if (!out.contains(id)) out[id] = {kActive, DecisionSource::kFiltered};
  }
  if (assembly.real_count() > 0) {
    const std::vector<Label> labels = crf_labels(assembly, mode, bp);
    for (std::size_t v = 0; v < labels.size(); ++v) {
      out[assembly.node_map[v]] = {labels[v], DecisionSource::kCrf};
    }
  }
  return out;
}

double labeling_energy(const FrameAssembly& assembly, const std::map<TrackletId, Label>& labels) {
  std::vector<Label> full(assembly.graph.num_vars(), kActive);
  for (std::size_t v = 0; v < assembly.real_count(); ++v) {
    const auto it = labels.find(assembly.node_map[v]);
    if (it == labels.end()) {
      fail(ErrorKind::kValidation,
           "no label for real node tracklet " + std::to_string(assembly.node_map[v]));
    }
    if (it->second != kInactive && it->second != kActive) {
      fail(ErrorKind::kValidation, "labels must be 0 or 1");
    }
    full[v] = it->second;
  }
  return labeling_energy(assembly.graph, full);
}

}  // namespace crftrack
