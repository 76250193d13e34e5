#include "crftrack/tracker.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>
#include <string>

#include "crftrack/error.hpp"

namespace crftrack {

namespace {

inline constexpr double kNmsIou = 0.5;
inline constexpr std::size_t kHistory = 3;

HypothesisWindow window_of(TrackletId id, const Tracklet& t) {
  HypothesisWindow w;
  w.tracklet_id = id;
  w.boxes.assign(t.boxes.begin(), t.boxes.end());
  w.score = t.scores.back();
  w.length = t.length;
  return w;
}

Decision decision_of(const NodeDecision& d) {
  switch (d.source) {
    case DecisionSource::kPreThreshold:
      return Decision::kInactivatedThreshold;
    case DecisionSource::kShortTracklet:
      return d.label == kInactive ? Decision::kInactivatedThreshold : Decision::kBypass;
    case DecisionSource::kFiltered:
      return Decision::kBypass;
    case DecisionSource::kCrf:
      return d.label == kInactive ? Decision::kInactivatedCrf : Decision::kKept;
  }
  return Decision::kKept;
}

bool is_output(Decision d) {
  return d == Decision::kKept || d == Decision::kBypass || d == Decision::kStarted;
}

}  // namespace

const char* to_string(Decision d) {
  switch (d) {
    case Decision::kKept:
      return "kept";
    case Decision::kInactivatedThreshold:
      return "inactivated-threshold";
    case Decision::kInactivatedCrf:
      return "inactivated-crf";
    case Decision::kBypass:
      return "bypass";
    case Decision::kStarted:
      return "started";
    case Decision::kLost:
      return "lost";
  }
  return "?";
}

FrameResult step(TrackerState& state, int frame, const std::vector<Hypothesis>& hypotheses,
                 const ModelParams& params, const FrameContext& ctx,
                 const TrackerOptions& options) {
  std::map<TrackletId, std::size_t> hyp_of;
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const Hypothesis& h = hypotheses[k];
    if (!h.box.valid() || !(h.score >= 0.0 && h.score <= 1.0)) {
      fail(ErrorKind::kValidation, "frame " + std::to_string(frame) + ": invalid hypothesis");
    }
    if (!h.tracklet) continue;
    if (!state.active.contains(*h.tracklet)) {
      fail(ErrorKind::kValidation, "frame " + std::to_string(frame) + ": unknown tracklet id " +
                                       std::to_string(*h.tracklet));
    }
    if (!hyp_of.emplace(*h.tracklet, k).second) {
      fail(ErrorKind::kValidation, "frame " + std::to_string(frame) + ": two hypotheses for tracklet " +
                                       std::to_string(*h.tracklet));
    }
  }

  FrameResult result;
  result.frame = frame;

  for (auto it = state.active.begin(); it != state.active.end();) {
    if (hyp_of.contains(it->first)) {
      ++it;
      continue;
    }
    result.records.push_back({it->first, it->second.boxes.back(), 0.0, Decision::kLost});
    state.inactive[it->first] = frame;
    it = state.active.erase(it);
  }

  std::vector<HypothesisWindow> windows;
  for (const auto& [id, k] : hyp_of) {
    Tracklet& t = state.active.at(id);
    t.boxes.push_back(hypotheses[k].box);
    t.scores.push_back(hypotheses[k].score);
    while (t.boxes.size() > kHistory) t.boxes.pop_front();
    while (t.scores.size() > kHistory) t.scores.pop_front();
    ++t.length;
    windows.push_back(window_of(id, t));
  }

  std::map<TrackletId, Decision> decided;
  if (options.mode == TrackMode::kThresholdOnly) {
    for (const auto& w : windows) {
      decided[w.tracklet_id] = w.score < params.short_threshold ? Decision::kInactivatedThreshold
                                                                : Decision::kKept;
    }
  } else if (!windows.empty()) {
    if (options.on_windows) options.on_windows(frame, windows);
    const FrameDecisions d =
        decide_inactivation(windows, params, ctx, options.inference, params.bp);
    for (const auto& [id, nd] : d) decided[id] = decision_of(nd);
  }

  std::vector<Box> kept_boxes;
  for (const auto& [id, d] : decided) {
    const std::size_t k = hyp_of.at(id);
    result.records.push_back({id, hypotheses[k].box, hypotheses[k].score, d});
    if (is_output(d)) {
      kept_boxes.push_back(hypotheses[k].box);
    } else {
      state.active.erase(id);
      state.inactive[id] = frame;
    }
  }

  // Detections below the short threshold are not trusted to start tracks.
  std::vector<std::size_t> detections;
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    if (!hypotheses[k].tracklet && hypotheses[k].score >= params.short_threshold) {
      detections.push_back(k);
    }
  }
  std::stable_sort(detections.begin(), detections.end(), [&](std::size_t a, std::size_t b) {
    return hypotheses[a].score > hypotheses[b].score;
  });
  for (std::size_t k : detections) {
    const Box& box = hypotheses[k].box;
    const bool covered = std::any_of(kept_boxes.begin(), kept_boxes.end(),
                                     [&](const Box& b) { return iou(box, b) >= kNmsIou; });
    if (covered) continue;
    const TrackletId id = state.next_id++;
    Tracklet t;
    t.boxes.push_back(box);
    t.scores.push_back(hypotheses[k].score);
    t.length = 1;
    state.active.emplace(id, std::move(t));
    kept_boxes.push_back(box);
    result.records.push_back({id, box, hypotheses[k].score, Decision::kStarted});
    result.started.emplace_back(k, id);
  }

  std::sort(result.records.begin(), result.records.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return result;
}

RunResult run(const TrackFile& hypotheses, const ModelParams& params, const FrameContext& ctx,
              const TrackerOptions& options) {
  if (!hypotheses.is_sorted_unique()) {
    fail(ErrorKind::kFormat, "hypothesis rows must be sorted by (frame, id) without duplicates");
  }
  params.validate();
  ctx.validate();

  RunResult out;
  TrackerState state;
  std::map<TrackletId, TrackletId> chain_to_tracklet;
  const auto frames = hypotheses.by_frame();
  const int last = hypotheses.last_frame();
  const std::vector<TrackRecord> none;

  for (int t = 1; t <= last; ++t) {
    const auto found = frames.find(t);
    const auto& rows = found == frames.end() ? none : found->second;
    std::vector<Hypothesis> hyps;
    std::vector<TrackletId> chain_of;
    for (const TrackRecord& r : rows) {
      Hypothesis h{std::nullopt, r.box, r.score};
      if (const auto m = chain_to_tracklet.find(r.id); m != chain_to_tracklet.end()) {
        if (!state.active.contains(m->second)) continue;
        h.tracklet = m->second;
      }
      hyps.push_back(h);
      chain_of.push_back(r.id);
    }
    FrameResult fr = step(state, t, hyps, params, ctx, options);
    for (const auto& [k, id] : fr.started) chain_to_tracklet[chain_of[k]] = id;
    for (const auto& rec : fr.records) {
      if (is_output(rec.decision)) {
        out.output.records.push_back({t, rec.id, rec.box, rec.score, {-1.0, -1.0, -1.0}});
      }
    }
    out.frames.push_back(std::move(fr));
  }
  return out;
}

void write_decisions(std::ostream& out, const std::vector<FrameResult>& frames) {
  for (const FrameResult& fr : frames) {
    for (const auto& r : fr.records) {
      out << fr.frame << ',' << r.id << ',' << to_string(r.decision) << ','
          << format_fixed(r.score, 4) << '\n';
    }
  }
}

}  // namespace crftrack
