#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crftrack/io.hpp"

namespace crftrack {

struct EvalReport {
  double mota = 0.0;
  double idf1 = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
  std::size_t gt = 0;
  std::size_t idtp = 0;
  std::size_t idfp = 0;
  std::size_t idfn = 0;
  std::size_t mt = 0;
  std::size_t ml = 0;
  std::size_t frag = 0;
};

inline constexpr double kMatchIou = 0.5;

struct FrameMatch {
  std::vector<std::pair<TrackletId, TrackletId>> matches;  // (gt id, hyp id)
  std::vector<TrackletId> unmatched_gt;
  std::vector<TrackletId> unmatched_hyp;
};

/// One frame of CLEAR matching. Pairs from `previous` (gt id -> hyp id) are
/// kept while their IoU stays >= 0.5; the rest are matched greedily by
/// descending IoU (ties by gt id, then hyp id) down to 0.5.
FrameMatch match_frame(std::span<const TrackRecord> gt, std::span<const TrackRecord> hyp,
                       const std::map<TrackletId, TrackletId>& previous);

/// CLEAR-MOT counts and MOTA. MT/ML use strict > 80% and < 20% coverage.
/// Frag counts, per GT trajectory, matched runs after the first; a run ends at
/// an unmatched frame or a change of hypothesis id. Throws kValidation when
/// the ground truth is empty.
EvalReport clear_mot(const TrackFile& gt, const TrackFile& hyp);

/// Identity metrics from the one-to-one trajectory assignment maximizing the
/// number of frames with IoU >= 0.5.
EvalReport idf1(const TrackFile& gt, const TrackFile& hyp);

/// Both metric families in one report.
EvalReport evaluate(const TrackFile& gt, const TrackFile& hyp);

/// Maximum-weight assignment; returns, per row, the assigned column or -1.
std::vector<int> max_weight_assignment(const std::vector<std::vector<long long>>& weight);

void write_report(std::ostream& out, const EvalReport& report);
std::string csv_header();
std::string csv_row(const EvalReport& report);

}  // namespace crftrack
