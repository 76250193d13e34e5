#include "crftrack/metrics.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "crftrack/error.hpp"

namespace crftrack {

namespace {

struct Candidate {
  double overlap;
  TrackletId gt;
  TrackletId hyp;
};

struct Trajectory {
  std::size_t boxes = 0;
  std::size_t matched = 0;
  std::size_t runs = 0;
  TrackletId last_hyp = 0;
  bool has_last = false;
  bool matched_prev_frame = false;
  TrackletId prev_hyp = 0;
};

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

FrameMatch match_frame(std::span<const TrackRecord> gt, std::span<const TrackRecord> hyp,
                       const std::map<TrackletId, TrackletId>& previous) {
  std::map<TrackletId, const Box*> gt_box;
  std::map<TrackletId, const Box*> hyp_box;
  for (const auto& r : gt) gt_box[r.id] = &r.box;
  for (const auto& r : hyp) hyp_box[r.id] = &r.box;

  FrameMatch out;
  std::set<TrackletId> used_gt;
  std::set<TrackletId> used_hyp;
  for (const auto& [g, h] : previous) {
    const auto gi = gt_box.find(g);
    const auto hi = hyp_box.find(h);
    if (gi == gt_box.end() || hi == hyp_box.end() || used_hyp.contains(h)) continue;
    if (iou(*gi->second, *hi->second) >= kMatchIou) {
      out.matches.emplace_back(g, h);
      used_gt.insert(g);
      used_hyp.insert(h);
    }
  }

  std::vector<Candidate> candidates;
  for (const auto& [g, gb] : gt_box) {
    if (used_gt.contains(g)) continue;
    for (const auto& [h, hb] : hyp_box) {
      if (used_hyp.contains(h)) continue;
      const double o = iou(*gb, *hb);
      if (o >= kMatchIou) candidates.push_back({o, g, h});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.hyp < b.hyp;
  });
  for (const Candidate& c : candidates) {
    if (used_gt.contains(c.gt) || used_hyp.contains(c.hyp)) continue;
    out.matches.emplace_back(c.gt, c.hyp);
    used_gt.insert(c.gt);
    used_hyp.insert(c.hyp);
  }
  std::sort(out.matches.begin(), out.matches.end());

  for (const auto& [g, b] : gt_box) {
    if (!used_gt.contains(g)) out.unmatched_gt.push_back(g);
  }
  for (const auto& [h, b] : hyp_box) {
    if (!used_hyp.contains(h)) out.unmatched_hyp.push_back(h);
  }
  return out;
}

EvalReport clear_mot(const TrackFile& gt, const TrackFile& hyp) {
  if (gt.empty()) fail(ErrorKind::kValidation, "ground truth is empty: MOTA is undefined");

  const auto gt_frames = gt.by_frame();
  const auto hyp_frames = hyp.by_frame();
  std::set<int> frames;
  for (const auto& [f, rows] : gt_frames) frames.insert(f);
  for (const auto& [f, rows] : hyp_frames) frames.insert(f);

  EvalReport rep;
  std::map<TrackletId, Trajectory> traj;
  std::map<TrackletId, TrackletId> previous;
  const std::vector<TrackRecord> none;

  for (int f : frames) {
    const auto gi = gt_frames.find(f);
    const auto hi = hyp_frames.find(f);
    const auto& g_rows = gi == gt_frames.end() ? none : gi->second;
    const auto& h_rows = hi == hyp_frames.end() ? none : hi->second;

    const FrameMatch m = match_frame(g_rows, h_rows, previous);
    rep.gt += g_rows.size();
    rep.fn += m.unmatched_gt.size();
    rep.fp += m.unmatched_hyp.size();

    std::map<TrackletId, TrackletId> current;
    for (const auto& [g, h] : m.matches) {
      current[g] = h;
      Trajectory& t = traj[g];
      ++t.matched;
      if (t.has_last && t.last_hyp != h) ++rep.ids;
      if (!t.matched_prev_frame || t.prev_hyp != h) ++t.runs;
      t.last_hyp = h;
      t.has_last = true;
    }
    for (const auto& r : g_rows) {
      Trajectory& t = traj[r.id];
      ++t.boxes;
      const auto c = current.find(r.id);
      t.matched_prev_frame = c != current.end();
      if (t.matched_prev_frame) t.prev_hyp = c->second;
    }
    previous = std::move(current);
  }

  for (const auto& [id, t] : traj) {
    if (t.runs > 1) rep.frag += t.runs - 1;
    const double coverage = ratio(t.matched, t.boxes);
    if (coverage > 0.8) ++rep.mt;
    if (coverage < 0.2) ++rep.ml;
  }
  rep.mota = 1.0 - static_cast<double>(rep.fp + rep.fn + rep.ids) / static_cast<double>(rep.gt);
  return rep;
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<long long>>& weight) {
  const std::size_t rows = weight.size();
  std::size_t cols = 0;
  for (const auto& r : weight) cols = std::max(cols, r.size());
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};

  // Square min-cost problem on negated weights (Kuhn-Munkres with
  // potentials), 1-based with a virtual column 0.
  auto cost = [&](std::size_t i, std::size_t j) -> long long {
    if (i >= rows || j >= weight[i].size()) return 0;
    return -weight[i][j];
  };
  constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<long long> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      long long delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long long cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = p[j] - 1;
    if (i < rows && j - 1 < weight[i].size()) out[i] = static_cast<int>(j - 1);
  }
  return out;
}

EvalReport idf1(const TrackFile& gt, const TrackFile& hyp) {
  if (gt.empty()) fail(ErrorKind::kValidation, "ground truth is empty: IDF1 is undefined");

  std::map<TrackletId, std::size_t> gt_index;
  std::map<TrackletId, std::size_t> hyp_index;
  for (const auto& r : gt.records) gt_index.emplace(r.id, 0);
  for (const auto& r : hyp.records) hyp_index.emplace(r.id, 0);
  std::size_t k = 0;
  for (auto& [id, i] : gt_index) i = k++;
  k = 0;
  for (auto& [id, i] : hyp_index) i = k++;

  std::vector<std::vector<long long>> overlap(gt_index.size(),
                                              std::vector<long long>(hyp_index.size(), 0));
  const auto hyp_frames = hyp.by_frame();
  for (const auto& [f, g_rows] : gt.by_frame()) {
    const auto hi = hyp_frames.find(f);
    if (hi == hyp_frames.end()) continue;
    for (const auto& g : g_rows) {
      for (const auto& h : hi->second) {
        if (iou(g.box, h.box) >= kMatchIou) ++overlap[gt_index[g.id]][hyp_index[h.id]];
      }
    }
  }

  const std::vector<int> assign = max_weight_assignment(overlap);
  EvalReport rep;
  for (std::size_t i = 0; i < assign.size(); ++i) {
    if (assign[i] >= 0) rep.idtp += static_cast<std::size_t>(overlap[i][assign[i]]);
  }
  rep.gt = gt.records.size();
  rep.idfn = gt.records.size() - rep.idtp;
  rep.idfp = hyp.records.size() - rep.idtp;
  rep.idp = ratio(rep.idtp, rep.idtp + rep.idfp);
  rep.idr = ratio(rep.idtp, rep.idtp + rep.idfn);
  rep.idf1 = ratio(2 * rep.idtp, 2 * rep.idtp + rep.idfp + rep.idfn);
  return rep;
}

EvalReport evaluate(const TrackFile& gt, const TrackFile& hyp) {
  EvalReport rep = clear_mot(gt, hyp);
  const EvalReport id = idf1(gt, hyp);
  rep.idf1 = id.idf1;
  rep.idp = id.idp;
  rep.idr = id.idr;
  rep.idtp = id.idtp;
  rep.idfp = id.idfp;
  rep.idfn = id.idfn;
  return rep;
}

void write_report(std::ostream& out, const EvalReport& r) {
  out << "MOTA=" << format_fixed(r.mota, 6) << '\n'
      << "MOTP=n/a\n"
      << "IDF1=" << format_fixed(r.idf1, 6) << '\n'
      << "IDP=" << format_fixed(r.idp, 6) << '\n'
      << "IDR=" << format_fixed(r.idr, 6) << '\n'
      << "FP=" << r.fp << '\n'
      << "FN=" << r.fn << '\n'
      << "IDS=" << r.ids << '\n'
      << "GT=" << r.gt << '\n'
      << "IDTP=" << r.idtp << '\n'
      << "IDFP=" << r.idfp << '\n'
      << "IDFN=" << r.idfn << '\n'
      << "MT=" << r.mt << '\n'
      << "ML=" << r.ml << '\n'
      << "Frag=" << r.frag << '\n';
}

std::string csv_header() { return "MOTA,MOTP,IDF1,IDP,IDR,FP,FN,IDS,GT,IDTP,IDFP,IDFN,MT,ML,Frag"; }

std::string csv_row(const EvalReport& r) {
  std::ostringstream s;
  s << format_fixed(r.mota, 6) << ",n/a," << format_fixed(r.idf1, 6) << ','
    << format_fixed(r.idp, 6) << ',' << format_fixed(r.idr, 6) << ',' << r.fp << ',' << r.fn
    << ',' << r.ids << ',' << r.gt << ',' << r.idtp << ',' << r.idfp << ',' << r.idfn << ','
    << r.mt << ',' << r.ml << ',' << r.frag;
  return s.str();
}

}  // namespace crftrack
