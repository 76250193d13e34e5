#include "crftrack/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <string>

#include "crftrack/error.hpp"

namespace crftrack {

namespace {

inline constexpr double kMargin = 40.0;
inline constexpr double kGtVisible = 0.25;     // GT kept while more than this is in view
inline constexpr double kChainVisible = 0.75;  // regression keeps up while this much is in view
inline constexpr double kLostScore = 0.3;

enum class Role { kRegular, kVictim, kNeighbor };

enum Stream : std::uint32_t { kShape = 0, kScore = 1, kJitter = 2 };

std::mt19937_64 stream(std::uint64_t seed, std::size_t target, Stream purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(target), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

double quarter(double x) { return std::round(x * 4.0) / 4.0; }

double round_to(double x, double scale) { return std::round(x * scale) / scale; }

Box rounded(const Box& b) {
  return {round_to(b.left, 100.0), round_to(b.top, 100.0), round_to(b.width, 100.0),
          round_to(b.height, 100.0)};
}

double visible_fraction(const Box& b, double w, double h) {
  const double iw = std::min(b.right(), w) - std::max(b.left, 0.0);
  const double ih = std::min(b.bottom(), h) - std::max(b.top, 0.0);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih / (b.width * b.height);
}

Box lerp(const Box& a, const Box& b, double t) {
  auto mix = [t](double x, double y) { return (1.0 - t) * x + t * y; };
  return {mix(a.left, b.left), mix(a.top, b.top), mix(a.width, b.width), mix(a.height, b.height)};
}

// Image-space trajectory: box(t) = origin + velocity * (t - t0) + camera(t).
struct Path {
  Box origin;
  int t0 = 1;
  double vx = 0.0;
  double vy = 0.0;
  bool follows_camera = true;
};

struct TargetDraw {
  double height;
  double width;
  double vx;
  double vy;
  double fx;
  double fy;
};

TargetDraw draw_target(std::uint64_t seed, std::size_t k) {
  auto rng = stream(seed, k, kShape);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TargetDraw d{};
  d.height = std::round(110.0 + 90.0 * unit(rng));
  d.width = std::round(d.height * (0.38 + 0.10 * unit(rng)));
  d.vx = quarter(-1.5 + 3.0 * unit(rng));
  d.vy = quarter(-0.5 + 1.0 * unit(rng));
  d.fx = unit(rng);
  d.fy = unit(rng);
  return d;
}

// Leftmost start that keeps the whole static path inside the margins, or
// nullopt when the motion does not fit.
std::optional<double> fit_start(double extent, double size, double travel, double fraction) {
  const double lo = kMargin - std::min(0.0, travel);
  const double hi = extent - kMargin - size - std::max(0.0, travel);
  if (hi < lo) return std::nullopt;
  return std::round(lo + fraction * (hi - lo));
}

}  // namespace

void ScenarioSpec::validate() const {
  if (num_frames < 1) fail(ErrorKind::kValidation, "num_frames must be >= 1");
  if (!(image_width > 0.0 && image_height > 0.0 && frame_rate > 0.0)) {
    fail(ErrorKind::kValidation, "image size and frame rate must be positive");
  }
  if (num_targets < 1) fail(ErrorKind::kValidation, "num_targets must be >= 1");
  if (!(noise >= 0.0)) fail(ErrorKind::kValidation, "noise must be >= 0");
  if (drift_linger < 0) fail(ErrorKind::kValidation, "drift_linger must be >= 0");
  for (const auto& p : camera_pan) {
    if (p.start_frame < 1 || !std::isfinite(p.dx) || !std::isfinite(p.dy)) {
      fail(ErrorKind::kValidation, "invalid camera pan segment");
    }
  }
  std::set<std::size_t> used;
  for (const auto& e : drift_events) {
    if (e.frame < 4 || e.frame > num_frames) {
      fail(ErrorKind::kValidation, "drift event frame " + std::to_string(e.frame) +
                                       " must lie in [4, num_frames]");
    }
    if (e.victim >= num_targets || e.neighbor >= num_targets || e.victim == e.neighbor) {
      fail(ErrorKind::kValidation, "drift event references invalid targets");
    }
    if (!used.insert(e.victim).second || !used.insert(e.neighbor).second) {
      fail(ErrorKind::kValidation, "a target may take part in at most one drift event");
    }
  }
}

Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const int frames = spec.num_frames;
  const double width = spec.image_width;
  const double height = spec.image_height;

  std::vector<PanSegment> pans = spec.camera_pan;
  std::stable_sort(pans.begin(), pans.end(),
                   [](const auto& a, const auto& b) { return a.start_frame < b.start_frame; });
  std::vector<Vec2> camera(static_cast<std::size_t>(frames) + 1);
  for (int t = 2; t <= frames; ++t) {
    Vec2 pan{};
    for (const auto& p : pans) {
      if (p.start_frame <= t) pan = {p.dx, p.dy};
    }
    camera[t] = {camera[t - 1].x + pan.x, camera[t - 1].y + pan.y};
  }

  const std::size_t n = spec.num_targets;
  std::vector<Role> role(n, Role::kRegular);
  std::vector<std::size_t> event_of(n, 0);
  for (std::size_t e = 0; e < spec.drift_events.size(); ++e) {
    role[spec.drift_events[e].victim] = Role::kVictim;
    role[spec.drift_events[e].neighbor] = Role::kNeighbor;
    event_of[spec.drift_events[e].victim] = e;
    event_of[spec.drift_events[e].neighbor] = e;
  }

  std::vector<TargetDraw> draws;
  for (std::size_t k = 0; k < n; ++k) draws.push_back(draw_target(spec.seed, k));

  std::vector<Path> paths(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (role[k] != Role::kRegular) continue;
    TargetDraw d = draws[k];
    const double span = frames - 1;
    auto x0 = fit_start(width, d.width, d.vx * span, d.fx);
    if (!x0) {
      d.vx = 0.0;
      x0 = fit_start(width, d.width, 0.0, d.fx);
    }
    auto y0 = fit_start(height, d.height, d.vy * span, d.fy);
    if (!y0) {
      d.vy = 0.0;
      y0 = fit_start(height, d.height, 0.0, d.fy);
    }
    paths[k] = {{x0.value_or(0.0), y0.value_or(0.0), d.width, d.height}, 1, d.vx, d.vy, true};
  }
  // Victims reach the image edge exactly at the event frame; the neighbor
  // appears just inside, on the victim's side.
  for (std::size_t e = 0; e < spec.drift_events.size(); ++e) {
    const DriftEvent& ev = spec.drift_events[e];
    const double dir = e % 2 == 0 ? 1.0 : -1.0;
    const TargetDraw& v = draws[ev.victim];
    const double speed = 1.0 + quarter(std::abs(v.vx));
    const double left = dir > 0.0 ? width - v.width / 2.0 : -v.width / 2.0;
    const double top = std::round(100.0 + v.fy * std::max(0.0, height - v.height - 200.0));
    paths[ev.victim] = {{left, top, v.width, v.height}, ev.frame, dir * speed, 0.0, false};

    const TargetDraw& nb = draws[ev.neighbor];
    const double victim_center = left + v.width / 2.0 + dir * speed * 2.0;
    const double center = victim_center - dir * 0.75 * (v.width + nb.width);
    const double ntop = top + v.height - nb.height + std::round((nb.fx - 0.5) * 16.0);
    const double nspeed = 0.5 + quarter(std::abs(nb.vy) * 2.0);
    paths[ev.neighbor] = {{center - nb.width / 2.0, ntop, nb.width, nb.height},
                          ev.frame + 2, -dir * nspeed, 0.0, false};
  }

  auto box_at = [&](std::size_t k, int t) {
    const Path& p = paths[k];
    Box b = p.origin;
    b.left += p.vx * (t - p.t0);
    b.top += p.vy * (t - p.t0);
    if (p.follows_camera) {
      b.left += camera[t].x;
      b.top += camera[t].y;
    }
    return b;
  };

  Scenario out;
  out.info.ctx = {width, height, spec.frame_rate};
  out.info.length = frames;

  for (std::size_t k = 0; k < n; ++k) {
    const TrackletId id = static_cast<TrackletId>(k) + 1;
    auto score_rng = stream(spec.seed, k, kScore);
    auto jitter_rng = stream(spec.seed, k, kJitter);
    std::normal_distribution<double> high(0.98, 0.015);
    std::normal_distribution<double> drifting(0.7, 0.05);
    std::normal_distribution<double> jitter(0.0, 1.0);
    auto high_score = [&] { return round_to(std::clamp(high(score_rng), 0.0, 1.0), 1e4); };
    auto drift_score = [&] { return round_to(std::clamp(drifting(score_rng), 0.55, 0.9), 1e4); };
    auto hyp_box = [&](Box b) {
      const double jx = jitter(jitter_rng);
      const double jy = jitter(jitter_rng);
      if (spec.noise > 0.0) {
        b.left += spec.noise * jx;
        b.top += spec.noise * jy;
      }
      return rounded(b);
    };
    auto emit_gt = [&](int t, const Box& b) {
      out.ground_truth.records.push_back({t, id, rounded(b), 1.0, {-1.0, -1.0, -1.0}});
    };
    auto emit_hyp = [&](int t, const Box& b, double score) {
      out.hypotheses.records.push_back({t, id, hyp_box(b), score, {-1.0, -1.0, -1.0}});
    };

    const Role r = role[k];
    const int first = r == Role::kNeighbor ? paths[k].t0 : 1;
    const int last_gt = r == Role::kVictim ? paths[k].t0 - 1 : frames;
    for (int t = first; t <= last_gt; ++t) {
      const Box b = box_at(k, t);
      if (visible_fraction(b, width, height) > kGtVisible) emit_gt(t, b);
    }

    if (r == Role::kVictim) {
      const DriftEvent& ev = spec.drift_events[event_of[k]];
      int start = 1;
      while (start < ev.frame && visible_fraction(box_at(k, start), width, height) < kChainVisible) {
        ++start;
      }
      for (int t = start; t < ev.frame; ++t) emit_hyp(t, box_at(k, t), high_score());
      const int slide_end = std::min(frames, ev.frame + 2);
      for (int t = ev.frame; t <= slide_end; ++t) {
        const double alpha = (t - ev.frame + 1) / 3.0;
        emit_hyp(t, lerp(box_at(k, t), box_at(ev.neighbor, t), alpha), drift_score());
      }
      const int linger_end = std::min(frames, ev.frame + 2 + spec.drift_linger);
      for (int t = ev.frame + 3; t <= linger_end; ++t) {
        emit_hyp(t, box_at(ev.neighbor, t), drift_score());
      }
      if (ev.frame + 3 + spec.drift_linger <= frames) {
        const int t = ev.frame + 3 + spec.drift_linger;
        emit_hyp(t, box_at(ev.neighbor, t), kLostScore);
      }
    } else {
      for (int t = first; t <= frames; ++t) {
        const Box b = box_at(k, t);
        if (visible_fraction(b, width, height) < kChainVisible) {
          if (t > first) emit_hyp(t, b, kLostScore);
          break;
        }
        emit_hyp(t, b, high_score());
      }
    }
  }
  out.hypotheses.sort();
  out.ground_truth.sort();
  return out;
}

ScenarioSpec parse_scenario_spec(std::istream& in) {
  ScenarioSpec spec;
  for (const KeyValue& kv : parse_key_values(in)) {
    const std::string where = "line " + std::to_string(kv.line) + ": " + kv.key;
    const auto& k = kv.key;
    if (k == "num_frames") {
      spec.num_frames = static_cast<int>(parse_int(kv.value, where));
    } else if (k == "image_width") {
      spec.image_width = parse_double(kv.value, where);
    } else if (k == "image_height") {
      spec.image_height = parse_double(kv.value, where);
    } else if (k == "frame_rate") {
      spec.frame_rate = parse_double(kv.value, where);
    } else if (k == "num_targets") {
      const long long t = parse_int(kv.value, where);
      if (t < 1) fail(ErrorKind::kFormat, where + " must be >= 1");
      spec.num_targets = static_cast<std::size_t>(t);
    } else if (k == "noise") {
      spec.noise = parse_double(kv.value, where);
    } else if (k == "drift_linger") {
      spec.drift_linger = static_cast<int>(parse_int(kv.value, where));
    } else if (k == "seed") {
      spec.seed = static_cast<std::uint64_t>(parse_int(kv.value, where));
    } else if (k == "camera_pan") {
      PanSegment seg;
      std::string rest = kv.value;
      if (const auto colon = rest.find(':'); colon != std::string::npos) {
        seg.start_frame = static_cast<int>(parse_int(rest.substr(0, colon), where));
        rest = rest.substr(colon + 1);
      }
      const auto comma = rest.find(',');
      if (comma == std::string::npos) fail(ErrorKind::kFormat, where + " expects dx,dy");
      seg.dx = parse_double(rest.substr(0, comma), where);
      seg.dy = parse_double(rest.substr(comma + 1), where);
      spec.camera_pan.push_back(seg);
    } else if (k == "drift_event") {
      const std::string& v = kv.value;
      const auto c1 = v.find(',');
      const auto c2 = c1 == std::string::npos ? c1 : v.find(',', c1 + 1);
      if (c2 == std::string::npos) fail(ErrorKind::kFormat, where + " expects frame,victim,neighbor");
      const long long victim = parse_int(v.substr(c1 + 1, c2 - c1 - 1), where);
      const long long neighbor = parse_int(v.substr(c2 + 1), where);
      if (victim < 0 || neighbor < 0) fail(ErrorKind::kFormat, where + " target index must be >= 0");
      spec.drift_events.push_back({static_cast<int>(parse_int(v.substr(0, c1), where)),
                                   static_cast<std::size_t>(victim),
                                   static_cast<std::size_t>(neighbor)});
    } else {
      fail(ErrorKind::kFormat, "line " + std::to_string(kv.line) + ": unknown scenario key '" + k + "'");
    }
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, std::string("invalid scenario: ") + e.what());
  }
  return spec;
}

ScenarioSpec read_scenario_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return parse_scenario_spec(in);
}

void write_scenario_spec(std::ostream& out, const ScenarioSpec& spec) {
  out << "num_frames=" << spec.num_frames << '\n'
      << "image_width=" << spec.image_width << '\n'
      << "image_height=" << spec.image_height << '\n'
      << "frame_rate=" << spec.frame_rate << '\n'
      << "num_targets=" << spec.num_targets << '\n'
      << "noise=" << spec.noise << '\n'
      << "drift_linger=" << spec.drift_linger << '\n'
      << "seed=" << spec.seed << '\n';
  for (const auto& p : spec.camera_pan) {
    out << "camera_pan=" << p.start_frame << ':' << p.dx << ',' << p.dy << '\n';
  }
  for (const auto& e : spec.drift_events) {
    out << "drift_event=" << e.frame << ',' << e.victim << ',' << e.neighbor << '\n';
  }
}

}  // namespace crftrack
