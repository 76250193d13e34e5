#include "crftrack/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "crftrack/error.hpp"

namespace crftrack {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string describe(const Provenance& p) {
  return "sample " + p.sequence + " frame " + std::to_string(p.frame);
}

struct Evaluated {
  FrameAssembly assembly;
  std::vector<Label> gold;  // per real node
};

Evaluated assemble(const ModelParams& params, const TrainingSample& sample) {
  sample.validate();
  Evaluated e{assemble_frame_graph(sample.windows, params, sample.ctx), {}};
  const auto& nodes = e.assembly.node_map;
  if (nodes.size() != sample.gold.size()) {
    fail(ErrorKind::kValidation,
         describe(sample.provenance) + ": gold labels do not match the CRF nodes");
  }
  for (TrackletId id : nodes) {
    const auto g = sample.gold.find(id);
    if (g == sample.gold.end()) {
      fail(ErrorKind::kValidation, describe(sample.provenance) + ": tracklet " +
                                       std::to_string(id) + " has no gold label");
    }
    e.gold.push_back(g->second);
  }
  return e;
}

// Gold feature totals (unary, pair) of an assembly.
Gradient gold_features(const Evaluated& e) {
  Gradient phi;
  for (std::size_t v = 0; v < e.gold.size(); ++v) phi.theta_u += e.assembly.unary_features[v][e.gold[v]];
  const auto& pairs = e.assembly.graph.pairs();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    phi.theta_b +=
        e.assembly.pair_features[k][pair_index(e.gold[pairs[k].first], e.gold[pairs[k].second])];
  }
  return phi;
}

Gradient expected_features(const Evaluated& e, const InferenceResult& r) {
  Gradient phi;
  for (std::size_t v = 0; v < e.gold.size(); ++v) {
    for (Label y : {kInactive, kActive}) {
      phi.theta_u += r.node_marginals[v][y] * e.assembly.unary_features[v][y];
    }
  }
  for (std::size_t k = 0; k < e.assembly.pair_features.size(); ++k) {
    for (std::size_t i = 0; i < 4; ++i) {
      phi.theta_b += r.pair_marginals[k][i] * e.assembly.pair_features[k][i];
    }
  }
  return phi;
}

ModelParams with_theta(ModelParams p, double theta_u, double theta_b) {
  p.theta_u = theta_u;
  p.theta_b = theta_b;
  return p;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream s(line);
  std::vector<std::string> out;
  for (std::string t; s >> t;) out.push_back(t);
  return out;
}

std::string at_line(int line) { return "line " + std::to_string(line) + ": "; }

// window <id> <length> <score> [<gold>] <boxes...>
HypothesisWindow parse_window(const std::vector<std::string>& tok, bool with_gold, Label* gold,
                              int line) {
  const std::size_t head = with_gold ? 5 : 4;
  if (tok.size() < head) fail(ErrorKind::kFormat, at_line(line) + "truncated window line");
  const std::string where = at_line(line) + "window";
  HypothesisWindow w;
  w.tracklet_id = parse_int(tok[1], where);
  const long long length = parse_int(tok[2], where);
  if (length < 1) fail(ErrorKind::kFormat, where + " length must be >= 1");
  w.length = static_cast<std::size_t>(length);
  w.score = parse_double(tok[3], where);
  if (with_gold) {
    const long long g = parse_int(tok[4], where);
    if (g != 0 && g != 1) fail(ErrorKind::kFormat, where + " gold label must be 0 or 1");
    *gold = static_cast<Label>(g);
  }
  const std::size_t expected = std::min<std::size_t>(w.length, 3);
  if (tok.size() != head + 4 * expected) {
    fail(ErrorKind::kFormat, where + " expects " + std::to_string(expected) + " boxes");
  }
  for (std::size_t b = 0; b < expected; ++b) {
    const std::size_t o = head + 4 * b;
    w.boxes.push_back({parse_double(tok[o], where), parse_double(tok[o + 1], where),
                       parse_double(tok[o + 2], where), parse_double(tok[o + 3], where)});
  }
  try {
    w.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, at_line(line) + e.what());
  }
  return w;
}

FrameContext parse_context(const std::vector<std::string>& tok, int line) {
  if (tok.size() != 4) fail(ErrorKind::kFormat, at_line(line) + "context expects 3 values");
  const std::string where = at_line(line) + "context";
  FrameContext ctx{parse_double(tok[1], where), parse_double(tok[2], where),
                   parse_double(tok[3], where)};
  try {
    ctx.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, at_line(line) + e.what());
  }
  return ctx;
}

void write_context(std::ostream& out, const FrameContext& ctx) {
  out << "context " << shortest(ctx.image_width) << ' ' << shortest(ctx.image_height) << ' '
      << shortest(ctx.frame_rate) << '\n';
}

void write_window(std::ostream& out, const HypothesisWindow& w, const Label* gold) {
  out << "window " << w.tracklet_id << ' ' << w.length << ' ' << shortest(w.score);
  if (gold) out << ' ' << *gold;
  for (const Box& b : w.boxes) {
    out << ' ' << shortest(b.left) << ' ' << shortest(b.top) << ' ' << shortest(b.width) << ' '
        << shortest(b.height);
  }
  out << '\n';
}

std::map<int, std::vector<HypothesisWindow>> all_windows(const TrackFile& track) {
  std::map<int, std::vector<HypothesisWindow>> out;
  std::map<TrackletId, HypothesisWindow> open;
  std::map<TrackletId, int> last_seen;
  for (const auto& [frame, rows] : track.by_frame()) {
    for (const TrackRecord& r : rows) {
      HypothesisWindow& w = open[r.id];
      const auto seen = last_seen.find(r.id);
      if (seen == last_seen.end() || seen->second != frame - 1) {
        w = HypothesisWindow{};
        w.tracklet_id = r.id;
      }
      w.boxes.push_back(r.box);
      if (w.boxes.size() > 3) w.boxes.erase(w.boxes.begin());
      w.score = r.score;
      ++w.length;
      last_seen[r.id] = frame;
      out[frame].push_back(w);
    }
  }
  return out;
}

}  // namespace

void TrainingSample::validate() const {
  ctx.validate();
  std::set<TrackletId> ids;
  for (const auto& w : windows) {
    w.validate();
    if (!ids.insert(w.tracklet_id).second) {
      fail(ErrorKind::kValidation, describe(provenance) + ": duplicate tracklet id");
    }
  }
  for (const auto& [id, label] : gold) {
    if (label != kInactive && label != kActive) {
      fail(ErrorKind::kValidation, describe(provenance) + ": gold label must be 0 or 1");
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::kValidation, "learning rate must be finite and >= 0");
  }
}

std::vector<HypothesisWindow> windows_at(const TrackFile& track, int frame) {
  auto all = all_windows(track);
  const auto it = all.find(frame);
  return it == all.end() ? std::vector<HypothesisWindow>{} : it->second;
}

std::map<std::pair<int, TrackletId>, Label> gold_labels(const TrackFile& run,
                                                        const TrackFile& ground_truth) {
  const auto gt_frames = ground_truth.by_frame();
  std::map<std::pair<int, TrackletId>, Box> gt_box;
  for (const auto& r : ground_truth.records) gt_box[{r.frame, r.id}] = r.box;

  std::map<TrackletId, std::optional<TrackletId>> owner;
  std::map<std::pair<int, TrackletId>, Label> out;
  for (const TrackRecord& r : run.records) {
    auto it = owner.find(r.id);
    if (it == owner.end()) {
      std::optional<TrackletId> best;
      double best_iou = 0.0;
      if (const auto g = gt_frames.find(r.frame); g != gt_frames.end()) {
        for (const auto& gr : g->second) {
          const double o = iou(r.box, gr.box);
          if (o >= 0.5 && o > best_iou) {
            best_iou = o;
            best = gr.id;
          }
        }
      }
      it = owner.emplace(r.id, best).first;
    }
    Label label = kInactive;
    if (it->second) {
      const auto g = gt_box.find({r.frame, *it->second});
      if (g != gt_box.end() && iou(r.box, g->second) >= 0.5) label = kActive;
    }
    out[{r.frame, r.id}] = label;
  }
  return out;
}

std::vector<TrainingSample> generate_dataset(const std::vector<SequenceRun>& runs,
                                             const ModelParams& params,
                                             const TrainConfig& config) {
  params.validate();
  config.validate();
  std::vector<TrainingSample> negatives;
  std::vector<TrainingSample> positives;
  for (const SequenceRun& seq : runs) {
    seq.ctx.validate();
    if (seq.name.empty() || seq.name.find_first_of(" \t\r\n") != std::string::npos) {
      fail(ErrorKind::kValidation, "sequence name must be a non-empty word: '" + seq.name + "'");
    }
    const auto gold = gold_labels(seq.run, seq.ground_truth);
    for (const auto& [frame, windows] : all_windows(seq.run)) {
      const FrameAssembly a = assemble_frame_graph(windows, params, seq.ctx);
      if (a.real_count() == 0) continue;
      TrainingSample s;
      s.ctx = seq.ctx;
      s.provenance = {seq.name, frame, false};
      for (const HypothesisWindow& w : windows) {
        if (std::find(a.node_map.begin(), a.node_map.end(), w.tracklet_id) == a.node_map.end()) {
          continue;
        }
        const Label g = gold.at({frame, w.tracklet_id});
        s.windows.push_back(w);
        s.gold[w.tracklet_id] = g;
        if (g == kInactive) s.provenance.negative = true;
      }
      (s.provenance.negative ? negatives : positives).push_back(std::move(s));
    }
  }
  if (negatives.empty()) return {};

  std::mt19937_64 rng(config.shuffle_seed);
  std::shuffle(positives.begin(), positives.end(), rng);
  const std::size_t take = std::min(positives.size(), config.positive_ratio * negatives.size());
  positives.resize(take);

  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < runs.size(); ++i) order.emplace(runs[i].name, i);
  std::vector<TrainingSample> out = std::move(negatives);
  out.insert(out.end(), std::make_move_iterator(positives.begin()),
             std::make_move_iterator(positives.end()));
  std::sort(out.begin(), out.end(), [&](const TrainingSample& a, const TrainingSample& b) {
    const auto ka = std::make_pair(order.at(a.provenance.sequence), a.provenance.frame);
    const auto kb = std::make_pair(order.at(b.provenance.sequence), b.provenance.frame);
    return ka < kb;
  });
  return out;
}

double log_likelihood(const ModelParams& params, const TrainingSample& sample,
                      InferenceMode mode) {
  if (mode != InferenceMode::kExact) {
    fail(ErrorKind::kUnsupportedMode, "log-likelihood requires exact inference");
  }
  const Evaluated e = assemble(params, sample);
  const InferenceResult r = exact_inference(e.assembly.graph);
  std::map<TrackletId, Label> labels;
  for (std::size_t v = 0; v < e.gold.size(); ++v) labels[e.assembly.node_map[v]] = e.gold[v];
  // Each dummy doubles Z without touching any real labeling.
  const double log_z = *r.log_partition - static_cast<double>(e.assembly.dummy_count()) * std::numbers::ln2;
  return -labeling_energy(e.assembly, labels) - log_z;
}

double log_likelihood(const ModelParams& params, const std::vector<TrainingSample>& samples,
                      InferenceMode mode) {
  double total = 0.0;
  for (const auto& s : samples) total += log_likelihood(params, s, mode);
  return total;
}

Gradient gradient(const ModelParams& params, const TrainingSample& sample, InferenceMode mode) {
  const Evaluated e = assemble(params, sample);
  const InferenceResult r = mode == InferenceMode::kExact
                                ? exact_inference(e.assembly.graph)
                                : sum_product(e.assembly.graph, params.bp);
  const Gradient gold = gold_features(e);
  const Gradient expected = expected_features(e, r);
  return {expected.theta_u - gold.theta_u, expected.theta_b - gold.theta_b};
}

TrainResult sgd_train(const std::vector<TrainingSample>& samples, const ModelParams& init,
                      const TrainConfig& config) {
  if (samples.empty()) fail(ErrorKind::kValidation, "training needs at least one sample");
  init.validate();
  config.validate();
  TrainResult out{init, {}};
  out.trace.push_back(log_likelihood(out.params, samples, InferenceMode::kExact));

  std::mt19937_64 rng(config.shuffle_seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const Gradient g = gradient(out.params, samples[i], config.inference);
      if (!std::isfinite(g.theta_u) || !std::isfinite(g.theta_b)) {
        fail(ErrorKind::kNumerical, "non-finite gradient at epoch " + std::to_string(epoch + 1) +
                                        ", " + describe(samples[i].provenance));
      }
      out.params.theta_u += config.learning_rate * g.theta_u;
      out.params.theta_b += config.learning_rate * g.theta_b;
    }
    out.trace.push_back(log_likelihood(out.params, samples, InferenceMode::kExact));
  }
  return out;
}

GradientCheck finite_diff_check(const ModelParams& params, const TrainingSample& sample,
                                double h) {
  if (!(h > 0.0)) fail(ErrorKind::kValidation, "finite-difference step must be > 0");
  GradientCheck c;
  c.analytic = gradient(params, sample, InferenceMode::kExact);
  auto ll = [&](double tu, double tb) {
    return log_likelihood(with_theta(params, tu, tb), sample, InferenceMode::kExact);
  };
  const double tu = params.theta_u;
  const double tb = params.theta_b;
  c.numeric.theta_u = (ll(tu + h, tb) - ll(tu - h, tb)) / (2.0 * h);
  c.numeric.theta_b = (ll(tu, tb + h) - ll(tu, tb - h)) / (2.0 * h);
  auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0});
  };
  c.max_relative_error = std::max(rel(c.analytic.theta_u, c.numeric.theta_u),
                                  rel(c.analytic.theta_b, c.numeric.theta_b));
  return c;
}

void write_dataset(std::ostream& out, const std::vector<TrainingSample>& samples) {
  for (const auto& s : samples) {
    out << "sample " << s.provenance.sequence << ' ' << s.provenance.frame << ' '
        << (s.provenance.negative ? "negative" : "positive") << '\n';
    write_context(out, s.ctx);
    for (const auto& w : s.windows) {
      const Label g = s.gold.at(w.tracklet_id);
      write_window(out, w, &g);
    }
    out << "end\n";
  }
}

std::vector<TrainingSample> parse_dataset(std::istream& in) {
  std::vector<TrainingSample> out;
  std::optional<TrainingSample> cur;
  bool has_context = false;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto tok = tokens(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "sample") {
      if (cur) fail(ErrorKind::kFormat, at_line(line_no) + "missing 'end' before new sample");
      if (tok.size() != 4 || (tok[3] != "negative" && tok[3] != "positive")) {
        fail(ErrorKind::kFormat, at_line(line_no) + "expected: sample <sequence> <frame> negative|positive");
      }
      cur.emplace();
      cur->provenance = {tok[1], static_cast<int>(parse_int(tok[2], at_line(line_no) + "frame")),
                         tok[3] == "negative"};
      has_context = false;
    } else if (!cur) {
      fail(ErrorKind::kFormat, at_line(line_no) + "'" + tok[0] + "' outside a sample block");
    } else if (tok[0] == "context") {
      cur->ctx = parse_context(tok, line_no);
      has_context = true;
    } else if (tok[0] == "window") {
      Label g = kActive;
      HypothesisWindow w = parse_window(tok, true, &g, line_no);
      if (!cur->gold.emplace(w.tracklet_id, g).second) {
        fail(ErrorKind::kFormat, at_line(line_no) + "duplicate tracklet id in sample");
      }
      cur->windows.push_back(std::move(w));
    } else if (tok[0] == "end") {
      if (!has_context) fail(ErrorKind::kFormat, at_line(line_no) + "sample without context line");
      out.push_back(std::move(*cur));
      cur.reset();
    } else {
      fail(ErrorKind::kFormat, at_line(line_no) + "unknown record '" + tok[0] + "'");
    }
  }
  if (cur) fail(ErrorKind::kFormat, "unterminated sample at end of input");
  return out;
}

std::vector<TrainingSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return parse_dataset(in);
}

void write_frame(std::ostream& out, const FrameInput& frame) {
  write_context(out, frame.ctx);
  for (const auto& w : frame.windows) write_window(out, w, nullptr);
}

FrameInput parse_frame(std::istream& in) {
  FrameInput out;
  std::set<TrackletId> ids;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto tok = tokens(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "context") {
      out.ctx = parse_context(tok, line_no);
    } else if (tok[0] == "window") {
      HypothesisWindow w = parse_window(tok, false, nullptr, line_no);
      if (!ids.insert(w.tracklet_id).second) {
        fail(ErrorKind::kFormat, at_line(line_no) + "duplicate tracklet id");
      }
      out.windows.push_back(std::move(w));
    } else {
      fail(ErrorKind::kFormat, at_line(line_no) + "unknown record '" + tok[0] + "'");
    }
  }
  return out;
}

FrameInput read_frame(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return parse_frame(in);
}

}  // namespace crftrack
