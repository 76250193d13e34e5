// crftrack: tracklet inactivation with a fully connected CRF.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crftrack/crf_model.hpp"
#include "crftrack/error.hpp"
#include "crftrack/io.hpp"
#include "crftrack/metrics.hpp"
#include "crftrack/scenario.hpp"
#include "crftrack/tracker.hpp"
#include "crftrack/training.hpp"

namespace fs = std::filesystem;
using namespace crftrack;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) fail(ErrorKind::kIo, "write failed: " + path);
}

const std::map<std::string, InferenceMode> kInferenceNames{
    {"exact", InferenceMode::kExact}, {"loopy-bp", InferenceMode::kLoopyBp}};
const std::map<std::string, TrackMode> kModeNames{{"threshold", TrackMode::kThresholdOnly},
                                                  {"crf", TrackMode::kCrf}};

struct GenArgs {
  std::string spec, out_hyp, out_gt, out_seqinfo;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& a) {
  ScenarioSpec spec = read_scenario_spec(a.spec);
  spec.seed = a.seed;
  const Scenario s = generate_scenario(spec);
  write_mot(fs::path(a.out_hyp), s.hypotheses);
  write_mot(fs::path(a.out_gt), s.ground_truth);
  auto out = open_out(a.out_seqinfo);
  write_seqinfo(out, s.info);
  close_out(out, a.out_seqinfo);
  return 0;
}

struct TrackArgs {
  std::string hyp, seqinfo, params, out, dump;
  TrackMode mode = TrackMode::kCrf;
  InferenceMode inference = InferenceMode::kLoopyBp;
};

int cmd_track(const TrackArgs& a) {
  const TrackFile hyp = read_mot(a.hyp);
  const SequenceInfo info = read_seqinfo(a.seqinfo);
  const ModelParams params = read_params(a.params);
  const RunResult r = run(hyp, params, info.ctx, {a.mode, a.inference});
  write_mot(fs::path(a.out), r.output);
  if (!a.dump.empty()) {
    auto out = open_out(a.dump);
    write_decisions(out, r.frames);
    close_out(out, a.dump);
  }
  return 0;
}

struct TrainArgs {
  std::string runs, gt, params_init, out_params, out_dataset;
  double lr = 1e-2;
  std::size_t epochs = 30;
  std::size_t ratio = 3;
  std::uint64_t seed = 0;
  InferenceMode inference = InferenceMode::kExact;
};

SequenceInfo find_seqinfo(const fs::path& gt_dir, const fs::path& runs_dir,
                          const std::string& name) {
  for (const fs::path& dir : {gt_dir, runs_dir}) {
    const fs::path p = dir / (name + ".seqinfo");
    if (fs::exists(p)) return read_seqinfo(p);
  }
  fail(ErrorKind::kIo, "no seqinfo for sequence " + name);
}

int cmd_train(const TrainArgs& a) {
  const ModelParams init = read_params(a.params_init);
  TrainConfig config{a.lr, a.epochs, a.ratio, a.seed, a.inference};
  if (!fs::is_directory(a.runs)) fail(ErrorKind::kIo, "not a directory: " + a.runs);

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.runs)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SequenceRun> runs;
  for (const fs::path& f : files) {
    const std::string name = f.stem().string();
    const fs::path gt = fs::path(a.gt) / (name + ".txt");
    if (!fs::exists(gt)) fail(ErrorKind::kIo, "missing ground truth " + gt.string());
    runs.push_back({name, read_mot(f), read_mot(gt), find_seqinfo(a.gt, a.runs, name).ctx});
  }

  const auto samples = generate_dataset(runs, init, config);
  std::size_t negatives = 0;
  for (const auto& s : samples) negatives += s.provenance.negative ? 1 : 0;
  std::cout << "samples=" << samples.size() << " negatives=" << negatives
            << " positives=" << samples.size() - negatives << '\n';
  if (!a.out_dataset.empty()) {
    auto out = open_out(a.out_dataset);
    write_dataset(out, samples);
    close_out(out, a.out_dataset);
  }

  ModelParams trained = init;
  if (samples.empty()) {
    std::cerr << "warning: no negative samples found; parameters left unchanged\n";
  } else {
    const TrainResult r = sgd_train(samples, init, config);
    for (std::size_t e = 0; e < r.trace.size(); ++e) {
      std::cout << "epoch=" << e << " log_likelihood=" << format_fixed(r.trace[e], 6) << '\n';
    }
    trained = r.params;
  }
  auto out = open_out(a.out_params);
  write_params(out, trained);
  close_out(out, a.out_params);
  return 0;
}

struct InferArgs {
  std::string frame, params, dump;
  InferenceMode inference = InferenceMode::kLoopyBp;
};

int cmd_infer(const InferArgs& a) {
  const FrameInput frame = read_frame(a.frame);
  const ModelParams params = read_params(a.params);
  const FrameDecisions d = decide_inactivation(frame.windows, params, frame.ctx, a.inference, params.bp);
  if (!a.dump.empty()) {
    const FrameAssembly assembly = assemble_frame_graph(frame.windows, params, frame.ctx);
    auto out = open_out(a.dump);
    if (a.inference == InferenceMode::kLoopyBp) {
      max_product(assembly.graph, params.bp, &out);
    } else {
      write_graph(out, assembly.graph);
    }
    close_out(out, a.dump);
  }
  for (const auto& [id, nd] : d) std::cout << id << ' ' << nd.label << '\n';
  return 0;
}

struct EvalArgs {
  std::string gt, hyp, out, out_csv;
};

int cmd_eval(const EvalArgs& a) {
  const EvalReport r = evaluate(read_mot(a.gt), read_mot(a.hyp));
  auto out = open_out(a.out);
  write_report(out, r);
  close_out(out, a.out);
  if (!a.out_csv.empty()) {
    auto csv = open_out(a.out_csv);
    csv << csv_header() << '\n' << csv_row(r) << '\n';
    close_out(csv, a.out_csv);
  }
  return 0;
}

struct CheckArgs {
  std::string params, dataset;
  double h = 1e-5;
};

int cmd_check(const CheckArgs& a) {
  const ModelParams params = read_params(a.params);
  const auto samples = read_dataset(a.dataset);
  double worst = 0.0;
  for (const auto& s : samples) {
    const GradientCheck c = finite_diff_check(params, s, a.h);
    worst = std::max(worst, c.max_relative_error);
    std::cout << s.provenance.sequence << ' ' << s.provenance.frame
              << " analytic=" << c.analytic.theta_u << ',' << c.analytic.theta_b
              << " numeric=" << c.numeric.theta_u << ',' << c.numeric.theta_b
              << " error=" << c.max_relative_error << '\n';
  }
  std::cout << "samples=" << samples.size() << " max_relative_error=" << worst << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tracklet inactivation with a fully connected CRF"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic scenario");
  g->add_option("--spec", gen.spec, "Scenario file")->required();
  g->add_option("--seed", gen.seed, "Random seed")->required();
  g->add_option("--out-hyp", gen.out_hyp, "Hypothesis MOT file")->required();
  g->add_option("--out-gt", gen.out_gt, "Ground-truth MOT file")->required();
  g->add_option("--out-seqinfo", gen.out_seqinfo, "Sequence info file")->required();

  TrackArgs track;
  auto* t = app.add_subcommand("track", "Run the tracker over a hypothesis file");
  t->add_option("--hyp", track.hyp)->required();
  t->add_option("--seqinfo", track.seqinfo)->required();
  t->add_option("--params", track.params)->required();
  t->add_option("--mode", track.mode)->required()->transform(CLI::CheckedTransformer(kModeNames));
  t->add_option("--inference", track.inference)
      ->required()
      ->transform(CLI::CheckedTransformer(kInferenceNames));
  t->add_option("--out", track.out)->required();
  t->add_option("--dump-decisions", track.dump, "Per-frame decision log");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Estimate theta_u and theta_b from baseline runs");
  tr->add_option("--runs", train.runs, "Directory of baseline outputs <name>.txt")->required();
  tr->add_option("--gt", train.gt, "Directory of ground truth <name>.txt and <name>.seqinfo")
      ->required();
  tr->add_option("--params-init", train.params_init)->required();
  tr->add_option("--lr", train.lr)->required();
  tr->add_option("--epochs", train.epochs)->required();
  tr->add_option("--ratio", train.ratio)->required();
  tr->add_option("--seed", train.seed)->required();
  tr->add_option("--inference", train.inference)
      ->required()
      ->transform(CLI::CheckedTransformer(kInferenceNames));
  tr->add_option("--out-params", train.out_params)->required();
  tr->add_option("--out-dataset", train.out_dataset);

  InferArgs infer;
  auto* in = app.add_subcommand("infer", "Decide inactivation for one frame");
  in->add_option("--frame-json", infer.frame, "Frame file (context and window lines)")->required();
  in->add_option("--params", infer.params)->required();
  in->add_option("--inference", infer.inference)
      ->required()
      ->transform(CLI::CheckedTransformer(kInferenceNames));
  in->add_option("--dump-messages", infer.dump, "Write the graph and every BP message");

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "CLEAR-MOT and identity metrics");
  ev->add_option("--gt", eval.gt)->required();
  ev->add_option("--hyp", eval.hyp)->required();
  ev->add_option("--out", eval.out, "key=value report")->required();
  ev->add_option("--out-csv", eval.out_csv, "CSV header and row");

  CheckArgs check;
  auto* cg = app.add_subcommand("check-gradients", "Compare gradients with finite differences");
  cg->set_help_flag("--help", "Print this help message and exit");
  cg->add_option("--params", check.params)->required();
  cg->add_option("--dataset", check.dataset)->required();
  cg->add_option("--h", check.h)->required()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*t) return cmd_track(track);
    if (*tr) return cmd_train(train);
    if (*in) return cmd_infer(infer);
    if (*ev) return cmd_eval(eval);
    if (*cg) return cmd_check(check);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
