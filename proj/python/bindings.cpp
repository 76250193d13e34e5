#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "crftrack/crf_model.hpp"
#include "crftrack/error.hpp"
#include "crftrack/factor_graph.hpp"
#include "crftrack/io.hpp"
#include "crftrack/metrics.hpp"
#include "crftrack/scenario.hpp"
#include "crftrack/tracker.hpp"
#include "crftrack/training.hpp"

namespace py = pybind11;
using namespace crftrack;

namespace {

InferenceMode inference_of(const std::string& name) {
  if (name == "exact") return InferenceMode::kExact;
  if (name == "loopy-bp") return InferenceMode::kLoopyBp;
  throw py::value_error("inference must be 'exact' or 'loopy-bp'");
}

TrackMode mode_of(const std::string& name) {
  if (name == "crf") return TrackMode::kCrf;
  if (name == "threshold") return TrackMode::kThresholdOnly;
  throw py::value_error("mode must be 'threshold' or 'crf'");
}

template <typename T, typename Parse>
T parse_text(const std::string& text, Parse parse) {
  std::istringstream in(text);
  return parse(in);
}

template <typename Write>
std::string to_text(Write write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

py::dict result_dict(const InferenceResult& r) {
  py::dict d;
  d["marginals"] = r.node_marginals;
  d["map"] = r.map_labels;
  d["log_partition"] = r.log_partition ? py::cast(*r.log_partition) : py::none();
  d["converged"] = r.converged;
  d["iterations"] = r.iterations_used;
  return d;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["MOTA"] = r.mota;
  d["IDF1"] = r.idf1;
  d["IDP"] = r.idp;
  d["IDR"] = r.idr;
  d["FP"] = r.fp;
  d["FN"] = r.fn;
  d["IDS"] = r.ids;
  d["GT"] = r.gt;
  d["IDTP"] = r.idtp;
  d["IDFP"] = r.idfp;
  d["IDFN"] = r.idfn;
  d["MT"] = r.mt;
  d["ML"] = r.ml;
  d["Frag"] = r.frag;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tracklet inactivation with a fully connected CRF";

  static py::exception<Error> base(m, "CrfTrackError", PyExc_RuntimeError);
  static py::exception<Error> format_error(m, "FormatError", base.ptr());
  static py::exception<Error> numerical_error(m, "NumericalError", base.ptr());
  static py::exception<Error> capacity_error(m, "CapacityError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::kFormat:
          format_error(e.what());
          break;
        case ErrorKind::kNumerical:
          numerical_error(e.what());
          break;
        case ErrorKind::kCapacity:
          capacity_error(e.what());
          break;
        default:
          base(e.what());
      }
    }
  });

  py::class_<BpConfig>(m, "BpConfig")
      .def(py::init<>())
      .def_readwrite("max_iterations", &BpConfig::max_iterations)
      .def_readwrite("tolerance", &BpConfig::tolerance)
      .def_readwrite("damping", &BpConfig::damping);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("theta_u", &ModelParams::theta_u)
      .def_readwrite("theta_b", &ModelParams::theta_b)
      .def_property(
          "alpha1", [](const ModelParams& p) { return p.features.alpha1; },
          [](ModelParams& p, double v) { p.features.alpha1 = v; })
      .def_property(
          "alpha2", [](const ModelParams& p) { return p.features.alpha2; },
          [](ModelParams& p, double v) { p.features.alpha2 = v; })
      .def_property(
          "beta", [](const ModelParams& p) { return p.features.beta; },
          [](ModelParams& p, double v) { p.features.beta = v; })
      .def_readwrite("node_budget", &ModelParams::node_budget)
      .def_readwrite("pre_threshold", &ModelParams::pre_threshold)
      .def_readwrite("short_threshold", &ModelParams::short_threshold)
      .def_readwrite("bp", &ModelParams::bp)
      .def("to_text", [](const ModelParams& p) { return to_text([&](auto& o) { write_params(o, p); }); })
      .def_static("from_text", [](const std::string& t) { return parse_text<ModelParams>(t, parse_params); })
      .def_static("load", [](const std::string& path) { return read_params(path); });

  py::class_<FactorGraph>(m, "FactorGraph")
      .def(py::init<std::size_t>(), py::arg("num_vars"))
      .def("set_unary", &FactorGraph::set_unary, py::arg("var"), py::arg("energy"))
      .def("add_pair", &FactorGraph::add_pair, py::arg("a"), py::arg("b"), py::arg("energy"))
      .def_property_readonly("num_vars", &FactorGraph::num_vars)
      .def_property_readonly("num_pairs", &FactorGraph::num_pairs);

  m.def("exact_inference", [](const FactorGraph& g) { return result_dict(exact_inference(g)); },
        py::arg("graph"));
  m.def(
      "sum_product",
      [](const FactorGraph& g, const BpConfig& c) { return result_dict(sum_product(g, c)); },
      py::arg("graph"), py::arg("config") = BpConfig{});
  m.def(
      "max_product",
      [](const FactorGraph& g, const BpConfig& c) { return result_dict(max_product(g, c)); },
      py::arg("graph"), py::arg("config") = BpConfig{});

  m.def(
      "generate_scenario",
      [](const std::string& spec_text, std::optional<std::uint64_t> seed) {
        ScenarioSpec spec = parse_text<ScenarioSpec>(spec_text, parse_scenario_spec);
        if (seed) spec.seed = *seed;
        const Scenario s = generate_scenario(spec);
        py::dict d;
        d["hypotheses"] = to_text([&](auto& o) { write_mot(o, s.hypotheses); });
        d["ground_truth"] = to_text([&](auto& o) { write_mot(o, s.ground_truth); });
        d["seqinfo"] = to_text([&](auto& o) { write_seqinfo(o, s.info); });
        return d;
      },
      py::arg("spec"), py::arg("seed") = py::none(),
      "Generate a scenario from key=value spec text; returns MOT and seqinfo texts.");

  m.def(
      "track",
      [](const std::string& hyp, const std::string& seqinfo, const ModelParams& params,
         const std::string& mode, const std::string& inference) {
        const TrackFile h = parse_text<TrackFile>(hyp, parse_mot);
        const SequenceInfo info = parse_text<SequenceInfo>(seqinfo, parse_seqinfo);
        const RunResult r = run(h, params, info.ctx, {mode_of(mode), inference_of(inference), {}});
        return to_text([&](auto& o) { write_mot(o, r.output); });
      },
      py::arg("hypotheses"), py::arg("seqinfo"), py::arg("params"), py::arg("mode") = "crf",
      py::arg("inference") = "loopy-bp", "Run the tracker over MOT text; returns MOT text.");

  m.def(
      "infer",
      [](const std::string& frame, const ModelParams& params, const std::string& inference) {
        const FrameInput f = parse_text<FrameInput>(frame, parse_frame);
        std::map<TrackletId, Label> out;
        for (const auto& [id, d] :
             decide_inactivation(f.windows, params, f.ctx, inference_of(inference), params.bp)) {
          out[id] = d.label;
        }
        return out;
      },
      py::arg("frame"), py::arg("params"), py::arg("inference") = "loopy-bp");

  m.def(
      "evaluate",
      [](const std::string& gt, const std::string& hyp) {
        return report_dict(evaluate(parse_text<TrackFile>(gt, parse_mot), parse_text<TrackFile>(hyp, parse_mot)));
      },
      py::arg("ground_truth"), py::arg("hypotheses"));

  m.def(
      "log_likelihood",
      [](const ModelParams& params, const std::string& dataset) {
        return log_likelihood(params, parse_text<std::vector<TrainingSample>>(dataset, parse_dataset),
                              InferenceMode::kExact);
      },
      py::arg("params"), py::arg("dataset"));

  m.def(
      "check_gradients",
      [](const ModelParams& params, const std::string& dataset, double h) {
        double worst = 0.0;
        for (const auto& s : parse_text<std::vector<TrainingSample>>(dataset, parse_dataset)) {
          worst = std::max(worst, finite_diff_check(params, s, h).max_relative_error);
        }
        return worst;
      },
      py::arg("params"), py::arg("dataset"), py::arg("h") = 1e-5);

  m.def(
      "train",
      [](const ModelParams& init, const std::string& dataset, double lr, std::size_t epochs,
         std::uint64_t seed) {
        TrainConfig c;
        c.learning_rate = lr;
        c.epochs = epochs;
        c.shuffle_seed = seed;
        const TrainResult r =
            sgd_train(parse_text<std::vector<TrainingSample>>(dataset, parse_dataset), init, c);
        return py::make_tuple(r.params, r.trace);
      },
      py::arg("init"), py::arg("dataset"), py::arg("lr") = 1e-2, py::arg("epochs") = 30,
      py::arg("seed") = 0);

  m.def(
      "build_dataset",
      [](const std::string& name, const std::string& run_text, const std::string& gt_text,
         const std::string& seqinfo, const ModelParams& params, std::size_t ratio, std::uint64_t seed) {
        TrainConfig c;
        c.positive_ratio = ratio;
        c.shuffle_seed = seed;
        const std::vector<SequenceRun> runs{{name, parse_text<TrackFile>(run_text, parse_mot),
                                             parse_text<TrackFile>(gt_text, parse_mot),
                                             parse_text<SequenceInfo>(seqinfo, parse_seqinfo).ctx}};
        const auto samples = generate_dataset(runs, params, c);
        return to_text([&](auto& o) { write_dataset(o, samples); });
      },
      py::arg("name"), py::arg("run"), py::arg("ground_truth"), py::arg("seqinfo"),
      py::arg("params"), py::arg("ratio") = 3, py::arg("seed") = 0,
      "Dataset text from one baseline run against its ground truth.");
}
