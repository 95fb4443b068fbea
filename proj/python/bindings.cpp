#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vidcascade/cascade.hpp"
#include "vidcascade/cbo.hpp"
#include "vidcascade/cli.hpp"
#include "vidcascade/error.hpp"
#include "vidcascade/evalkit.hpp"
#include "vidcascade/frames.hpp"
#include "vidcascade/serialize.hpp"

namespace py = pybind11;
using namespace vidcascade;

namespace {

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(ParseErrorKind::bad_json, e.what());
  }
}

template <class T>
T from_text(const std::string& text) {
  return parse_json(text).get<T>();
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"vidcascade"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  py::gil_scoped_release release;
  return run_cli(int(argv.size()), argv.data());
}

LabelTrack synth(const std::string& spec_json, const std::filesystem::path& video_path, const std::filesystem::path& labels_path) {
  const SynthSpec spec = from_text<SynthSpec>(spec_json);
  SynthResult r = generate_synthetic(spec);
  write_video(r.video, video_path);
  if (!labels_path.empty()) write_labels(r.truth, labels_path);
  return r.truth;
}

std::string video_meta(const std::filesystem::path& path) {
  const Video v = read_video(path);
  Json j = v.meta;
  j["frame_count"] = v.size();
  return j.dump();
}

py::tuple run(const std::string& config_json, const std::filesystem::path& video_path, std::uint64_t begin,
              std::optional<std::uint64_t> end, std::size_t workers) {
  const CascadeConfig config = from_text<CascadeConfig>(config_json);
  const Video video = read_video(video_path);
  const Oracle oracle = Oracle::from_spec(config.oracle);
  RunOptions ro;
  ro.workers = workers;
  RunResult r;
  {
    py::gil_scoped_release release;
    r = run_cascade(config, video, oracle, FrameRange{begin, end.value_or(video.size())}, ro);
  }
  const Json stats = r.stats;
  return py::make_tuple(r.predicted, stats.dump());
}

py::dict rates(const LabelTrack& pred, const LabelTrack& ref) {
  const ErrorRates r = fp_fn_rates(pred, ref);
  py::dict d;
  d["fp_rate"] = r.fp_rate;
  d["fn_rate"] = r.fn_rate;
  d["tp"] = r.counts.tp;
  d["tn"] = r.counts.tn;
  d["fp"] = r.counts.fp;
  d["fn"] = r.counts.fn;
  return d;
}

std::vector<std::pair<double, double>> intervals(const LabelTrack& labels, std::uint32_t fps,
                                                 std::uint64_t first_index) {
  std::vector<std::pair<double, double>> out;
  for (const Interval& i : extract_intervals(labels, fps, first_index)) out.emplace_back(i.start_s, i.end_s);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Video query cascade: synthetic clips, cascade runs, search and evaluation.";

  static py::exception<Error> base(m, "VidcascadeError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::validation:
        case ErrorKind::parse:
          PyErr_SetString(PyExc_ValueError, e.what());
          break;
        case ErrorKind::io:
          PyErr_SetString(PyExc_OSError, e.what());
          break;
        default:
          py::set_error(base, e.what());
      }
    } catch (const Json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("run_cli", &cli, py::arg("args"), "Run the command-line tool in-process; returns its exit code.");
  m.def("synth", &synth, py::arg("spec_json"), py::arg("video_path"), py::arg("labels_path") = std::filesystem::path(),
        "Generate a synthetic clip, write it, and return the ground-truth labels.");
  m.def("video_meta", &video_meta, py::arg("path"));
  m.def("read_labels", [](const std::filesystem::path& path) { return read_labels(path); }, py::arg("path"));
  m.def("write_labels",
        [](const LabelTrack& labels, const std::filesystem::path& path, std::uint64_t first_index) {
          write_labels(labels, path, first_index);
        },
        py::arg("labels"), py::arg("path"), py::arg("first_index") = 0);
  m.def("run", &run, py::arg("config_json"), py::arg("video_path"), py::arg("begin") = 0,
        py::arg("end") = py::none(), py::arg("workers") = 1,
        "Run a cascade; returns (predicted labels, stats JSON).");
  m.def("windowed_accuracy",
        [](const LabelTrack& pred, const LabelTrack& ref, std::uint32_t window, std::uint32_t agree_min) {
          return windowed_accuracy(pred, ref, EvalConfig{window, agree_min});
        },
        py::arg("pred"), py::arg("ref"), py::arg("window") = EvalConfig{}.window,
        py::arg("agree_min") = EvalConfig{}.agree_min);
  m.def("fp_fn_rates", &rates, py::arg("pred"), py::arg("ref"));
  m.def("extract_intervals", &intervals, py::arg("labels"), py::arg("fps"), py::arg("first_index") = 0);
  m.def("estimate_cost",
        [](double f_s, double f_m, double f_c, double t_detector, double t_specialized, double t_full) {
          return estimate_cost(SelectivityEstimate{f_s, f_m, f_c}, StageTimes{t_detector, t_specialized, t_full});
        },
        py::arg("f_s"), py::arg("f_m"), py::arg("f_c"), py::arg("t_detector"), py::arg("t_specialized"),
        py::arg("t_full"));
  m.def("error_budget", &error_budget, py::arg("rate"), py::arg("n"));
}
