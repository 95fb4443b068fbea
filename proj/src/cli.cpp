#include "vidcascade/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "vidcascade/cascade.hpp"
#include "vidcascade/cbo.hpp"
#include "vidcascade/error.hpp"
#include "vidcascade/evalkit.hpp"
#include "vidcascade/frames.hpp"
#include "vidcascade/io_util.hpp"
#include "vidcascade/oracle.hpp"
#include "vidcascade/parallel.hpp"
#include "vidcascade/serialize.hpp"

namespace fs = std::filesystem;

namespace vidcascade {

namespace {

struct Common {
  std::string manifest;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = default_workers();
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--manifest", c.manifest, "JSON file of flag values; explicit flags win");
  cmd->add_option("--seed", c.seed, "Random seed")->each([&c](const std::string&) { c.seed_set = true; });
  cmd->add_option("--workers", c.workers, "Worker thread cap")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, out_help)->required();
}

fs::path out_dir(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(ErrorKind::io, "cannot create output directory " + p.string() + ": " + ec.message());
  return p;
}

void print_rate(const char* what, double v) { std::printf("%s %.4f\n", what, v); }

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::string labels;
};

int cmd_synth(const SynthArgs& a, const Common& c) {
  SynthSpec spec = parse_as<SynthSpec>(load_json(a.spec), a.spec);
  if (c.seed_set) spec.seed = c.seed;
  const SynthResult r = generate_synthetic(spec);
  write_video(r.video, c.out);
  write_labels(r.truth, a.labels);
  const auto present = std::count(r.truth.begin(), r.truth.end(), kPresent);
  std::printf("frames %zu\n", r.truth.size());
  std::printf("present %lld\n", static_cast<long long>(present));
  print_rate("prevalence", r.truth.empty() ? 0.0 : double(present) / double(r.truth.size()));
  return kExitOk;
}

// ---- label ---------------------------------------------------------------

struct LabelArgs {
  std::string video;
  std::string truth;
  double latency = 0.0;
};

int cmd_label(const LabelArgs& a, const Common& c) {
  const Video video = read_video(a.video);
  const Oracle oracle(read_labels(a.truth), a.latency);
  const LabelingResult r = label_video(oracle, video);
  write_labels(r.labels, c.out);
  std::printf("invocations %llu\n", static_cast<unsigned long long>(r.invocation_count));
  std::printf("wall_s %.3f\n", r.wall_time);
  return kExitOk;
}

// ---- search --------------------------------------------------------------

struct SearchArgs {
  std::string video;
  std::string labels;
  std::string timing;
  std::string grid;
  double fp_star = 0.01;
  double fn_star = 0.01;
  double train_frac = 0.5;
  double crossval_frac = 0.1;
  double eval_frac = 0.4;
  std::uint32_t input_width = 0;
  std::uint32_t input_height = 0;
  std::size_t max_train_frames = 0;
  int epochs = 5;
  double t_full = 1.0;
  double oracle_latency = 0.0;
};

SearchGrid load_grid(const std::string& path, InputDims input, std::uint32_t channels) {
  SearchGrid grid = SearchGrid::defaults(input, channels);
  if (path.empty()) return grid;
  const Json j = load_json(path);
  if (!j.is_object()) throw ParseError(ParseErrorKind::bad_json, path + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "detectors" && key != "archs" && key != "max_delta_candidates")
      throw ParseError(ParseErrorKind::bad_json, path + ": unknown key '" + key + "'");
  if (j.contains("detectors"))
    grid.detectors = parse_as<std::vector<DetectorCandidate>>(j.at("detectors"), path + ": detectors");
  if (j.contains("archs")) {
    auto archs = parse_as<std::vector<ArchSpec>>(j.at("archs"), path + ": archs");
    for (ArchSpec& a : archs) {
      a.input_width = input.width;
      a.input_height = input.height;
      a.channels = channels;
    }
    grid.archs = name_archs(archs);
  }
  if (j.contains("max_delta_candidates"))
    grid.max_delta_candidates = parse_as<std::size_t>(j.at("max_delta_candidates"), path + ": max_delta_candidates");
  return grid;
}

int cmd_search(const SearchArgs& a, const Common& c) {
  const Video video = read_video(a.video);
  const LabelTrack truth = read_labels(a.labels);
  require(truth.size() == video.frames.size(), "label file " + a.labels + " covers " +
                                                   std::to_string(truth.size()) + " frames, video has " +
                                                   std::to_string(video.frames.size()));
  const DataSplit split = split_train_eval(video.frames.size(), {a.train_frac, a.crossval_frac, a.eval_frac}, c.seed);

  // The optimizer only sees oracle answers for the frames it trains and
  // profiles on.
  const Oracle oracle(truth, a.oracle_latency);
  std::vector<std::uint64_t> needed;
  for (std::uint64_t i = split.train.begin; i < split.eval.end; ++i) needed.push_back(i);
  const LabelingResult lr = label_frames(oracle, needed);
  LabelTrack labels(split.eval.end, kAbsent);
  for (std::size_t k = 0; k < needed.size(); ++k) labels[needed[k]] = lr.labels[k];

  InputDims input{a.input_width ? a.input_width : std::min(32u, video.meta.width),
                  a.input_height ? a.input_height : std::min(32u, video.meta.height)};
  const SearchGrid grid = load_grid(a.grid, input, video.meta.channels);

  TimingProfile timing;
  if (!a.timing.empty()) timing = parse_as<TimingProfile>(load_json(a.timing), a.timing);
  else timing.t_full = a.t_full;

  SearchOptions opt;
  opt.seed = c.seed;
  opt.workers = c.workers;
  opt.input = input;
  opt.max_train_frames = a.max_train_frames;
  opt.train.max_epochs = a.epochs;
  opt.oracle.kind = a.oracle_latency > 0 ? OracleKind::stub_delay : OracleKind::ground_truth_file;
  opt.oracle.label_path = a.labels;
  opt.oracle.simulated_latency = a.oracle_latency;
  opt.oracle.t_full = timing.t_full;

  const SearchResult r = search(video, labels, split, {a.fp_star, a.fn_star}, timing, grid, opt);
  const fs::path dir = out_dir(c.out);
  save_json(Json(r.best), dir / "config.json");
  save_json(Json(r), dir / "search.json");
  write_text_file(dir / "ranking.csv", ranking_csv(r));

  std::printf("feasible %s\n", r.feasible ? "true" : "false");
  std::printf("detector %s\n", r.best_detector.c_str());
  std::printf("arch %s\n", r.best_arch.c_str());
  std::printf("delta_diff %.6g\n", r.best.detector->delta_diff);
  std::printf("c_low %.6g\n", r.best.model->thresholds.c_low);
  std::printf("c_high %.6g\n", r.best.model->thresholds.c_high);
  std::printf("expected_cost_s %.6g\n", r.expected_cost);
  print_rate("fp_rate", r.fp_rate);
  print_rate("fn_rate", r.fn_rate);
  if (!r.feasible) {
    std::fprintf(stderr, "no cascade meets fp* = %g, fn* = %g; wrote the closest candidate\n", a.fp_star,
                 a.fn_star);
    return kExitInfeasible;
  }
  return kExitOk;
}

// ---- run -----------------------------------------------------------------

struct RangeArgs {
  std::uint64_t begin = 0;
  std::int64_t end = -1;

  FrameRange resolve(std::uint64_t n) const {
    const std::uint64_t e = end < 0 ? n : std::uint64_t(end);
    require(begin <= e && e <= n, "frame range [" + std::to_string(begin) + ", " + std::to_string(e) +
                                      ") is outside the video (" + std::to_string(n) + " frames)");
    return {begin, e};
  }
};

struct RunArgs {
  std::string config;
  std::string video;
  std::string labels;
  RangeArgs range;
};

CascadeConfig load_config(const std::string& path, const std::string& labels_override) {
  CascadeConfig cfg = parse_as<CascadeConfig>(load_json(path), path);
  if (!labels_override.empty()) cfg.oracle.label_path = labels_override;
  return cfg;
}

int cmd_run(const RunArgs& a, const Common& c) {
  const CascadeConfig cfg = load_config(a.config, a.labels);
  const Video video = read_video(a.video);
  const Oracle oracle = Oracle::from_spec(cfg.oracle);
  const FrameRange range = a.range.resolve(video.frames.size());
  RunOptions ro;
  ro.workers = c.workers;
  const RunResult r = run_cascade(cfg, video, oracle, range, ro);
  const auto intervals = extract_intervals(r.predicted, video.meta.fps, range.begin);

  const fs::path dir = out_dir(c.out);
  write_labels(r.predicted, dir / "predicted.csv", range.begin);
  write_text_file(dir / "intervals.csv", intervals_csv(intervals));
  save_json(Json{{"range", {{"begin", range.begin}, {"end", range.end}}}, {"stats", r.stats}, {"intervals", intervals}},
            dir / "run.json");
  std::printf("frames %llu\n", static_cast<unsigned long long>(r.stats.frames_total));
  std::printf("oracle %llu\n", static_cast<unsigned long long>(r.stats.frames_oracle));
  std::printf("intervals %zu\n", intervals.size());
  return kExitOk;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string ref;
  std::uint32_t window = 30;
  std::uint32_t agree_min = 28;
};

int cmd_eval(const EvalArgs& a, const Common& c) {
  const LabelRows pred = read_label_rows(a.pred);
  const LabelTrack ref_all = read_labels(a.ref);
  require(pred.first_index + pred.labels.size() <= ref_all.size(),
          "predicted frames extend past the reference labels in " + a.ref);
  const LabelTrack ref(ref_all.begin() + std::ptrdiff_t(pred.first_index),
                       ref_all.begin() + std::ptrdiff_t(pred.first_index + pred.labels.size()));
  const EvalConfig cfg{a.window, a.agree_min};
  const double acc = windowed_accuracy(pred.labels, ref, cfg);
  const ErrorRates rates = fp_fn_rates(pred.labels, ref);
  const fs::path dir = out_dir(c.out);
  save_json(Json{{"frames", pred.labels.size()},
                 {"first_index", pred.first_index},
                 {"window", cfg.window},
                 {"agree_min", cfg.agree_min},
                 {"windowed_accuracy", acc},
                 {"rates", rates}},
            dir / "eval.json");
  print_rate("windowed_accuracy", acc);
  print_rate("fp_rate", rates.fp_rate);
  print_rate("fn_rate", rates.fn_rate);
  return kExitOk;
}

// ---- report --------------------------------------------------------------

struct ReportArgs {
  std::string config;
  std::string video;
  std::string labels;
  std::string timing;
  RangeArgs range;
  std::uint32_t window = 30;
  std::uint32_t agree_min = 28;
  bool canonical = false;
};

int cmd_report(const ReportArgs& a, const Common& c) {
  const CascadeConfig cfg = load_config(a.config, "");
  const Video video = read_video(a.video);
  const LabelTrack labels = read_labels(a.labels);
  require(labels.size() == video.frames.size(), "label file " + a.labels + " does not cover the video");
  const Oracle oracle(labels, cfg.oracle.kind == OracleKind::stub_delay ? cfg.oracle.simulated_latency : 0.0);
  const FrameRange range = a.range.resolve(video.frames.size());

  TimingProfile timing;
  timing.t_full = cfg.oracle.t_full;
  if (!a.timing.empty()) timing = parse_as<TimingProfile>(load_json(a.timing), a.timing);
  std::vector<ArchCandidate> archs;
  if (cfg.model) archs.push_back({cfg.model->model.arch.name(), cfg.model->model.arch});
  fill_missing_timing(timing, video, archs, cfg.preprocessing.input, cfg.detector ? cfg.detector->grid : 4);

  ReportOptions opt;
  opt.eval = {a.window, a.agree_min};
  opt.workers = c.workers;
  const StageReport factor = factor_analysis(video, labels, cfg, oracle, range, timing, opt);
  const StageReport lesion = lesion_study(video, labels, cfg, oracle, range, timing, opt);
  const bool wall = !a.canonical;
  const fs::path dir = out_dir(c.out);
  for (const auto& [name, rep] : {std::pair{"factor", &factor}, std::pair{"lesion", &lesion}}) {
    const std::string base = name;
    write_text_file(dir / (base + ".txt"), render_table(*rep, wall));
    write_text_file(dir / (base + ".csv"), render_csv(*rep, wall));
    const Json j = *rep;
    save_json(wall ? j : canonicalize(j), dir / (base + ".json"));
    std::fputs(render_table(*rep, wall).c_str(), stdout);
  }
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::validation:
    case ErrorKind::parse:
    case ErrorKind::io:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

}  // namespace

std::vector<std::string> expand_manifest(const std::vector<std::string>& args) {
  std::string manifest;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--manifest" && i + 1 < args.size()) manifest = args[i + 1];
    else if (args[i].rfind("--manifest=", 0) == 0) manifest = args[i].substr(11);
  }
  if (manifest.empty() || args.size() < 2) return args;
  const Json j = load_json(manifest);
  if (!j.is_object()) throw ParseError(ParseErrorKind::bad_json, manifest + ": expected a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [raw_key, value] : j.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "manifest") continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back("--" + key);
    } else if (value.is_string()) {
      tokens.push_back("--" + key);
      tokens.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      tokens.push_back("--" + key);
      tokens.push_back(value.dump());
    } else {
      throw ParseError(ParseErrorKind::bad_json,
                       manifest + ": value of '" + raw_key + "' must be a string, number or boolean");
    }
  }
  std::vector<std::string> out{args[0], args[1]};
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Filter cascades for binary object-presence queries over fixed-camera video"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  Common common;
  SynthArgs synth;
  LabelArgs label;
  SearchArgs srch;
  RunArgs run;
  EvalArgs ev;
  ReportArgs rep;

  auto* s = app.add_subcommand("synth", "Generate a synthetic clip and its truth labels");
  add_common(s, common, "Output video path");
  s->add_option("--spec", synth.spec, "Synthetic scene JSON")->required();
  s->add_option("--labels", synth.labels, "Output truth label CSV")->required();

  auto* l = app.add_subcommand("label", "Label every frame with the reference oracle");
  add_common(l, common, "Output label CSV");
  l->add_option("--video", label.video, "Input video")->required();
  l->add_option("--truth", label.truth, "Label CSV backing the oracle")->required();
  l->add_option("--latency", label.latency, "Simulated seconds per oracle call")->check(CLI::NonNegativeNumber);

  auto* se = app.add_subcommand("search", "Choose the cheapest cascade meeting the accuracy targets");
  add_common(se, common, "Output directory");
  se->add_option("--video", srch.video, "Input video")->required();
  se->add_option("--labels", srch.labels, "Oracle label CSV")->required();
  se->add_option("--fp-star", srch.fp_star, "Maximum false-positive rate")->check(CLI::Range(0.0, 1.0));
  se->add_option("--fn-star", srch.fn_star, "Maximum false-negative rate")->check(CLI::Range(0.0, 1.0));
  se->add_option("--timing", srch.timing, "Timing profile JSON; missing entries are measured");
  se->add_option("--grid", srch.grid, "Search grid JSON (detectors, archs, max_delta_candidates)");
  se->add_option("--train-frac", srch.train_frac, "Training split fraction");
  se->add_option("--crossval-frac", srch.crossval_frac, "Cross-validation split fraction");
  se->add_option("--eval-frac", srch.eval_frac, "Evaluation split fraction");
  se->add_option("--input-width", srch.input_width, "Model input width (default min(32, width))");
  se->add_option("--input-height", srch.input_height, "Model input height (default min(32, height))");
  se->add_option("--max-train-frames", srch.max_train_frames, "Subsample the training split (0 = all)");
  se->add_option("--epochs", srch.epochs, "Maximum training epochs")->check(CLI::Range(1, 5));
  se->add_option("--t-full", srch.t_full, "Oracle seconds per frame when no timing file is given");
  se->add_option("--oracle-latency", srch.oracle_latency, "Stub oracle delay recorded in the config");

  auto* r = app.add_subcommand("run", "Apply a cascade config to a video");
  add_common(r, common, "Output directory");
  r->add_option("--config", run.config, "Cascade config JSON")->required();
  r->add_option("--video", run.video, "Input video")->required();
  r->add_option("--labels", run.labels, "Override the oracle's label file");
  r->add_option("--begin", run.range.begin, "First frame");
  r->add_option("--end", run.range.end, "One past the last frame (-1 = end of video)");

  auto* e = app.add_subcommand("eval", "Compare a predicted label track with reference labels");
  add_common(e, common, "Output directory");
  e->add_option("--pred", ev.pred, "Predicted label CSV")->required();
  e->add_option("--ref", ev.ref, "Reference label CSV")->required();
  e->add_option("--window", ev.window, "Window length in frames");
  e->add_option("--agree-min", ev.agree_min, "Agreeing frames needed per window");

  auto* p = app.add_subcommand("report", "Factor analysis and lesion study of a cascade");
  add_common(p, common, "Output directory");
  p->add_option("--config", rep.config, "Cascade config JSON")->required();
  p->add_option("--video", rep.video, "Input video")->required();
  p->add_option("--labels", rep.labels, "Reference label CSV")->required();
  p->add_option("--timing", rep.timing, "Timing profile JSON (measured when absent)");
  p->add_option("--begin", rep.range.begin, "First frame");
  p->add_option("--end", rep.range.end, "One past the last frame (-1 = end of video)");
  p->add_option("--window", rep.window, "Window length in frames");
  p->add_option("--agree-min", rep.agree_min, "Agreeing frames needed per window");
  p->add_flag("--canonical", rep.canonical, "Omit wall-clock columns");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_manifest(args);
    std::vector<const char*> ptrs;
    for (const auto& a : args) ptrs.push_back(a.c_str());
    try {
      app.parse(int(ptrs.size()), ptrs.data());
    } catch (const CLI::ParseError& pe) {
      const int code = app.exit(pe);
      return code == 0 ? kExitOk : kExitUsage;
    }
    if (s->parsed()) return cmd_synth(synth, common);
    if (l->parsed()) return cmd_label(label, common);
    if (se->parsed()) return cmd_search(srch, common);
    if (r->parsed()) return cmd_run(run, common);
    if (e->parsed()) return cmd_eval(ev, common);
    if (p->parsed()) return cmd_report(rep, common);
    return kExitUsage;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return exit_code_for(err);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  }
}

}  // namespace vidcascade
