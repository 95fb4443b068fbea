#include "vidcascade/serialize.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include "vidcascade/error.hpp"
#include "vidcascade/io_util.hpp"

namespace vidcascade {

namespace {

[[noreturn]] void bad(const std::string& what) { throw ParseError(ParseErrorKind::bad_json, what); }

// Field-by-field reader that remembers which keys were consumed so that
// typos in hand-written files surface as errors instead of being ignored.
class Reader {
 public:
  Reader(const Json& j, std::string context) : j_(j), ctx_(std::move(context)) {
    if (!j.is_object()) bad(ctx_ + ": expected a JSON object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) bad(ctx_ + ": unknown key '" + key + "'");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it != j_.end() && !it->is_null();
  }
  const Json& at(const std::string& key) {
    if (!has(key)) bad(ctx_ + ": missing key '" + key + "'");
    return j_.at(key);
  }
  template <typename T>
  void opt(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      bad(ctx_ + "." + key + ": " + e.what());
    }
  }
  template <typename T>
  void req(const std::string& key, T& out) {
    at(key);
    opt(key, out);
  }

 private:
  const Json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

template <typename T, typename Parse>
void opt_enum(Reader& r, const std::string& key, T& out, Parse parse) {
  std::string s;
  r.opt(key, s);
  if (s.empty()) return;
  try {
    out = parse(s);
  } catch (const Error& e) {
    bad(key + ": " + e.what());
  }
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void to_json(Json& j, const VideoMeta& v) {
  j = Json{{"width", v.width}, {"height", v.height}, {"channels", v.channels}, {"fps", v.fps},
           {"frame_count", v.frame_count}};
}

void from_json(const Json& j, VideoMeta& v) {
  Reader r(j, "meta");
  r.opt("width", v.width);
  r.opt("height", v.height);
  r.opt("channels", v.channels);
  r.opt("fps", v.fps);
  r.opt("frame_count", v.frame_count);
}

void to_json(Json& j, const SynthSpec& v) {
  j = Json{{"meta", v.meta},
           {"background_kind", to_string(v.background_kind)},
           {"object_size", v.object_size},
           {"object_intensity", v.object_intensity},
           {"background_level", v.background_level},
           {"appearance_rate", v.appearance_rate},
           {"dwell_frames", v.dwell_frames},
           {"noise_sigma", v.noise_sigma},
           {"label_flip_rate", v.label_flip_rate},
           {"seed", v.seed}};
}

void from_json(const Json& j, SynthSpec& v) {
  Reader r(j, "synth spec");
  r.opt("meta", v.meta);
  opt_enum(r, "background_kind", v.background_kind, background_kind_from_string);
  r.opt("object_size", v.object_size);
  r.opt("object_intensity", v.object_intensity);
  r.opt("background_level", v.background_level);
  r.opt("appearance_rate", v.appearance_rate);
  r.opt("dwell_frames", v.dwell_frames);
  r.opt("noise_sigma", v.noise_sigma);
  r.opt("label_flip_rate", v.label_flip_rate);
  r.opt("seed", v.seed);
}

void to_json(Json& j, const ArchSpec& v) {
  j = Json{{"input_width", v.input_width},   {"input_height", v.input_height},
           {"channels", v.channels},         {"hidden_layers", v.hidden_layers},
           {"hidden_width", v.hidden_width}, {"penultimate_width", v.penultimate_width}};
}

void from_json(const Json& j, ArchSpec& v) {
  Reader r(j, "arch");
  r.opt("input_width", v.input_width);
  r.opt("input_height", v.input_height);
  r.opt("channels", v.channels);
  r.opt("hidden_layers", v.hidden_layers);
  r.opt("hidden_width", v.hidden_width);
  r.opt("penultimate_width", v.penultimate_width);
}

void to_json(Json& j, const SpecializedModel& v) {
  Json layers = Json::array();
  for (const DenseLayer& l : v.layers)
    layers.push_back(Json{{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"biases", l.biases}});
  j = Json{{"arch", v.arch},
           {"layers", layers},
           {"train_meta",
            {{"seed", v.train_meta.seed},
             {"epochs_run", v.train_meta.epochs_run},
             {"crossval_loss", v.train_meta.crossval_loss}}}};
}

void from_json(const Json& j, SpecializedModel& v) {
  Reader r(j, "model");
  r.req("arch", v.arch);
  const Json& layers = r.at("layers");
  if (!layers.is_array()) bad("model.layers: expected an array");
  v.layers.clear();
  for (const Json& lj : layers) {
    Reader lr(lj, "model.layers[]");
    DenseLayer l;
    lr.req("in", l.in);
    lr.req("out", l.out);
    lr.req("weights", l.weights);
    lr.req("biases", l.biases);
    v.layers.push_back(std::move(l));
  }
  if (r.has("train_meta")) {
    Reader mr(r.at("train_meta"), "model.train_meta");
    mr.opt("seed", v.train_meta.seed);
    mr.opt("epochs_run", v.train_meta.epochs_run);
    mr.opt("crossval_loss", v.train_meta.crossval_loss);
  }
  try {
    v.arch.validate();
  } catch (const Error& e) {
    bad(std::string("model.arch: ") + e.what());
  }
  const auto widths = v.arch.layer_widths();
  if (widths.size() != v.layers.size()) bad("model.layers: count does not match the architecture");
  std::size_t in = v.arch.input_size();
  for (std::size_t k = 0; k < widths.size(); ++k) {
    const DenseLayer& l = v.layers[k];
    if (l.in != in || l.out != widths[k] || l.weights.size() != std::size_t(l.in) * l.out ||
        l.biases.size() != l.out)
      bad("model.layers[" + std::to_string(k) + "]: shape does not match the architecture");
    in = l.out;
  }
}

void to_json(Json& j, const ThresholdPair& v) { j = Json{{"c_low", v.c_low}, {"c_high", v.c_high}}; }

void from_json(const Json& j, ThresholdPair& v) {
  Reader r(j, "thresholds");
  r.req("c_low", v.c_low);
  r.req("c_high", v.c_high);
}

void to_json(Json& j, const DiffDetectorConfig& v) {
  j = Json{{"mode", to_string(v.mode)},
           {"metric", to_string(v.metric)},
           {"grid", v.grid},
           {"weights", v.weights},
           {"bias", v.bias},
           {"delta_diff", v.delta_diff},
           {"t_diff_frames", v.t_diff},
           {"t_skip_frames", v.t_skip},
           {"reference_image", nullptr}};
  if (v.reference_image) j["reference_image"] = Json{{"pixels", v.reference_image->pixels}};
}

void from_json(const Json& j, DiffDetectorConfig& v) {
  Reader r(j, "detector");
  opt_enum(r, "mode", v.mode, compare_mode_from_string);
  opt_enum(r, "metric", v.metric, diff_metric_from_string);
  r.opt("grid", v.grid);
  r.opt("weights", v.weights);
  r.opt("bias", v.bias);
  r.opt("delta_diff", v.delta_diff);
  r.opt("t_diff_frames", v.t_diff);
  r.opt("t_skip_frames", v.t_skip);
  v.reference_image.reset();
  if (r.has("reference_image")) {
    Reader ir(r.at("reference_image"), "detector.reference_image");
    Frame f;
    ir.req("pixels", f.pixels);
    v.reference_image = std::move(f);
  }
}

void to_json(Json& j, const OracleSpec& v) {
  j = Json{{"kind", to_string(v.kind)},
           {"label_path", v.label_path.string()},
           {"simulated_latency", v.simulated_latency},
           {"t_full", v.t_full}};
}

void from_json(const Json& j, OracleSpec& v) {
  Reader r(j, "oracle");
  opt_enum(r, "kind", v.kind, oracle_kind_from_string);
  std::string path;
  r.opt("label_path", path);
  v.label_path = path;
  r.opt("simulated_latency", v.simulated_latency);
  r.opt("t_full", v.t_full);
}

void to_json(Json& j, const CascadeConfig& v) {
  j = Json{{"detector", nullptr},
           {"model", nullptr},
           {"oracle", v.oracle},
           {"preprocessing",
            {{"means", v.preprocessing.stats.mean},
             {"input_width", v.preprocessing.input.width},
             {"input_height", v.preprocessing.input.height}}}};
  if (v.detector) j["detector"] = *v.detector;
  if (v.model)
    j["model"] = Json{{"model", v.model->model},
                      {"c_low", v.model->thresholds.c_low},
                      {"c_high", v.model->thresholds.c_high}};
}

void from_json(const Json& j, CascadeConfig& v) {
  Reader r(j, "cascade config");
  v.detector.reset();
  v.model.reset();
  if (r.has("detector")) v.detector = r.at("detector").get<DiffDetectorConfig>();
  if (r.has("model")) {
    Reader mr(r.at("model"), "cascade config.model");
    ModelStage ms;
    mr.req("model", ms.model);
    mr.opt("c_low", ms.thresholds.c_low);
    mr.opt("c_high", ms.thresholds.c_high);
    v.model = std::move(ms);
  }
  r.opt("oracle", v.oracle);
  if (r.has("preprocessing")) {
    Reader pr(r.at("preprocessing"), "cascade config.preprocessing");
    pr.opt("means", v.preprocessing.stats.mean);
    pr.opt("input_width", v.preprocessing.input.width);
    pr.opt("input_height", v.preprocessing.input.height);
  }
}

void to_json(Json& j, const TimingProfile& v) {
  j = Json{{"t_mse", v.t_mse}, {"t_mse_blocked", v.t_mse_blocked}, {"t_specialized", v.t_specialized},
           {"t_full", v.t_full}};
}

void from_json(const Json& j, TimingProfile& v) {
  Reader r(j, "timing");
  r.opt("t_mse", v.t_mse);
  r.opt("t_mse_blocked", v.t_mse_blocked);
  r.opt("t_specialized", v.t_specialized);
  r.opt("t_full", v.t_full);
}

void to_json(Json& j, const AccuracyTarget& v) { j = Json{{"fp_star", v.fp_star}, {"fn_star", v.fn_star}}; }

void from_json(const Json& j, AccuracyTarget& v) {
  Reader r(j, "targets");
  r.opt("fp_star", v.fp_star);
  r.opt("fn_star", v.fn_star);
}

void to_json(Json& j, const DetectorCandidate& v) {
  j = Json{{"mode", to_string(v.mode)}, {"metric", to_string(v.metric)}, {"grid", v.grid},
           {"t_diff_frames", v.t_diff}, {"t_skip_frames", v.t_skip}};
}

void from_json(const Json& j, DetectorCandidate& v) {
  Reader r(j, "detector candidate");
  opt_enum(r, "mode", v.mode, compare_mode_from_string);
  opt_enum(r, "metric", v.metric, diff_metric_from_string);
  r.opt("grid", v.grid);
  r.opt("t_diff_frames", v.t_diff);
  r.opt("t_skip_frames", v.t_skip);
}

void to_json(Json& j, const SplitFractions& v) {
  j = Json{{"train", v.train}, {"crossval", v.crossval}, {"eval", v.eval}};
}

void from_json(const Json& j, SplitFractions& v) {
  Reader r(j, "split");
  r.opt("train", v.train);
  r.opt("crossval", v.crossval);
  r.opt("eval", v.eval);
}

void to_json(Json& j, const RunStats& v) {
  j = Json{{"frames_total", v.frames_total},
           {"frames_skipped", v.frames_skipped},
           {"frames_checked", v.frames_checked},
           {"frames_scored", v.frames_scored},
           {"frames_suppressed", v.frames_suppressed},
           {"frames_fired", v.frames_fired},
           {"frames_model_scored", v.frames_model_scored},
           {"frames_model_decided", v.frames_model_decided},
           {"frames_oracle", v.frames_oracle},
           {"wall_detector", v.wall_detector},
           {"wall_model", v.wall_model},
           {"wall_oracle", v.wall_oracle},
           {"wall_total", v.wall_total}};
}

void to_json(Json& j, const SelectivityEstimate& v) { j = Json{{"f_s", v.f_s}, {"f_m", v.f_m}, {"f_c", v.f_c}}; }

void to_json(Json& j, const SweepOutcome& v) {
  j = Json{{"feasible", v.feasible},   {"delta_diff", v.delta_diff},     {"c_low", v.thresholds.c_low},
           {"c_high", v.thresholds.c_high}, {"selectivities", v.sel},     {"cost", v.cost},
           {"fp_count", v.fp_count},   {"fn_count", v.fn_count},         {"fp_rate", v.fp_rate()},
           {"fn_rate", v.fn_rate()},   {"oracle_calls", v.oracle_calls}, {"fired", v.fired},
           {"checked", v.checked},     {"total", v.total}};
}

void to_json(Json& j, const SearchResult& v) {
  Json ranking = Json::array();
  for (const RankingEntry& e : v.ranking) {
    Json row = e.outcome;
    row["detector"] = e.detector;
    row["arch"] = e.arch;
    row["available"] = e.available;
    if (!e.note.empty()) row["note"] = e.note;
    ranking.push_back(std::move(row));
  }
  j = Json{{"feasible", v.feasible},
           {"best_detector", v.best_detector},
           {"best_arch", v.best_arch},
           {"expected_cost", v.expected_cost},
           {"selectivities", v.sel},
           {"fp_rate", v.fp_rate},
           {"fn_rate", v.fn_rate},
           {"oracle_calls", v.oracle_calls},
           {"eval_frames", v.eval_frames},
           {"timing", v.timing},
           {"config", v.best},
           {"ranking", ranking}};
}

void to_json(Json& j, const ErrorRates& v) {
  j = Json{{"fp_rate", v.fp_rate}, {"fn_rate", v.fn_rate}, {"tp", v.counts.tp},
           {"tn", v.counts.tn},    {"fp", v.counts.fp},       {"fn", v.counts.fn}};
}

void to_json(Json& j, const StageReport& v) {
  Json rows = Json::array();
  for (const ReportRow& r : v.rows) {
    Json row{{"configuration", r.name},
             {"stats", r.stats},
             {"accuracy", r.accuracy},
             {"rates", r.rates},
             {"modeled_speedup", r.speedup.modeled},
             {"measured_speedup", nullptr}};
    if (r.speedup.measured) row["measured_speedup"] = *r.speedup.measured;
    rows.push_back(std::move(row));
  }
  j = Json{{"title", v.title}, {"rows", rows}};
}

void to_json(Json& j, const Interval& v) { j = Json{{"start_s", v.start_s}, {"end_s", v.end_s}}; }

Json canonicalize(const Json& j) {
  if (j.is_array()) {
    Json out = Json::array();
    for (const Json& e : j) out.push_back(canonicalize(e));
    return out;
  }
  if (!j.is_object()) return j;
  Json out = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (key.rfind("wall", 0) == 0 || key.rfind("measured", 0) == 0 || key == "timing") continue;
    out[key] = canonicalize(value);
  }
  return out;
}

Json load_json(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad(path.string() + ": " + e.what());
  }
}

void save_json(const Json& j, const std::filesystem::path& path) { write_text_file(path, j.dump(2) + "\n"); }

std::string ranking_csv(const SearchResult& result) {
  std::ostringstream out;
  out << "detector,arch,delta_diff,c_low,c_high,cost,fp,fn,feasible\n";
  for (const RankingEntry& e : result.ranking) {
    const SweepOutcome& o = e.outcome;
    out << e.detector << ',' << e.arch << ',';
    if (e.available)
      out << num(o.delta_diff) << ',' << num(o.thresholds.c_low) << ',' << num(o.thresholds.c_high) << ','
          << num(o.cost) << ',' << num(o.fp_rate()) << ',' << num(o.fn_rate()) << ',';
    else
      out << ",,,,,,";
    out << (o.feasible ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string intervals_csv(const std::vector<Interval>& intervals) {
  std::ostringstream out;
  out << "start_s,end_s\n";
  for (const Interval& i : intervals) out << num(i.start_s) << ',' << num(i.end_s) << '\n';
  return out.str();
}

}  // namespace vidcascade
