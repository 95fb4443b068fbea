#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "testkit.hpp"
#include "vidcascade/cli.hpp"
#include "vidcascade/io_util.hpp"
#include "vidcascade/serialize.hpp"

using namespace vidcascade;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vidcascade");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = testkit::temp_path("cli") / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Clip {
  fs::path dir, spec, video, truth, grid;
};

Clip make_clip(const std::string& name, double flip_rate = 0.0) {
  Clip c;
  c.dir = fresh_dir(name);
  c.spec = c.dir / "spec.json";
  c.video = c.dir / "clip.vcv";
  c.truth = c.dir / "truth.csv";
  c.grid = c.dir / "grid.json";
  SynthSpec s;
  s.meta = {16, 16, 1, 30, 1500};
  s.object_size = 5;
  s.appearance_rate = 8.0;
  s.dwell_frames = 60;
  s.label_flip_rate = flip_rate;
  s.seed = 4;
  save_json(Json(s), c.spec);
  save_json(Json::parse(R"({
    "detectors": [
      {"mode": "reference-image", "metric": "global-mse", "t_skip_frames": 1},
      {"mode": "earlier-frame", "metric": "global-mse", "t_diff_frames": 5, "t_skip_frames": 5}
    ],
    "archs": [{"hidden_layers": 1, "hidden_width": 4}]
  })"),
            c.grid);
  REQUIRE(cli({"synth", "--spec", c.spec.string(), "--labels", c.truth.string(), "--out", c.video.string()}) == 0);
  return c;
}

std::vector<std::string> search_args(const Clip& c, const fs::path& out) {
  return {"search",        "--video",        c.video.string(), "--labels", c.truth.string(), "--grid",
          c.grid.string(), "--input-width",  "8",              "--input-height", "8",          "--epochs",
          "1",             "--workers",      "1",              "--t-full",  "0.01",            "--out",
          out.string()};
}

}  // namespace

TEST_CASE("synth is deterministic and reports its outputs") {
  const Clip a = make_clip("synth_a");
  const Clip b = make_clip("synth_b");
  CHECK(read_text_file(a.video) == read_text_file(b.video));
  CHECK(read_text_file(a.truth) == read_text_file(b.truth));
  CHECK(read_video(a.video).frames.size() == 1500);
}

TEST_CASE("usage and input errors exit with 2") {
  const fs::path d = fresh_dir("errors");
  CHECK(cli({"synth", "--spec", (d / "nope.json").string(), "--labels", (d / "l.csv").string(), "--out",
             (d / "v.vcv").string()}) == kExitUsage);
  CHECK(cli({"synth", "--labels", "x.csv"}) == kExitUsage);
  CHECK(cli({"frobnicate"}) == kExitUsage);
  CHECK(cli({}) == kExitUsage);
  write_text_file(d / "bad.json", "{\"meta\": {\"width\": 0}}");
  CHECK(cli({"synth", "--spec", (d / "bad.json").string(), "--labels", (d / "l.csv").string(), "--out",
             (d / "v.vcv").string()}) == kExitUsage);
}

TEST_CASE("label, run and eval agree on a filter-free cascade") {
  const Clip c = make_clip("pipeline");
  const fs::path labels = c.dir / "oracle.csv";
  REQUIRE(cli({"label", "--video", c.video.string(), "--truth", c.truth.string(), "--out", labels.string()}) == 0);
  CHECK(read_text_file(labels) == read_text_file(c.truth));

  CascadeConfig cfg;
  cfg.oracle.label_path = labels;
  save_json(Json(cfg), c.dir / "config.json");
  const fs::path run = c.dir / "run";
  REQUIRE(cli({"run", "--config", (c.dir / "config.json").string(), "--video", c.video.string(), "--begin", "100",
               "--out", run.string()}) == 0);
  const LabelRows pred = read_label_rows(run / "predicted.csv");
  CHECK(pred.first_index == 100);
  const LabelTrack truth = read_labels(c.truth);
  CHECK(pred.labels == LabelTrack(truth.begin() + 100, truth.end()));
  CHECK(load_json(run / "run.json")["stats"]["frames_oracle"] == 1400);

  REQUIRE(cli({"eval", "--pred", (run / "predicted.csv").string(), "--ref", c.truth.string(), "--out",
               (c.dir / "eval").string()}) == 0);
  const Json ev = load_json(c.dir / "eval" / "eval.json");
  CHECK(ev["windowed_accuracy"] == 1.0);
  CHECK(ev["rates"]["fp_rate"] == 0.0);

  CHECK(cli({"run", "--config", (c.dir / "config.json").string(), "--video", c.video.string(), "--end", "99999",
             "--out", run.string()}) == kExitUsage);
}

TEST_CASE("unconstrained search picks the top ranked pair") {
  const Clip c = make_clip("search_free");
  const fs::path out = c.dir / "out";
  auto args = search_args(c, out);
  args.insert(args.end(), {"--fp-star", "1", "--fn-star", "1"});
  REQUIRE(cli(args) == kExitOk);
  const Json s = load_json(out / "search.json");
  CHECK(s["feasible"] == true);
  const std::string csv = read_text_file(out / "ranking.csv");
  const auto first = csv.substr(csv.find('\n') + 1);
  CHECK(first.rfind(s["best_detector"].get<std::string>() + "," + s["best_arch"].get<std::string>() + ",", 0) == 0);
  const CascadeConfig cfg = parse_as<CascadeConfig>(load_json(out / "config.json"), "config");
  CHECK(cfg.detector.has_value());
  CHECK(cfg.model.has_value());
  CHECK(cfg.oracle.t_full == 0.01);

  const fs::path rep = c.dir / "rep";
  REQUIRE(cli({"report", "--config", (out / "config.json").string(), "--video", c.video.string(), "--labels",
               c.truth.string(), "--begin", "900", "--canonical", "--out", rep.string()}) == 0);
  CHECK(read_text_file(rep / "factor.csv").find("wall") == std::string::npos);
  CHECK(load_json(rep / "lesion.json")["rows"].size() == 5);
}

TEST_CASE("impossible targets exit with 3 and still write the closest config") {
  // Every candidate skips frames, and reference flicker makes skipped frames
  // wrong no matter which thresholds are chosen.
  Clip c = make_clip("search_noisy", 0.05);
  c.grid = c.dir / "skip_grid.json";
  save_json(Json::parse(R"({
    "detectors": [{"mode": "earlier-frame", "metric": "global-mse", "t_diff_frames": 5, "t_skip_frames": 5}],
    "archs": [{"hidden_layers": 1, "hidden_width": 4}]
  })"),
            c.grid);
  const fs::path out = c.dir / "out";
  auto args = search_args(c, out);
  args.insert(args.end(), {"--fp-star", "0", "--fn-star", "0"});
  CHECK(cli(args) == kExitInfeasible);
  CHECK(fs::exists(out / "config.json"));
  CHECK(load_json(out / "search.json")["feasible"] == false);
}

TEST_CASE("manifest values come first so explicit flags win") {
  const fs::path d = fresh_dir("manifest");
  save_json(Json{{"fp_star", 0.2}, {"workers", 2}, {"canonical", true}, {"skip", false}}, d / "m.json");
  const std::vector<std::string> args{"vidcascade", "search", "--manifest", (d / "m.json").string(), "--fp-star",
                                      "0.05"};
  const auto out = expand_manifest(args);
  // Object keys come out in sorted order.
  const std::vector<std::string> want{"vidcascade", "search", "--canonical", "--fp-star", "0.2", "--workers", "2",
                                      "--manifest", (d / "m.json").string(), "--fp-star", "0.05"};
  CHECK(out == want);
  CHECK(expand_manifest({"vidcascade", "run", "--out", "x"}) == std::vector<std::string>{"vidcascade", "run", "--out", "x"});

  save_json(Json{{"spec", "missing.json"}}, d / "m2.json");
  const Clip c = make_clip("manifest_clip");
  // The explicit --spec wins over the manifest's.
  CHECK(cli({"synth", "--manifest", (d / "m2.json").string(), "--spec", c.spec.string(), "--labels",
             (d / "l.csv").string(), "--out", (d / "v.vcv").string()}) == 0);
  CHECK(cli({"synth", "--manifest", (d / "m2.json").string(), "--labels", (d / "l.csv").string(), "--out",
             (d / "v.vcv").string()}) == kExitUsage);
  save_json(Json{{"spec", Json::array()}}, d / "m3.json");
  CHECK(cli({"synth", "--manifest", (d / "m3.json").string(), "--spec", c.spec.string(), "--labels",
             (d / "l.csv").string(), "--out", (d / "v.vcv").string()}) == kExitUsage);
}

TEST_CASE("the installed binary reports exit codes") {
  const std::string bin = VIDCASCADE_CLI_PATH;
  CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
  const int status = std::system((bin + " synth --spec /nonexistent.json --labels x --out y 2> /dev/null").c_str());
  CHECK(WEXITSTATUS(status) == kExitUsage);
}
