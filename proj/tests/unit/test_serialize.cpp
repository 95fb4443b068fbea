#include <doctest.h>

#include "testkit.hpp"
#include "vidcascade/io_util.hpp"
#include "vidcascade/serialize.hpp"

using namespace vidcascade;

namespace {

template <typename T>
T round_trip(const T& v) {
  const Json j = v;
  return Json::parse(j.dump()).get<T>();
}

ParseErrorKind parse_kind_of(const Json& j) {
  try {
    (void)j.get<CascadeConfig>();
  } catch (const ParseError& e) {
    return e.parse_kind();
  }
  FAIL("accepted an invalid config");
  return ParseErrorKind::bad_csv;
}

CascadeConfig sample_config() {
  CascadeConfig c;
  DiffDetectorConfig d;
  d.mode = CompareMode::earlier_frame;
  d.metric = DiffMetric::blocked_mse;
  d.grid = 2;
  d.weights = {0.1, -0.2, 0.3, 1e-17};
  d.bias = -0.75;
  d.delta_diff = 0.123456789012345678;
  d.t_diff = 10;
  d.t_skip = 15;
  d.reference_image = Frame{{1, 2, 3, 255}, 0};
  c.detector = d;
  ArchSpec a;
  a.input_width = 4;
  a.input_height = 3;
  a.hidden_layers = 2;
  a.hidden_width = 3;
  a.penultimate_width = 2;
  SpecializedModel m = init_model(a, 77);
  m.train_meta = {77, 3, 0.318};
  c.model = ModelStage{m, {0.0625, 0.9375}};
  c.oracle.kind = OracleKind::stub_delay;
  c.oracle.label_path = "labels/truth.csv";
  c.oracle.simulated_latency = 0.002;
  c.oracle.t_full = 0.01;
  c.preprocessing = {{{101.25}}, {4, 3}};
  return c;
}

}  // namespace

TEST_CASE("cascade config round trip is exact") {
  const CascadeConfig c = sample_config();
  const CascadeConfig back = round_trip(c);
  REQUIRE(back.detector.has_value());
  CHECK(back.detector->weights == c.detector->weights);
  CHECK(back.detector->delta_diff == c.detector->delta_diff);
  CHECK(back.detector->reference_image == c.detector->reference_image);
  CHECK(back.detector->name() == c.detector->name());
  CHECK(back.model->model == c.model->model);
  CHECK(back.model->thresholds == c.model->thresholds);
  CHECK(back.oracle.label_path == c.oracle.label_path);
  CHECK(back.oracle.kind == OracleKind::stub_delay);
  CHECK(back.preprocessing.stats.mean == c.preprocessing.stats.mean);
  CHECK(back.preprocessing.input == c.preprocessing.input);
  CHECK(Json(back) == Json(c));

  CascadeConfig bare;
  const CascadeConfig bare_back = round_trip(bare);
  CHECK_FALSE(bare_back.detector.has_value());
  CHECK_FALSE(bare_back.model.has_value());
}

TEST_CASE("other round trips") {
  SynthSpec s = testkit::golden_clip_spec();
  s.background_kind = BackgroundKind::drifting_noise;
  s.label_flip_rate = 0.01;
  CHECK(Json(round_trip(s)) == Json(s));
  TimingProfile t = testkit::fixed_timing(name_archs({ArchSpec{}}));
  CHECK(Json(round_trip(t)) == Json(t));
  const DetectorCandidate d{CompareMode::earlier_frame, DiffMetric::blocked_mse, 4, 30, 5};
  CHECK(round_trip(d).name() == d.name());
}

TEST_CASE("readers reject unknown keys, wrong types and bad shapes") {
  Json j = sample_config();
  j["detector"]["t_skip"] = 3;  // the real key is t_skip_frames
  CHECK(parse_kind_of(j) == ParseErrorKind::bad_json);

  j = sample_config();
  j["model"]["c_low"] = "low";
  CHECK(parse_kind_of(j) == ParseErrorKind::bad_json);

  j = sample_config();
  j["model"]["model"]["layers"][0]["weights"].erase(0);
  CHECK(parse_kind_of(j) == ParseErrorKind::bad_json);

  j = sample_config();
  j["detector"]["mode"] = "sideways";
  CHECK(parse_kind_of(j) == ParseErrorKind::bad_json);

  j = sample_config();
  j["oracle"]["extra"] = 1;
  try {
    (void)j.get<CascadeConfig>();
    FAIL("accepted an unknown key");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("extra") != std::string::npos);
  }
}

TEST_CASE("canonical form drops wall-clock fields") {
  const Json j = Json::parse(R"({"a": 1, "wall_total": 2, "rows": [{"measured": 3, "b": {"wall_s": 4, "c": 5}}],
                                 "timing": {"t_full": 1}})");
  CHECK(canonicalize(j) == Json::parse(R"({"a": 1, "rows": [{"b": {"c": 5}}]})"));
}

TEST_CASE("csv helpers") {
  CHECK(intervals_csv({{0.5, 1.5}, {2.0, 3.25}}) == "start_s,end_s\n0.5,1.5\n2,3.25\n");
  SearchResult r;
  RankingEntry ok;
  ok.detector = "ref/global/skip1";
  ok.arch = "L1-C8";
  ok.outcome.feasible = true;
  ok.outcome.delta_diff = 12.5;
  ok.outcome.thresholds = {0.25, 0.75};
  ok.outcome.cost = 0.001;
  ok.outcome.total = 100;
  ok.outcome.fp_count = 1;
  RankingEntry na = ok;
  na.available = false;
  na.outcome = {};
  r.ranking = {ok, na};
  CHECK(ranking_csv(r) ==
        "detector,arch,delta_diff,c_low,c_high,cost,fp,fn,feasible\n"
        "ref/global/skip1,L1-C8,12.5,0.25,0.75,0.001,0.01,0,true\n"
        "ref/global/skip1,L1-C8,,,,,,,false\n");
}

TEST_CASE("json files") {
  const auto p = testkit::temp_path("bad.json");
  write_text_file(p, "{\"a\": ");
  CHECK_THROWS_AS(load_json(p), ParseError);
  CHECK_THROWS_AS(load_json(testkit::temp_path("missing.json")), Error);
  save_json(Json{{"x", 1}}, p);
  CHECK(load_json(p) == Json{{"x", 1}});
}
