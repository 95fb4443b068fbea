#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "vidcascade/cascade.hpp"
#include "vidcascade/cbo.hpp"
#include "vidcascade/error.hpp"
#include "vidcascade/evalkit.hpp"
#include "vidcascade/frames.hpp"
#include "vidcascade/oracle.hpp"
#include "vidcascade/specialized.hpp"

namespace vidcascade {

using Json = nlohmann::json;

// Readers reject unknown keys and wrong types with a ParseError naming the
// offending field. Missing keys keep their defaults unless noted.

void to_json(Json& j, const VideoMeta& v);
void from_json(const Json& j, VideoMeta& v);
void to_json(Json& j, const SynthSpec& v);
void from_json(const Json& j, SynthSpec& v);

void to_json(Json& j, const ArchSpec& v);
void from_json(const Json& j, ArchSpec& v);
void to_json(Json& j, const SpecializedModel& v);
void from_json(const Json& j, SpecializedModel& v);
void to_json(Json& j, const ThresholdPair& v);
void from_json(const Json& j, ThresholdPair& v);

void to_json(Json& j, const DiffDetectorConfig& v);
void from_json(const Json& j, DiffDetectorConfig& v);
void to_json(Json& j, const OracleSpec& v);
void from_json(const Json& j, OracleSpec& v);
void to_json(Json& j, const CascadeConfig& v);
void from_json(const Json& j, CascadeConfig& v);

void to_json(Json& j, const TimingProfile& v);
void from_json(const Json& j, TimingProfile& v);
void to_json(Json& j, const AccuracyTarget& v);
void from_json(const Json& j, AccuracyTarget& v);
void to_json(Json& j, const DetectorCandidate& v);
void from_json(const Json& j, DetectorCandidate& v);
void to_json(Json& j, const SplitFractions& v);
void from_json(const Json& j, SplitFractions& v);

void to_json(Json& j, const RunStats& v);
void to_json(Json& j, const SelectivityEstimate& v);
void to_json(Json& j, const SweepOutcome& v);
void to_json(Json& j, const SearchResult& v);
void to_json(Json& j, const ErrorRates& v);
void to_json(Json& j, const StageReport& v);
void to_json(Json& j, const Interval& v);

/// Drops wall-clock fields (any key starting with "wall" or "measured")
/// recursively, for golden comparisons.
Json canonicalize(const Json& j);

Json load_json(const std::filesystem::path& path);
void save_json(const Json& j, const std::filesystem::path& path);

/// `detector,arch,delta_diff,c_low,c_high,cost,fp,fn,feasible`
std::string ranking_csv(const SearchResult& result);

/// `start_s,end_s`
std::string intervals_csv(const std::vector<Interval>& intervals);

template <typename T>
T parse_as(const Json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::bad_json, what + ": " + e.what());
  }
}

}  // namespace vidcascade
