#pragma once

// CSV and JSON export of campaign results.
//
// CSV: header `run_id,system,case,filter,alpha,beta,particles,seed,rmse`,
// one row per run, `-` for a disabled threshold, `nan` for a failed run.
// JSON: {"config": {...}, "summary": {mean, median, q1, q3, min, max,
// failed_runs}, "per_run_rmse": [...]}, failed runs as null.

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "convbf/bench.hpp"
#include "convbf/errors.hpp"

namespace convbf {

/// Shortest decimal form that round-trips.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string format_threshold(const ExponentialThreshold& t, const char* disabled = "-") {
  return t.enabled() ? format_double(t.rate()) : std::string(disabled);
}

inline constexpr const char* kCsvHeader = "run_id,system,case,filter,alpha,beta,particles,seed,rmse";

inline void write_csv_rows(std::ostream& out, const CampaignResult& result) {
  const auto& c = result.config;
  for (std::size_t r = 0; r < result.summary.per_run_rmse.size(); ++r) {
    out << r << ',' << to_string(c.system) << ',' << to_string(c.mismatch) << ',' << to_string(c.filter) << ','
        << format_threshold(c.alpha) << ',' << format_threshold(c.beta) << ',' << c.particles << ',' << c.seed
        << ',' << format_double(result.summary.per_run_rmse[r]) << '\n';
  }
}

inline std::string to_csv(const std::vector<CampaignResult>& results) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : results) write_csv_rows(out, r);
  return out.str();
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"system", to_string(c.system)},
          {"case", to_string(c.mismatch)},
          {"filter", to_string(c.filter)},
          {"alpha", format_threshold(c.alpha, "off")},
          {"beta", format_threshold(c.beta, "off")},
          {"runs", c.runs},
          {"steps", c.steps},
          {"particles", c.particles},
          {"seed", c.seed}};
}

namespace detail {

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::json summary_to_json(const RmseSummary& s) {
  return {{"mean", detail::number_or_null(s.mean)},     {"median", detail::number_or_null(s.median)},
          {"q1", detail::number_or_null(s.q1)},         {"q3", detail::number_or_null(s.q3)},
          {"min", detail::number_or_null(s.min)},       {"max", detail::number_or_null(s.max)},
          {"failed_runs", s.failed_runs}};
}

inline nlohmann::json to_json(const CampaignResult& r) {
  nlohmann::json per_run = nlohmann::json::array();
  for (double v : r.summary.per_run_rmse) per_run.push_back(detail::number_or_null(v));
  return {{"config", config_to_json(r.config)}, {"summary", summary_to_json(r.summary)}, {"per_run_rmse", per_run}};
}

/// Inverse of to_json for the summary part.
inline RmseSummary summary_from_json(const nlohmann::json& j) {
  RmseSummary s;
  const auto& sum = j.at("summary");
  s.mean = detail::number_from(sum.at("mean"));
  s.median = detail::number_from(sum.at("median"));
  s.q1 = detail::number_from(sum.at("q1"));
  s.q3 = detail::number_from(sum.at("q3"));
  s.min = detail::number_from(sum.at("min"));
  s.max = detail::number_from(sum.at("max"));
  s.failed_runs = sum.at("failed_runs").get<std::size_t>();
  if (j.contains("per_run_rmse")) {
    for (const auto& v : j.at("per_run_rmse")) s.per_run_rmse.push_back(detail::number_from(v));
  }
  return s;
}

enum class ExportFormat { csv, json };

inline ExportFormat parse_format(std::string_view s) {
  if (s == "csv") return ExportFormat::csv;
  if (s == "json") return ExportFormat::json;
  throw ConfigError("unknown format '" + std::string(s) + "'");
}

/// A single campaign is written as one JSON object, several as an array.
inline std::string render(const std::vector<CampaignResult>& results, ExportFormat format) {
  if (format == ExportFormat::csv) return to_csv(results);
  if (results.size() == 1) return to_json(results.front()).dump(2) + "\n";
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  return arr.dump(2) + "\n";
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

inline void export_results(const std::vector<CampaignResult>& results, ExportFormat format, const std::string& path) {
  write_text(path, render(results, format));
}

}  // namespace convbf
