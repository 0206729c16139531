#ifndef CTSMC_REPORT_HPP
#define CTSMC_REPORT_HPP

#include <cmath>
#include <json.hpp>
#include <string>

namespace ctsmc {

using Json = nlohmann::ordered_json;

inline constexpr int kReportFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

// JSON has no inf/nan literals; overflowed bound values are reported as
// strings so reports stay valid and byte-stable.
inline Json json_real(double v) {
  if (std::isfinite(v)) return Json(v);
  if (std::isnan(v)) return Json("nan");
  return Json(v > 0 ? "inf" : "-inf");
}

// Canonical envelope: fixed key order so identical runs emit identical bytes.
Json make_report(const std::string& tool, Json config, Json result);

// One flat key,value CSV row per report; arrays joined with '|', nested keys
// dotted, columns in insertion order.
std::string report_to_csv(const Json& report);

// Serialized exactly as written to --out (trailing newline included).
std::string render_report(const Json& report, const std::string& format);

void write_report(const Json& report, const std::string& out_path, const std::string& format);

}  // namespace ctsmc

#endif
