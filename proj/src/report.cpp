#include "ctsmc/report.hpp"

#include <fstream>
#include <iostream>

#include "ctsmc/common.hpp"

namespace ctsmc {

Json make_report(const std::string& tool, Json config, Json result) {
  Json report;
  report["tool"] = tool;
  report["version"] = kToolVersion;
  report["format"] = kReportFormatVersion;
  report["config"] = std::move(config);
  report["result"] = std::move(result);
  return report;
}

namespace {

void flatten(const Json& node, const std::string& prefix, Json& row) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), row);
  } else if (node.is_array()) {
    std::string joined;
    for (size_t i = 0; i < node.size(); ++i) {
      if (i) joined += "|";
      const auto& v = node[i];
      joined += v.is_string() ? v.get<std::string>() : v.dump();
    }
    row[prefix] = joined;
  } else {
    row[prefix] = node;
  }
}

std::string csv_escape(const std::string& s) {
  bool needs = s.find_first_of(",\"\n") != std::string::npos;
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

std::string report_to_csv(const Json& report) {
  Json row;
  flatten(report, "", row);
  std::string header, values;
  bool first = true;
  for (auto it = row.begin(); it != row.end(); ++it) {
    if (!first) {
      header += ",";
      values += ",";
    }
    first = false;
    header += csv_escape(it.key());
    const auto& v = it.value();
    values += csv_escape(v.is_string() ? v.get<std::string>() : v.dump());
  }
  return header + "\n" + values + "\n";
}

std::string render_report(const Json& report, const std::string& format) {
  if (format == "csv") return report_to_csv(report);
  if (format == "json") return report.dump(2) + "\n";
  throw ValidationError("format must be 'json' or 'csv'");
}

void write_report(const Json& report, const std::string& out_path, const std::string& format) {
  std::string payload = render_report(report, format);
  if (out_path.empty() || out_path == "-") {
    std::cout << payload;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ValidationError("cannot write report to " + out_path);
  out << payload;
}

}  // namespace ctsmc
