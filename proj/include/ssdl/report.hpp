#pragma once

// Experiment report files: a delimited table and a JSON document carrying the same rows.
//
// Delimited layout:
//   # experiment: <name>
//   # config: <single-line JSON>
//   row_type,variant,noise,count,subset,cell,repetition,seed,accuracy,error,history_length,
//     wall_seconds,runs,mean_accuracy,std_accuracy,best_error,best_cell
// followed by "run" rows, then "aggregate" rows. Reals are written with 17 significant digits.

#include <ssdl/core.hpp>
#include <ssdl/eval.hpp>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace ssdl {

enum class ReportFormat { Csv, Structured };

inline ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "structured" || name == "json") return ReportFormat::Structured;
  throw InvalidConfiguration("unknown report format '" + name + "' (expected csv or structured)");
}

inline constexpr const char* kReportColumns =
    "row_type,variant,noise,count,subset,cell,repetition,seed,accuracy,error,history_length,wall_seconds,runs,"
    "mean_accuracy,std_accuracy,best_error,best_cell";

namespace detail {

inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const std::string& checked_field(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos)
    throw ContractViolation("report field '" + s + "' contains a delimiter or newline");
  return s;
}

inline std::string compact_config(const std::string& config) {
  if (config.empty()) return "{}";
  try {
    return nlohmann::json::parse(config).dump();
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("report config echo is not valid JSON: ") + e.what());
  }
}

inline std::string report_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "# experiment: " << checked_field(r.experiment) << '\n';
  out << "# config: " << compact_config(r.config) << '\n';
  out << kReportColumns << '\n';
  for (const auto& run : r.runs) {
    out << "run," << checked_field(run.variant) << ',' << fmt_real(run.noise) << ',' << run.count << ','
        << checked_field(run.subset) << ',' << checked_field(run.cell) << ',' << run.repetition << ',' << run.seed
        << ',' << fmt_real(run.accuracy) << ',' << fmt_real(run.error) << ',' << run.history_length << ','
        << fmt_real(run.wall_seconds) << ",,,,,\n";
  }
  for (const auto& a : r.aggregates) {
    out << "aggregate," << checked_field(a.variant) << ',' << fmt_real(a.noise) << ',' << a.count << ','
        << checked_field(a.subset) << ",,,,,,,," << a.runs << ',' << fmt_real(a.mean_accuracy) << ','
        << fmt_real(a.std_accuracy) << ',' << fmt_real(a.best_error) << ',' << checked_field(a.best_cell) << '\n';
  }
  return out.str();
}

inline nlohmann::json report_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["experiment"] = r.experiment;
  j["config"] = nlohmann::json::parse(compact_config(r.config));
  j["runs"] = nlohmann::json::array();
  for (const auto& run : r.runs) {
    j["runs"].push_back({{"variant", run.variant},
                         {"noise", run.noise},
                         {"count", run.count},
                         {"subset", run.subset},
                         {"cell", run.cell},
                         {"repetition", run.repetition},
                         {"seed", run.seed},
                         {"accuracy", run.accuracy},
                         {"error", run.error},
                         {"history_length", run.history_length},
                         {"wall_seconds", run.wall_seconds}});
  }
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : r.aggregates) {
    j["aggregates"].push_back({{"variant", a.variant},
                               {"noise", a.noise},
                               {"count", a.count},
                               {"subset", a.subset},
                               {"runs", a.runs},
                               {"mean_accuracy", a.mean_accuracy},
                               {"std_accuracy", a.std_accuracy},
                               {"best_error", a.best_error},
                               {"best_cell", a.best_cell}});
  }
  return j;
}

inline double parse_real(const std::string& s, std::size_t row, std::size_t col) {
  return parse_cell(s, row, col);
}

inline long long parse_integer(const std::string& s, std::size_t row, std::size_t col) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("expected an integer", row, col);
  return v;
}

inline std::uint64_t parse_unsigned(const std::string& s, std::size_t row, std::size_t col) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("expected an integer", row, col);
  return v;
}

inline ExperimentReport parse_report_csv(std::istream& in) {
  ExperimentReport r;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# experiment: ", 0) == 0) {
      r.experiment = line.substr(14);
      continue;
    }
    if (line.rfind("# config: ", 0) == 0) {
      r.config = line.substr(10);
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kReportColumns) throw FormatError("report: unexpected column header at line " + std::to_string(line_no));
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    for (auto sv : split_fields(line, ',')) f.emplace_back(sv);
    if (f.size() != 17) throw ParseError("report row has " + std::to_string(f.size()) + " fields, expected 17", line_no, 1);
    if (f[0] == "run") {
      RunRecord run;
      run.variant = f[1];
      run.noise = parse_real(f[2], line_no, 3);
      run.count = parse_integer(f[3], line_no, 4);
      run.subset = f[4];
      run.cell = f[5];
      run.repetition = static_cast<int>(parse_integer(f[6], line_no, 7));
      run.seed = parse_unsigned(f[7], line_no, 8);
      run.accuracy = parse_real(f[8], line_no, 9);
      run.error = parse_real(f[9], line_no, 10);
      run.history_length = parse_integer(f[10], line_no, 11);
      run.wall_seconds = parse_real(f[11], line_no, 12);
      r.runs.push_back(std::move(run));
    } else if (f[0] == "aggregate") {
      AggregateRow a;
      a.variant = f[1];
      a.noise = parse_real(f[2], line_no, 3);
      a.count = parse_integer(f[3], line_no, 4);
      a.subset = f[4];
      a.runs = parse_integer(f[12], line_no, 13);
      a.mean_accuracy = parse_real(f[13], line_no, 14);
      a.std_accuracy = parse_real(f[14], line_no, 15);
      a.best_error = parse_real(f[15], line_no, 16);
      a.best_cell = f[16];
      r.aggregates.push_back(std::move(a));
    } else {
      throw ParseError("unknown row type '" + f[0] + "'", line_no, 1);
    }
  }
  if (!header_seen) throw FormatError("report: missing column header");
  return r;
}

inline ExperimentReport parse_report_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config = j.at("config").dump();
  for (const auto& e : j.at("runs")) {
    RunRecord run;
    run.variant = e.at("variant").get<std::string>();
    run.noise = e.at("noise").get<double>();
    run.count = e.at("count").get<Index>();
    run.subset = e.at("subset").get<std::string>();
    run.cell = e.at("cell").get<std::string>();
    run.repetition = e.at("repetition").get<int>();
    run.seed = e.at("seed").get<std::uint64_t>();
    run.accuracy = e.at("accuracy").get<double>();
    run.error = e.at("error").get<double>();
    run.history_length = e.at("history_length").get<Index>();
    run.wall_seconds = e.at("wall_seconds").get<double>();
    r.runs.push_back(std::move(run));
  }
  for (const auto& e : j.at("aggregates")) {
    AggregateRow a;
    a.variant = e.at("variant").get<std::string>();
    a.noise = e.at("noise").get<double>();
    a.count = e.at("count").get<Index>();
    a.subset = e.at("subset").get<std::string>();
    a.runs = e.at("runs").get<Index>();
    a.mean_accuracy = e.at("mean_accuracy").get<double>();
    a.std_accuracy = e.at("std_accuracy").get<double>();
    a.best_error = e.at("best_error").get<double>();
    a.best_cell = e.at("best_cell").get<std::string>();
    r.aggregates.push_back(std::move(a));
  }
  return r;
}

}  // namespace detail

inline std::string format_report(const ExperimentReport& report, ReportFormat format) {
  return format == ReportFormat::Csv ? detail::report_csv(report) : detail::report_json(report).dump(2) + "\n";
}

inline void emit_report(const ExperimentReport& report, const std::string& path, ReportFormat format) {
  const std::string text = format_report(report, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open report file '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing report file '" + path + "'");
}

/// Reads either format; a leading '{' selects the JSON reader.
inline ExperimentReport read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return detail::parse_report_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("report '" + path + "': " + e.what());
    }
  }
  std::istringstream stream(text);
  return detail::parse_report_csv(stream);
}

}  // namespace ssdl
