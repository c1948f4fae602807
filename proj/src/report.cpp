#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "apiscan/error.hpp"
#include "apiscan/eval.hpp"
#include "json.hpp"

namespace apiscan {

namespace {

using nlohmann::json;

json encode_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double decode_number(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(Errc::CorruptModel, "bad number '" + s + "' in report");
  }
  return j.get<double>();
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace

ReportFormat parse_report_format(std::string_view token) {
  if (token == "csv") return ReportFormat::Csv;
  if (token == "text") return ReportFormat::Text;
  throw Error(Errc::UsageError, "unknown report format '" + std::string(token) + "' (csv or text)");
}

std::string report_to_text(const ExperimentReport& report) {
  json j;
  j["protocol"] = report.protocol;
  j["meta"] = report.meta;
  j["repeats"] = report.repeats;
  json summary = json::object();
  for (const auto& [k, v] : report.summary) {
    summary[k] = {{"mean", v.mean}, {"std", v.stddev ? json(*v.stddev) : json(nullptr)}};
  }
  j["summary"] = summary;
  json curves = json::array();
  for (const auto& c : report.curves) {
    json pts = json::array();
    for (const auto& p : c.curve.points) pts.push_back({encode_number(p.threshold), p.fpr, p.tpr});
    curves.push_back({{"repeat", c.repeat}, {"name", c.name}, {"points", pts}});
  }
  j["curves"] = curves;
  j["fpr_grid"] = report.fpr_grid;
  j["mean_tpr"] = report.mean_tpr;
  j["runtime_seconds"] = report.runtime_seconds;
  return j.dump(1) + "\n";
}

ExperimentReport report_from_text(std::string_view text) {
  ExperimentReport r;
  try {
    const auto j = json::parse(text);
    r.protocol = j.at("protocol").get<std::string>();
    r.meta = j.at("meta").get<std::map<std::string, std::string>>();
    r.repeats = j.at("repeats").get<std::vector<std::map<std::string, double>>>();
    for (const auto& [k, v] : j.at("summary").items()) {
      MeanStd m{v.at("mean").get<double>(), std::nullopt};
      if (!v.at("std").is_null()) m.stddev = v.at("std").get<double>();
      r.summary[k] = m;
    }
    for (const auto& c : j.at("curves")) {
      NamedCurve nc{c.at("repeat").get<std::size_t>(), c.at("name").get<std::string>(), {}};
      for (const auto& p : c.at("points")) {
        nc.curve.points.push_back({decode_number(p.at(0)), p.at(1).get<double>(), p.at(2).get<double>()});
      }
      r.curves.push_back(std::move(nc));
    }
    r.fpr_grid = j.at("fpr_grid").get<std::vector<double>>();
    r.mean_tpr = j.at("mean_tpr").get<std::map<std::string, std::vector<double>>>();
    r.runtime_seconds = j.at("runtime_seconds").get<double>();
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptModel, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string roc_points_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "repeat,curve,threshold,fpr,tpr\n";
  for (const auto& c : report.curves) {
    for (const auto& p : c.curve.points) {
      out << c.repeat << ',' << csv_field(c.name) << ',' << fmt(p.threshold) << ',' << fmt(p.fpr) << ','
          << fmt(p.tpr) << '\n';
    }
  }
  return out.str();
}

namespace {

std::string metrics_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "section,key,value,std\n";
  for (const auto& [k, v] : report.meta) out << "meta," << csv_field(k) << ',' << csv_field(v) << ",\n";
  for (std::size_t r = 0; r < report.repeats.size(); ++r) {
    for (const auto& [k, v] : report.repeats[r]) {
      out << "repeat" << r << ',' << csv_field(k) << ',' << fmt(v) << ",\n";
    }
  }
  for (const auto& [k, v] : report.summary) {
    out << "summary," << csv_field(k) << ',' << fmt(v.mean) << ',' << (v.stddev ? fmt(*v.stddev) : "") << '\n';
  }
  for (const auto& [name, tprs] : report.mean_tpr) {
    for (std::size_t g = 0; g < tprs.size() && g < report.fpr_grid.size(); ++g) {
      out << "mean_tpr," << csv_field(name + "@" + fmt(report.fpr_grid[g])) << ',' << fmt(tprs[g]) << ",\n";
    }
  }
  out << "runtime,seconds," << fmt(report.runtime_seconds) << ",\n";
  return out.str();
}

}  // namespace

void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path) {
  if (format == ReportFormat::Text) {
    write_file(path, report_to_text(report));
    return;
  }
  write_file(path, roc_points_csv(report));
  auto metrics = path;
  metrics.replace_filename(path.stem().string() + ".metrics.csv");
  write_file(metrics, metrics_csv(report));
}

}  // namespace apiscan
