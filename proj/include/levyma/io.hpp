#pragma once

/// File formats: CSV for series and autocovariance tables, JSON for
/// configurations and reports. Every writer has a matching reader.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "levyma/acf.hpp"
#include "levyma/asymptotics.hpp"
#include "levyma/diagnostics.hpp"
#include "levyma/errors.hpp"
#include "levyma/estimate.hpp"
#include "levyma/simulate.hpp"
#include "levyma/study.hpp"

namespace levyma {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline json read_json_file(const std::string& path) {
  const auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw IoError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw IoError("not a number: '" + s + "'");
  return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

/// JSON has no NaN or infinity; they travel as null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double num(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto r = static_cast<Eigen::Index>(j.size());
  const auto c = r ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != c) throw IoError("ragged matrix in JSON");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = num(j[i][k]);
  }
  return m;
}

inline json vector_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline std::vector<double> vector_from_json(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(num(x));
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SampledSeries: CSV (index,value) plus a JSON sidecar <path>.json

inline void write_series_csv(const std::string& path, const SampledSeries& s,
                             const std::optional<SimConfig>& cfg = std::nullopt) {
  std::string text = "index,value\n";
  for (std::size_t i = 0; i < s.values.size(); ++i) text += std::to_string(i + 1) + "," + format_double(s.values[i]) + "\n";
  write_text_file(path, text);
  json side = {{"delta", s.delta}, {"mu", s.mu}, {"n", s.values.size()}, {"digest", s.provenance}};
  if (cfg) side["config"] = *cfg;
  write_json_file(path + ".json", side);
}

inline SampledSeries read_series_csv(const std::string& path) {
  const auto rows = detail::read_csv(path);
  if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "index" || rows[0][1] != "value")
    throw IoError("'" + path + "' is not a series CSV (expected header index,value)");
  SampledSeries s;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw IoError("malformed row " + std::to_string(r) + " in '" + path + "'");
    s.values.push_back(parse_double(rows[r][1]));
  }
  if (std::filesystem::exists(path + ".json")) {
    const auto side = read_json_file(path + ".json");
    s.delta = side.value("delta", 1.0);
    s.mu = side.value("mu", 0.0);
    s.provenance = side.value("digest", std::string{});
  }
  return s;
}

// ---------------------------------------------------------------------------
// AcfModel: CSV lag,gamma,rho (+ closed-form columns for fractional kernels)

inline void write_acf_csv(const std::string& path, const AcfModel& m, const AcfModel* closed = nullptr) {
  std::string text = closed ? "lag,gamma,rho,gamma_closed,rho_closed\n" : "lag,gamma,rho\n";
  for (std::size_t h = 0; h < m.gamma.size(); ++h) {
    text += std::to_string(h) + "," + format_double(m.gamma[h]) + "," + format_double(m.rho[h]);
    if (closed) text += "," + format_double(closed->gamma[h]) + "," + format_double(closed->rho[h]);
    text += "\n";
  }
  write_text_file(path, text);
}

inline AcfModel read_acf_csv(const std::string& path) {
  const auto rows = detail::read_csv(path);
  if (rows.empty() || rows[0].size() < 3 || rows[0][0] != "lag" || rows[0][1] != "gamma" || rows[0][2] != "rho")
    throw IoError("'" + path + "' is not an autocovariance CSV (expected header lag,gamma,rho)");
  AcfModel m;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw IoError("malformed row " + std::to_string(r) + " in '" + path + "'");
    m.gamma.push_back(parse_double(rows[r][1]));
    m.rho.push_back(parse_double(rows[r][2]));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Estimates

inline json estimates_json(const EstimateSet& e) {
  auto tables = [](const AcfTables& t) {
    json j = {{"n", t.n}, {"gamma", detail::vector_json(t.gamma)}};
    j["rho"] = t.rho ? detail::vector_json(*t.rho) : json(nullptr);
    return j;
  };
  return {{"n", e.n}, {"delta", e.delta}, {"mean", detail::num(e.mean)}, {"hat", tables(e.hat)}, {"star", tables(e.star)}};
}

inline std::string estimates_csv(const EstimateSet& e) {
  std::string text = "lag,gammaHat,rhoHat,gammaStar,rhoStar\n";
  for (std::size_t h = 0; h < e.hat.gamma.size(); ++h) {
    text += std::to_string(h) + "," + format_double(e.hat.gamma[h]) + "," +
            (e.hat.rho ? format_double((*e.hat.rho)[h]) : "") + "," + format_double(e.star.gamma[h]) + "," +
            (e.star.rho ? format_double((*e.star.rho)[h]) : "") + "\n";
  }
  return text;
}

inline json hurst_json(const HurstEstimate& h) {
  return {{"method", to_string(h.method)}, {"value", detail::num(h.value)}, {"rhoUsed", detail::num(h.rho_used)}};
}

// ---------------------------------------------------------------------------
// Asymptotics and diagnostics

inline json asymptotic_json(const AsymptoticCov& a) {
  json j = {{"h", a.h},
            {"gamma0", a.gamma0},
            {"rho", detail::vector_json(a.rho)},
            {"V", detail::matrix_json(a.V)},
            {"W", detail::matrix_json(a.W)},
            {"WBartlett", detail::matrix_json(a.WBartlett)},
            {"WCorrection", detail::matrix_json(a.WCorrection)},
            {"WQuadratic", detail::matrix_json(a.WQuadratic)}};
  j["truncationReport"] = {{"ksumExplicitTerms", a.truncation.ksum_explicit_terms},
                           {"ksumTailBound", a.truncation.ksum_tail_bound},
                           {"acfQuadError", a.truncation.acf_quad_error},
                           {"foldTruncation", a.truncation.fold_truncation},
                           {"integralError", a.truncation.integral_error}};
  return j;
}

inline AsymptoticCov asymptotic_from_json(const json& j) {
  AsymptoticCov a;
  a.h = j.at("h").get<int>();
  a.gamma0 = j.at("gamma0").get<double>();
  a.rho = detail::vector_from_json(j.at("rho"));
  a.V = detail::matrix_from_json(j.at("V"));
  a.W = detail::matrix_from_json(j.at("W"));
  a.WBartlett = detail::matrix_from_json(j.at("WBartlett"));
  a.WCorrection = detail::matrix_from_json(j.at("WCorrection"));
  a.WQuadratic = detail::matrix_from_json(j.at("WQuadratic"));
  const auto& t = j.at("truncationReport");
  a.truncation.ksum_explicit_terms = t.at("ksumExplicitTerms").get<long>();
  a.truncation.ksum_tail_bound = t.at("ksumTailBound").get<double>();
  a.truncation.acf_quad_error = t.at("acfQuadError").get<double>();
  a.truncation.fold_truncation = t.at("foldTruncation").get<double>();
  a.truncation.integral_error = t.at("integralError").get<double>();
  return a;
}

inline json summability_json(const SummabilityReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    json g = std::isinf(e.growth_exponent) ? json("inf") : detail::num(e.growth_exponent);
    entries.push_back({{"name", e.name},
                       {"cutoffs", e.cutoffs},
                       {"partial", detail::vector_json(e.partial)},
                       {"growthExponent", g},
                       {"flag", to_string(e.flag)}});
  }
  return {{"delta", r.delta}, {"budgetK", r.budget}, {"entries", entries}};
}

// ---------------------------------------------------------------------------
// Study configuration and report

inline void to_json(json& j, const StudyConfig& c) {
  json track = json::array();
  for (Stat s : c.track) track.push_back(to_string(s));
  j = {{"sim", c.sim},
       {"replications", c.replications},
       {"lags", c.lags},
       {"track", track},
       {"baseSeed", c.base_seed},
       {"threads", c.threads},
       {"thresholds",
        {{"skewness", c.thresholds.skewness},
         {"excessKurtosis", c.thresholds.excess_kurtosis},
         {"ksDistance", c.thresholds.ks_distance}}},
       {"tol", c.tol},
       {"maxFailureFraction", c.max_failure_fraction}};
}

inline void from_json(const json& j, StudyConfig& c) {
  c = StudyConfig{};
  c.sim = j.at("sim").get<SimConfig>();
  c.replications = j.value("replications", 2L);
  c.lags = j.value("lags", 1);
  if (j.contains("track"))
    for (const auto& s : j.at("track")) c.track.push_back(stat_from_string(s.get<std::string>()));
  c.base_seed = j.value("baseSeed", std::uint64_t{1});
  c.threads = j.value("threads", 1);
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    c.thresholds.skewness = t.value("skewness", c.thresholds.skewness);
    c.thresholds.excess_kurtosis = t.value("excessKurtosis", c.thresholds.excess_kurtosis);
    c.thresholds.ks_distance = t.value("ksDistance", c.thresholds.ks_distance);
  }
  c.tol = j.value("tol", 1e-10);
  c.max_failure_fraction = j.value("maxFailureFraction", 0.01);
}

/// Full report. Runtime metadata lives under "runtime" only, so two runs of
/// the same configuration differ in that member alone.
inline json report_json(const StudyReport& r) {
  json blocks = json::array();
  for (const auto& b : r.blocks) {
    json norm = json::array();
    for (const auto& d : b.normality)
      norm.push_back({{"skewness", detail::num(d.skewness)},
                      {"excessKurtosis", detail::num(d.excess_kurtosis)},
                      {"ksDistance", detail::num(d.ks_distance)},
                      {"pass", d.pass}});
    blocks.push_back({{"statistic", to_string(b.stat)},
                      {"coords", b.coords},
                      {"target", detail::vector_json(b.target)},
                      {"scale", b.scale},
                      {"scaledMean", detail::vector_json(b.scaled_mean)},
                      {"empiricalCov", detail::matrix_json(b.empirical_cov)},
                      {"theoreticalCov", b.theoretical_cov ? detail::matrix_json(*b.theoretical_cov) : json(nullptr)},
                      {"theoryNote", b.theory_note},
                      {"relativeError", b.relative_error ? detail::matrix_json(*b.relative_error) : json(nullptr)},
                      {"normality", norm}});
  }
  json rows = json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    json row = json::array({r.replication_index[i]});
    for (double v : r.rows[i]) row.push_back(detail::num(v));
    rows.push_back(std::move(row));
  }
  json failures = json::array();
  for (const auto& f : r.failures)
    failures.push_back({{"replication", f.replication}, {"kind", f.kind}, {"message", f.message}});
  return {{"config", r.config},
          {"perReplication", {{"columns", r.columns}, {"rows", rows}}},
          {"statistics", blocks},
          {"failures", failures},
          {"runtime", {{"seconds", r.runtime.seconds}, {"threads", r.runtime.threads}, {"started", r.runtime.started}}}};
}

inline StudyReport report_from_json(const json& j) {
  StudyReport r;
  r.config = j.at("config").get<StudyConfig>();
  r.columns = j.at("perReplication").at("columns").get<std::vector<std::string>>();
  for (const auto& row : j.at("perReplication").at("rows")) {
    r.replication_index.push_back(row.at(0).get<long>());
    std::vector<double> v;
    for (std::size_t k = 1; k < row.size(); ++k) v.push_back(detail::num(row[k]));
    r.rows.push_back(std::move(v));
  }
  for (const auto& b : j.at("statistics")) {
    StatBlock s;
    s.stat = stat_from_string(b.at("statistic").get<std::string>());
    s.coords = b.at("coords").get<std::vector<std::string>>();
    s.target = detail::vector_from_json(b.at("target"));
    s.scale = b.at("scale").get<double>();
    s.scaled_mean = detail::vector_from_json(b.at("scaledMean"));
    s.empirical_cov = detail::matrix_from_json(b.at("empiricalCov"));
    if (!b.at("theoreticalCov").is_null()) s.theoretical_cov = detail::matrix_from_json(b.at("theoreticalCov"));
    s.theory_note = b.at("theoryNote").get<std::string>();
    if (!b.at("relativeError").is_null()) s.relative_error = detail::matrix_from_json(b.at("relativeError"));
    for (const auto& d : b.at("normality"))
      s.normality.push_back({detail::num(d.at("skewness")), detail::num(d.at("excessKurtosis")),
                             detail::num(d.at("ksDistance")), d.at("pass").get<bool>()});
    r.blocks.push_back(std::move(s));
  }
  for (const auto& f : j.at("failures"))
    r.failures.push_back({f.at("replication").get<long>(), f.at("kind").get<std::string>(),
                          f.at("message").get<std::string>()});
  const auto& rt = j.at("runtime");
  r.runtime.seconds = rt.at("seconds").get<double>();
  r.runtime.threads = rt.at("threads").get<int>();
  r.runtime.started = rt.at("started").get<std::string>();
  return r;
}

/// CSV: a header and one row per successful replication, followed by a
/// summary block (one row per covariance entry) introduced by its own header.
inline std::string report_csv(const StudyReport& r) {
  std::string text = "replication";
  for (const auto& c : r.columns) text += "," + c;
  text += "\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    text += std::to_string(r.replication_index[i]);
    for (double v : r.rows[i]) text += "," + format_double(v);
    text += "\n";
  }
  text += "summary,statistic,row,col,empiricalCov,theoreticalCov,relativeError\n";
  for (const auto& b : r.blocks)
    for (Eigen::Index i = 0; i < b.empirical_cov.rows(); ++i)
      for (Eigen::Index k = 0; k < b.empirical_cov.cols(); ++k) {
        text += std::string("summary,") + to_string(b.stat) + "," + b.coords[i] + "," + b.coords[k] + "," +
                format_double(b.empirical_cov(i, k)) + "," +
                (b.theoretical_cov ? format_double((*b.theoretical_cov)(i, k)) : "") + "," +
                (b.relative_error ? format_double((*b.relative_error)(i, k)) : "") + "\n";
      }
  return text;
}

enum class ReportFormat { Json, Csv };

inline void export_report(const StudyReport& r, const std::string& path, ReportFormat fmt) {
  if (fmt == ReportFormat::Json)
    write_json_file(path, report_json(r));
  else
    write_text_file(path, report_csv(r));
}

inline StudyReport read_report(const std::string& path) { return report_from_json(read_json_file(path)); }

}  // namespace levyma
