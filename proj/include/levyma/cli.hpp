#pragma once

/// Command-line front end:
///   levyma <simulate|acf|asymp|mc|diagnose> --config FILE [--out PATH]
///          [--set key=value]... [--threads N] [--quiet|--verbose]
///
/// The JSON config is layered as built-in defaults < file < --set overrides.
/// Exit codes: 0 success, 1 configuration error, 2 numerical or condition
/// error, 3 I/O error. Errors are reported as one JSON line on stderr.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "levyma/acf.hpp"
#include "levyma/asymptotics.hpp"
#include "levyma/diagnostics.hpp"
#include "levyma/errors.hpp"
#include "levyma/io.hpp"
#include "levyma/simulate.hpp"
#include "levyma/study.hpp"

namespace levyma {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2, kExitIo = 3 };

inline json default_config() {
  return json::parse(R"({
    "sim": {"mu": 0.0, "delta": 1.0, "n": 1000, "refinement": 32, "truncationT": 0.0, "tailTol": 1e-4, "seed": 1},
    "replications": 2,
    "lags": 1,
    "track": [],
    "baseSeed": 1,
    "threads": 1,
    "thresholds": {"skewness": 0.15, "excessKurtosis": 0.3, "ksDistance": 0.05},
    "tol": 1e-10,
    "maxFailureFraction": 0.01,
    "acf": {"maxLag": 10, "tol": 1e-10},
    "asymp": {"lags": 1, "statistic": "star", "tol": 1e-10},
    "diagnose": {"budgetK": 1024}
  })");
}

/// Applies "a.b.c=value"; the value is parsed as JSON when possible and kept
/// as a string otherwise.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
  (*node)[parts.back()] = value;
}

/// defaults < file < overrides.
inline json merge_config(const std::optional<json>& file, const std::vector<std::string>& overrides) {
  json cfg = default_config();
  if (file) {
    if (!file->is_object()) throw ConfigError("config file must hold a JSON object");
    cfg.merge_patch(*file);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

namespace detail {

inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  return kExitNumerical;
}

inline void report_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}, {"exitCode", code}}.dump() << "\n";
}

inline void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_text_file(path, text);
}

inline int threads_default() {
  if (const char* env = std::getenv("LEVYMA_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("LEVYMA_THREADS must be a positive integer, got '") + env + "'");
  }
  return 0;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct CliContext {
  json cfg;
  std::string out_path;
  int threads = 0;
  int verbosity = 1;  // 0 quiet, 1 normal, 2 verbose
};

inline int cmd_simulate(const CliContext& c, std::ostream& out, std::ostream& log) {
  const auto sim = c.cfg.at("sim").get<SimConfig>();
  PathSimulator ps(sim);
  const auto series = ps.simulate();
  if (c.out_path.empty() || c.out_path == "-") {
    std::string text = "index,value\n";
    for (std::size_t i = 0; i < series.values.size(); ++i)
      text += std::to_string(i + 1) + "," + format_double(series.values[i]) + "\n";
    out << text;
  } else {
    write_series_csv(c.out_path, series, sim);
  }
  if (c.verbosity >= 2)
    log << "window T=" << ps.plan().t_pos << " tail mass " << ps.plan().tail_mass << (ps.plan().capped ? " (capped)" : "")
        << ", " << ps.plan().increments << " increments, "
        << (ps.plan().method == ConvMethod::Fft ? "fft" : "direct") << " convolution\n";
  return kExitOk;
}

inline int cmd_acf(const CliContext& c, std::ostream& out, std::ostream&) {
  const auto sim = c.cfg.at("sim").get<SimConfig>();
  const auto& a = c.cfg.at("acf");
  const int max_lag = a.at("maxLag").get<int>();
  const double tol = a.at("tol").get<double>();
  const auto cum = cumulants(sim.driver);
  const auto model = autocov_quadrature(sim.kernel, cum.sigma2, sim.delta, max_lag, tol);
  std::optional<AcfModel> closed;
  if (fractional_params(sim.kernel)) closed = autocov_fractional_model(sim.kernel, cum.sigma2, sim.delta, max_lag, tol);
  if (c.out_path.empty() || c.out_path == "-") {
    out << (closed ? "lag,gamma,rho,gamma_closed,rho_closed\n" : "lag,gamma,rho\n");
    for (std::size_t h = 0; h < model.gamma.size(); ++h) {
      out << h << "," << format_double(model.gamma[h]) << "," << format_double(model.rho[h]);
      if (closed) out << "," << format_double(closed->gamma[h]) << "," << format_double(closed->rho[h]);
      out << "\n";
    }
  } else {
    write_acf_csv(c.out_path, model, closed ? &*closed : nullptr);
  }
  return kExitOk;
}

inline int cmd_asymp(const CliContext& c, std::ostream& out, std::ostream&) {
  const auto sim = c.cfg.at("sim").get<SimConfig>();
  const auto& a = c.cfg.at("asymp");
  const int lags = a.at("lags").get<int>();
  const double tol = a.at("tol").get<double>();
  const auto stat_name = a.at("statistic").get<std::string>();
  Statistic stat;
  if (stat_name == "star")
    stat = Statistic::Star;
  else if (stat_name == "hat")
    stat = Statistic::Hat;
  else
    throw ConfigError("asymp.statistic must be 'star' or 'hat'");
  const auto cum = cumulants(sim.driver);
  const auto cov = lags >= 1 ? corr_matrix_W(sim.kernel, sim.delta, cum, lags, tol, stat)
                             : cov_matrix_V(sim.kernel, sim.delta, cum, lags, tol, stat);
  json j = asymptotic_json(cov);
  j["statistic"] = stat_name;
  j["cumulants"] = {{"sigma2", cum.sigma2}, {"eta", cum.eta}, {"fourthCumulant", cum.fourth_cumulant}};
  emit(out, c.out_path, j.dump(2) + "\n");
  return kExitOk;
}

inline int cmd_mc(const CliContext& c, std::ostream& out, std::ostream& log) {
  auto cfg = c.cfg.get<StudyConfig>();
  if (c.threads > 0) cfg.threads = c.threads;
  const auto report = run_study(cfg);
  const bool csv = ends_with(c.out_path, ".csv");
  if (c.out_path.empty() || c.out_path == "-")
    out << report_json(report).dump(2) << "\n";
  else
    export_report(report, c.out_path, csv ? ReportFormat::Csv : ReportFormat::Json);
  if (c.verbosity >= 1 && !(c.out_path.empty() || c.out_path == "-")) {
    for (const auto& b : report.blocks) {
      for (std::size_t i = 0; i < b.coords.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        log << b.coords[i] << ": empirical var " << format_double(b.empirical_cov(k, k));
        if (b.theoretical_cov) log << ", theoretical " << format_double((*b.theoretical_cov)(k, k));
        log << "\n";
      }
    }
  }
  return kExitOk;
}

inline int cmd_diagnose(const CliContext& c, std::ostream& out, std::ostream&) {
  const auto sim = c.cfg.at("sim").get<SimConfig>();
  const long budget = c.cfg.at("diagnose").at("budgetK").get<long>();
  const auto rep = summability_diagnostics(sim.kernel, sim.delta, budget);
  emit(out, c.out_path, summability_json(rep).dump(2) + "\n");
  return kExitOk;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Simulation and inference for Levy-driven moving averages", "levyma"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_path;
  std::vector<std::string> overrides;
  int threads = 0;
  bool quiet = false;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_path, "output file (stdout when omitted)");
  app.add_option("--set", overrides, "override a config entry, e.g. --set sim.n=4000")->take_all();
  app.add_option("--threads", threads, "worker threads (default: LEVYMA_THREADS or the config)");
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.add_flag("--verbose", verbose, "extra progress output");
  app.fallthrough();
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "simulate one lattice path (CSV index,value)"},
      {"acf", "theoretical autocovariances (CSV lag,gamma,rho)"},
      {"asymp", "asymptotic covariance matrices V and W (JSON)"},
      {"mc", "Monte Carlo study (JSON or CSV report)"},
      {"diagnose", "summability diagnostics (JSON)"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    detail::report_error(err, "config", e.what(), kExitConfig);
    return kExitConfig;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    detail::CliContext ctx;
    ctx.out_path = out_path;
    ctx.verbosity = quiet ? 0 : (verbose ? 2 : 1);
    if (threads < 0) throw ConfigError("--threads must be positive");
    ctx.threads = threads > 0 ? threads : detail::threads_default();
    std::optional<json> file;
    if (!config_path.empty()) file = read_json_file(config_path);
    ctx.cfg = merge_config(file, overrides);
    if (!ctx.cfg.contains("sim") || !ctx.cfg["sim"].contains("kernel") || !ctx.cfg["sim"].contains("driver"))
      throw ConfigError("config must define sim.kernel and sim.driver");
    if (cmd == "simulate") return detail::cmd_simulate(ctx, out, err);
    if (cmd == "acf") return detail::cmd_acf(ctx, out, err);
    if (cmd == "asymp") return detail::cmd_asymp(ctx, out, err);
    if (cmd == "mc") return detail::cmd_mc(ctx, out, err);
    return detail::cmd_diagnose(ctx, out, err);
  } catch (const Error& e) {
    const int code = detail::exit_code_for(e);
    detail::report_error(err, e.kind(), e.what(), code);
    return code;
  } catch (const json::exception& e) {
    detail::report_error(err, "config", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const std::exception& e) {
    detail::report_error(err, "internal", e.what(), kExitNumerical);
    return kExitNumerical;
  }
}

}  // namespace levyma
