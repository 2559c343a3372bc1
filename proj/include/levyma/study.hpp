#pragma once

/// Monte Carlo harness: R replications of simulate -> estimate, scaled by
/// sqrt(n) around their theoretical targets, compared with the limit
/// covariances of the asymptotics module.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "levyma/acf.hpp"
#include "levyma/asymptotics.hpp"
#include "levyma/errors.hpp"
#include "levyma/estimate.hpp"
#include "levyma/simulate.hpp"

namespace levyma {

enum class Stat { Mean, GammaStar, RhoStar, GammaHat, RhoHat, DHat, DTilde };

inline const char* to_string(Stat s) {
  static constexpr const char* names[] = {"mean", "gammaStar", "rhoStar", "gammaHat", "rhoHat", "dHat", "dTilde"};
  return names[static_cast<int>(s)];
}

inline Stat stat_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Stat::DTilde); ++i)
    if (s == to_string(static_cast<Stat>(i))) return static_cast<Stat>(i);
  throw ConfigError("unknown statistic '" + s + "'");
}

struct NormalityThresholds {
  double skewness = 0.15;
  double excess_kurtosis = 0.3;
  double ks_distance = 0.05;
  bool operator==(const NormalityThresholds&) const = default;
};

struct StudyConfig {
  SimConfig sim;
  long replications = 2;
  int lags = 1;
  std::vector<Stat> track;
  std::uint64_t base_seed = 1;
  int threads = 1;
  NormalityThresholds thresholds;
  double tol = 1e-10;
  double max_failure_fraction = 0.01;
  bool operator==(const StudyConfig&) const = default;
};

struct NormalityDiagnostics {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks_distance = 0.0;  // sup |F_R - Phi| of the studentised sample
  bool pass = false;
};

struct StatBlock {
  Stat stat = Stat::Mean;
  std::vector<std::string> coords;
  std::vector<double> target;
  double scale = 1.0;                      // sqrt(n) used for this statistic
  std::vector<double> scaled_mean;         // mean of sqrt(n)(stat - target)
  Eigen::MatrixXd empirical_cov;           // sample covariance, divisor R - 1
  std::optional<Eigen::MatrixXd> theoretical_cov;
  std::string theory_note;                 // why the theoretical covariance is absent
  std::optional<Eigen::MatrixXd> relative_error;
  std::vector<NormalityDiagnostics> normality;
};

struct ReplicationFailure {
  long replication = 0;
  std::string kind;
  std::string message;
};

struct StudyRuntime {
  double seconds = 0.0;
  int threads = 1;
  std::string started;
};

struct StudyReport {
  StudyConfig config;
  std::vector<std::string> columns;        // raw per-replication estimates
  std::vector<long> replication_index;
  std::vector<std::vector<double>> rows;
  std::vector<StatBlock> blocks;
  std::vector<ReplicationFailure> failures;
  StudyRuntime runtime;

  const StatBlock& block(Stat s) const {
    for (const auto& b : blocks)
      if (b.stat == s) return b;
    throw ConfigError(std::string("statistic '") + to_string(s) + "' was not tracked");
  }
};

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline NormalityDiagnostics normality(std::vector<double> v, const NormalityThresholds& th) {
  NormalityDiagnostics d;
  const auto n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double c = x - mean;
    m2 += c * c;
    m3 += c * c * c;
    m4 += c * c * c * c;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) {
    d.skewness = d.excess_kurtosis = d.ks_distance = std::numeric_limits<double>::quiet_NaN();
    return d;
  }
  d.skewness = m3 / std::pow(m2, 1.5);
  d.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  const double sd = std::sqrt(m2 * n / (n - 1.0));
  for (double& x : v) x = (x - mean) / sd;
  std::sort(v.begin(), v.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = normal_cdf(v[i]);
    ks = std::max({ks, (i + 1.0) / n - F, F - i / n});
  }
  d.ks_distance = ks;
  d.pass = std::abs(d.skewness) < th.skewness && std::abs(d.excess_kurtosis) < th.excess_kurtosis &&
           d.ks_distance < th.ks_distance;
  return d;
}

inline std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct StatLayout {
  Stat stat;
  std::size_t offset;  // first column in the per-replication row
  std::vector<std::string> coords;
};

}  // namespace detail

/// Checks that every tracked statistic makes sense for the kernel.
inline void validate(const StudyConfig& c) {
  if (c.replications < 2) throw ConfigError("a study needs at least 2 replications");
  if (c.lags < 0) throw ConfigError("lags must be non-negative");
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  if (!(c.max_failure_fraction >= 0.0 && c.max_failure_fraction < 1.0))
    throw ConfigError("maxFailureFraction must lie in [0, 1)");
  if (c.sim.n < c.lags + 3) throw ConfigError("n must exceed the number of lags by at least 3");
  const auto sh = kernel_shape(c.sim.kernel);
  const auto fp = fractional_params(c.sim.kernel);
  for (Stat s : c.track) {
    switch (s) {
      case Stat::Mean:
      case Stat::GammaHat:
      case Stat::RhoHat:
        if (!sh.integrable || !sh.abs_sum_square_integrable)
          throw ConfigError(std::string(to_string(s)) + " is not a valid statistic for the " +
                            family_name(c.sim.kernel) + " kernel: F_Delta is not in L2([0, Delta])");
        break;
      case Stat::RhoStar:
      case Stat::GammaStar:
        break;
      case Stat::DHat:
        if (!fp || fp->differenced) throw ConfigError("dHat needs an undifferenced fractional kernel");
        break;
      case Stat::DTilde:
        if (!fp || fp->absolute) throw ConfigError("dTilde needs a FractionalPlus or differenced kernel");
        break;
    }
    if ((s == Stat::RhoStar || s == Stat::RhoHat) && c.lags < 1) throw ConfigError("rho statistics need lags >= 1");
  }
}

/// Runs the study. Replication r uses the random stream (baseSeed, r), so the
/// report does not depend on the number of threads.
inline StudyReport run_study(const StudyConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  StudyReport rep;
  rep.config = cfg;
  rep.runtime.threads = cfg.threads;
  rep.runtime.started = detail::utc_now();

  const int H = cfg.lags;
  const auto cum = cumulants(cfg.sim.driver);
  const auto fp = fractional_params(cfg.sim.kernel);
  PathSimulator sim(cfg.sim);

  std::vector<detail::StatLayout> layout;
  std::size_t width = 0;
  for (Stat s : cfg.track) {
    detail::StatLayout l{s, width, {}};
    switch (s) {
      case Stat::Mean: l.coords = {"mean"}; break;
      case Stat::GammaStar:
      case Stat::GammaHat:
        for (int h = 0; h <= H; ++h) l.coords.push_back(std::string(to_string(s)) + "[" + std::to_string(h) + "]");
        break;
      case Stat::RhoStar:
      case Stat::RhoHat:
        for (int h = 1; h <= H; ++h) l.coords.push_back(std::string(to_string(s)) + "[" + std::to_string(h) + "]");
        break;
      case Stat::DHat: l.coords = {"dHat"}; break;
      case Stat::DTilde: l.coords = {"dTilde"}; break;
    }
    width += l.coords.size();
    for (const auto& c : l.coords) rep.columns.push_back(c);
    layout.push_back(std::move(l));
  }

  const bool differenced_series = fp && fp->differenced;
  auto replicate = [&](long r) -> std::vector<double> {
    const auto path = sim.simulate(cfg.base_seed, static_cast<std::uint32_t>(r));
    const auto& x = path.values;
    std::vector<double> row;
    row.reserve(width);
    std::optional<AcfTables> star, hat;
    for (Stat s : cfg.track) {
      switch (s) {
        case Stat::Mean: row.push_back(sample_mean(x)); break;
        case Stat::GammaStar:
        case Stat::RhoStar: {
          if (!star) star = acov_star(x, H);
          if (s == Stat::GammaStar) {
            for (double g : star->gamma) row.push_back(g);
          } else {
            if (star->degenerate()) throw DomainError("gamma*(0) = 0");
            for (int h = 1; h <= H; ++h) row.push_back((*star->rho)[h]);
          }
          break;
        }
        case Stat::GammaHat:
        case Stat::RhoHat: {
          if (!hat) hat = acov_hat(x, H);
          if (s == Stat::GammaHat) {
            for (double g : hat->gamma) row.push_back(g);
          } else {
            if (hat->degenerate()) throw DomainError("gamma-hat(0) = 0");
            for (int h = 1; h <= H; ++h) row.push_back((*hat->rho)[h]);
          }
          break;
        }
        case Stat::DHat: row.push_back(hurst_dhat(x).value); break;
        case Stat::DTilde:
          row.push_back(differenced_series ? hurst_dtilde_from_differences(x).value : hurst_dtilde(x).value);
          break;
      }
    }
    return row;
  };

  const long R = cfg.replications;
  std::vector<std::optional<std::vector<double>>> results(static_cast<std::size_t>(R));
  std::vector<std::optional<ReplicationFailure>> failed(static_cast<std::size_t>(R));
  std::atomic<long> next{0};
  std::exception_ptr fatal;
  std::atomic<bool> has_fatal{false};
  auto worker = [&] {
    for (long r = next++; r < R; r = next++) {
      if (has_fatal) return;
      try {
        results[static_cast<std::size_t>(r)] = replicate(r);
      } catch (const Error& e) {
        failed[static_cast<std::size_t>(r)] = ReplicationFailure{r, e.kind(), e.what()};
      } catch (...) {
        if (!has_fatal.exchange(true)) fatal = std::current_exception();
      }
    }
  };
  const int nthreads = static_cast<int>(std::min<long>(cfg.threads, R));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  for (long r = 0; r < R; ++r) {
    if (results[static_cast<std::size_t>(r)]) {
      rep.replication_index.push_back(r);
      rep.rows.push_back(std::move(*results[static_cast<std::size_t>(r)]));
    } else if (failed[static_cast<std::size_t>(r)]) {
      rep.failures.push_back(*failed[static_cast<std::size_t>(r)]);
    }
  }
  if (static_cast<double>(rep.failures.size()) > cfg.max_failure_fraction * static_cast<double>(R))
    throw DomainError("study aborted: " + std::to_string(rep.failures.size()) + " of " + std::to_string(R) +
                      " replications failed (first: " + rep.failures.front().message + ")");
  const auto ok = static_cast<long>(rep.rows.size());
  if (ok < 2) throw DomainError("study aborted: fewer than 2 successful replications");

  // Targets and limit covariances.
  std::optional<AcfModel> acf;
  auto need_acf = [&]() -> const AcfModel& {
    if (!acf) acf = autocov_quadrature(cfg.sim.kernel, cum.sigma2, cfg.sim.delta, H, 1e-3 * cfg.tol);
    return *acf;
  };
  const double N = static_cast<double>(cfg.sim.n);
  for (const auto& l : layout) {
    StatBlock b;
    b.stat = l.stat;
    b.coords = l.coords;
    const auto k = static_cast<Eigen::Index>(l.coords.size());
    auto theory = [&](auto&& fn) {
      try {
        b.theoretical_cov = fn();
      } catch (const Error& e) {
        b.theory_note = std::string(e.kind()) + ": " + e.what();
      }
    };
    const Statistic family = (l.stat == Stat::GammaHat || l.stat == Stat::RhoHat) ? Statistic::Hat : Statistic::Star;
    switch (l.stat) {
      case Stat::Mean:
        b.target = {cfg.sim.mu};
        b.scale = std::sqrt(N);
        theory([&] {
          Eigen::MatrixXd m(1, 1);
          m(0, 0) = mean_asymptotic_variance(cfg.sim.kernel, cfg.sim.delta, cum.sigma2, cfg.tol).variance;
          return m;
        });
        break;
      case Stat::GammaStar:
      case Stat::GammaHat: {
        const auto& a = need_acf();
        const double shift = l.stat == Stat::GammaStar ? cfg.sim.mu * cfg.sim.mu : 0.0;
        for (int h = 0; h <= H; ++h) b.target.push_back(a.gamma[h] + shift);
        b.scale = std::sqrt(l.stat == Stat::GammaStar ? N - H : N);
        if (l.stat == Stat::GammaStar && cfg.sim.mu != 0.0)
          b.theory_note = "limit covariance of gamma* is stated for mu = 0";
        else
          theory([&] { return Eigen::MatrixXd(cov_matrix_V(cfg.sim.kernel, cfg.sim.delta, cum, H, cfg.tol, family).V); });
        break;
      }
      case Stat::RhoStar:
      case Stat::RhoHat: {
        const auto& a = need_acf();
        for (int h = 1; h <= H; ++h) b.target.push_back(a.rho[h]);
        b.scale = std::sqrt(l.stat == Stat::RhoStar ? N - H : N);
        if (l.stat == Stat::RhoStar && cfg.sim.mu != 0.0)
          b.theory_note = "limit covariance of rho* is stated for mu = 0";
        else
          theory([&] { return Eigen::MatrixXd(corr_matrix_W(cfg.sim.kernel, cfg.sim.delta, cum, H, cfg.tol, family).W); });
        break;
      }
      case Stat::DHat:
      case Stat::DTilde: {
        b.target = {fp->d};
        const double used = l.stat == Stat::DHat ? N - 1 : (differenced_series ? N - 1 : N - 2);
        b.scale = std::sqrt(used);
        theory([&] {
          Eigen::MatrixXd m(1, 1);
          if (l.stat == Stat::DHat)
            m(0, 0) = hurst_delta_variance(cfg.sim.kernel, cfg.sim.delta, cum, HurstKind::DHat, cfg.tol);
          else
            m(0, 0) = hurst_delta_variance(cfg.sim.kernel, cfg.sim.delta, cum, HurstKind::DTilde, cfg.tol);
          return m;
        });
        break;
      }
    }
    // sqrt(n)(stat - target) for every successful replication.
    Eigen::MatrixXd Y(ok, k);
    for (long r = 0; r < ok; ++r)
      for (Eigen::Index c = 0; c < k; ++c)
        Y(r, c) = b.scale * (rep.rows[static_cast<std::size_t>(r)][l.offset + static_cast<std::size_t>(c)] - b.target[c]);
    const Eigen::RowVectorXd mean = Y.colwise().mean();
    b.scaled_mean.assign(mean.data(), mean.data() + k);
    const Eigen::MatrixXd C = Y.rowwise() - mean;
    b.empirical_cov = (C.transpose() * C) / static_cast<double>(ok - 1);
    if (b.theoretical_cov) {
      Eigen::MatrixXd rel(k, k);
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) {
          const double t = (*b.theoretical_cov)(i, j);
          const double e = b.empirical_cov(i, j);
          rel(i, j) = t != 0.0 ? (e - t) / std::abs(t) : e - t;
        }
      b.relative_error = rel;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      std::vector<double> v(Y.col(c).data(), Y.col(c).data() + ok);
      b.normality.push_back(detail::normality(std::move(v), cfg.thresholds));
    }
    rep.blocks.push_back(std::move(b));
  }
  rep.runtime.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace levyma
