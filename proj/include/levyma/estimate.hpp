#pragma once

/// Sample statistics of a lattice series: mean, the centred (hat) and
/// uncentred (star) autocovariance families, and the two Hurst estimators
/// built on lag-1 autocorrelations.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "levyma/errors.hpp"

namespace levyma {

/// One simulated (or observed) path X_Delta, ..., X_{N Delta}.
struct SampledSeries {
  double delta = 1.0;
  double mu = 0.0;
  std::vector<double> values;
  std::string provenance;  // digest of the generating configuration, if any
};

/// gamma[h] for h = 0..H; rho[h] = gamma[h] / gamma[0] (so rho[0] = 1), empty
/// when gamma[0] = 0.
struct AcfTables {
  std::vector<double> gamma;
  std::optional<std::vector<double>> rho;
  std::size_t n = 0;  // divisor used

  bool degenerate() const { return !rho.has_value(); }
};

inline double sample_mean(std::span<const double> x) {
  if (x.empty()) throw DomainError("sample mean of an empty series");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

namespace detail {

inline void finish_rho(AcfTables& t) {
  if (t.gamma[0] == 0.0) return;
  std::vector<double> r(t.gamma.size());
  for (std::size_t h = 0; h < r.size(); ++h) r[h] = t.gamma[h] / t.gamma[0];
  t.rho = std::move(r);
}

}  // namespace detail

/// gamma_hat(h) = n^-1 sum_{i=1}^{n-h} (X_i - mean)(X_{i+h} - mean), 0 <= H < n.
inline AcfTables acov_hat(std::span<const double> x, int H) {
  const std::size_t n = x.size();
  if (H < 0 || static_cast<std::size_t>(H) >= n) throw DomainError("acov_hat needs 0 <= H < n");
  const double m = sample_mean(x);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = x[i] - m;
  AcfTables t;
  t.n = n;
  t.gamma.resize(static_cast<std::size_t>(H) + 1);
  for (int h = 0; h <= H; ++h) {
    double s = 0.0;
    for (std::size_t i = 0; i + h < n; ++i) s += c[i] * c[i + h];
    t.gamma[h] = s / static_cast<double>(n);
  }
  detail::finish_rho(t);
  return t;
}

/// gamma_star(h) = n^-1 sum_{i=1}^{n} X_i X_{i+h} with n = N - H for every lag.
inline AcfTables acov_star(std::span<const double> x, int H) {
  if (H < 0 || x.size() < static_cast<std::size_t>(H) + 1) throw DomainError("acov_star needs N >= H + 1");
  const std::size_t n = x.size() - static_cast<std::size_t>(H);
  AcfTables t;
  t.n = n;
  t.gamma.resize(static_cast<std::size_t>(H) + 1);
  for (int h = 0; h <= H; ++h) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i + h];
    t.gamma[h] = s / static_cast<double>(n);
  }
  detail::finish_rho(t);
  return t;
}

struct EstimateSet {
  std::size_t n = 0;       // series length N (divisor of the hat family)
  std::size_t n_star = 0;  // N - H (divisor of the star family)
  double delta = 1.0;
  double mean = 0.0;
  AcfTables hat;
  AcfTables star;
};

inline EstimateSet estimate_all(const SampledSeries& s, int H) {
  EstimateSet e;
  e.n = s.values.size();
  e.delta = s.delta;
  e.mean = sample_mean(s.values);
  e.hat = acov_hat(s.values, H);
  e.star = acov_star(s.values, H);
  e.n_star = e.star.n;
  return e;
}

// ---------------------------------------------------------------------------
// Hurst estimators

/// d = log(rho + 1) / (2 log 2), the inverse of rho(1) = 2^(2d) - 1.
inline double dhat_from_rho(double rho1) {
  if (!(rho1 > -1.0) || !std::isfinite(rho1))
    throw DomainError("d-hat needs rho*(1) > -1, got " + std::to_string(rho1));
  return std::log(rho1 + 1.0) / (2.0 * std::log(2.0));
}

/// Lag-1 autocorrelation of the differenced fractional noise,
/// (-3^(2d+1) + 4 * 2^(2d+1) - 7) / (8 - 2^(2d+2)), written in terms of
/// x = 2d - 1 so that it stays accurate as d approaches 1/2.
inline double phi(double d) {
  if (!(d > 0.0 && d < 0.5)) throw DomainError("phi needs d in (0, 1/2)");
  const double x = 2.0 * d - 1.0;
  const double l2 = std::log(2.0);
  const double l3 = std::log(3.0);
  return (-9.0 * std::expm1(x * l3) + 16.0 * std::expm1(x * l2)) / (-8.0 * std::expm1(x * l2));
}

/// Limits of phi at the ends of (0, 1/2).
inline double phi_lower_limit() { return -0.5; }
inline double phi_upper_limit() {
  const double l2 = std::log(2.0);
  return (-9.0 * std::log(3.0) + 16.0 * l2) / (-8.0 * l2);
}

/// Inverse of phi by bisection to |delta d| <= 1e-12.
inline double phi_inverse(double y) {
  if (!(y > phi_lower_limit() && y < phi_upper_limit()))
    throw DomainError("phi inverse: " + std::to_string(y) + " lies outside (" + std::to_string(phi_lower_limit()) +
                      ", " + std::to_string(phi_upper_limit()) + ")");
  double lo = 0.0;
  double hi = 0.5;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (phi(mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double phi_derivative(double d, double step = 1e-6) {
  return (phi(d + step) - phi(d - step)) / (2.0 * step);
}

enum class HurstMethod { DHat, DTilde };

inline const char* to_string(HurstMethod m) { return m == HurstMethod::DHat ? "dHat" : "dTilde"; }

struct HurstEstimate {
  double value = 0.0;
  double rho_used = 0.0;  // rho*(1) of the series (d-hat) or of its differences (d-tilde)
  HurstMethod method = HurstMethod::DHat;
};

inline HurstEstimate hurst_dhat(std::span<const double> x) {
  const auto t = acov_star(x, 1);
  if (t.degenerate()) throw DomainError("d-hat: gamma*(0) = 0");
  return {dhat_from_rho((*t.rho)[1]), (*t.rho)[1], HurstMethod::DHat};
}

inline std::vector<double> difference(std::span<const double> x) {
  std::vector<double> z;
  if (x.size() < 2) return z;
  z.reserve(x.size() - 1);
  for (std::size_t i = 1; i < x.size(); ++i) z.push_back(x[i] - x[i - 1]);
  return z;
}

/// d-tilde from an already differenced series Z.
inline HurstEstimate hurst_dtilde_from_differences(std::span<const double> z) {
  const auto t = acov_star(z, 1);
  if (t.degenerate()) throw DomainError("d-tilde: gamma*_Z(0) = 0");
  return {phi_inverse((*t.rho)[1]), (*t.rho)[1], HurstMethod::DTilde};
}

inline HurstEstimate hurst_dtilde(std::span<const double> x) {
  if (x.size() < 3) throw DomainError("d-tilde needs at least 3 observations");
  const auto z = difference(x);
  return hurst_dtilde_from_differences(z);
}

}  // namespace levyma
