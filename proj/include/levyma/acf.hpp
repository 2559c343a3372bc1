#pragma once

/// Theoretical autocovariances gamma(h Delta) = sigma^2 \int f(s) f(s + h Delta) ds
/// by adaptive quadrature, and the closed-form shape of fractional Lévy noise.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "levyma/errors.hpp"
#include "levyma/kernels.hpp"
#include "levyma/quadrature.hpp"

namespace levyma {

enum class AcfMethod { Quadrature, FractionalClosedForm };

inline const char* to_string(AcfMethod m) {
  return m == AcfMethod::Quadrature ? "Quadrature" : "FractionalClosedForm";
}

struct AcfModel {
  double delta = 1.0;
  std::vector<double> gamma;  // h = 0..maxLag
  std::vector<double> rho;
  AcfMethod method = AcfMethod::Quadrature;
  double quad_error = 0.0;  // largest per-lag absolute error estimate

  int max_lag() const { return static_cast<int>(gamma.size()) - 1; }
};

namespace detail {

inline constexpr int kCounterexampleExplicit = 64;

/// sum_{j >= 0} term(j) for a smooth term decaying like j^-decay.
template <class Term>
QuadResult counterexample_sum(Term&& term, double decay, double tol) {
  QuadResult out;
  for (int j = 0; j < kCounterexampleExplicit; ++j) out.value += term(static_cast<double>(j));
  QuadOptions opt;
  opt.tol = tol;
  const auto tail = euler_maclaurin_tail(term, static_cast<double>(kCounterexampleExplicit), decay, opt);
  out.value += tail.value;
  out.error = tail.error;
  return out;
}

inline int integer_lag(double tau) {
  const double r = std::round(tau);
  if (std::abs(tau - r) > 1e-9) throw ConfigError("the counterexample kernel is supported only at integer lags");
  return static_cast<int>(r);
}

/// \int over R of `integrand`, which vanishes outside [lo, hi], is smooth
/// between consecutive `breaks` and decays like |t|^-decay beyond the
/// outermost breaks on infinite sides.
template <class F>
QuadResult integrate_line(F&& integrand, std::vector<double> breaks, double lo, double hi, double decay_r,
                          double decay_l, double tol) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  QuadResult out;
  const bool right_tail = !std::isfinite(hi);
  const bool left_tail = !std::isfinite(lo);
  const double parts = 1.0 + (right_tail ? 1.0 : 0.0) + (left_tail ? 1.0 : 0.0);
  QuadOptions opt;
  opt.tol = tol / parts;
  if (breaks.size() >= 2) out += integrate(integrand, std::span<const double>(breaks), opt);
  if (right_tail) out += integrate_to_infinity(integrand, breaks.back(), decay_r, std::max(1.0, std::abs(breaks.back())), opt);
  if (left_tail) {
    auto mirrored = [&](double x) { return integrand(-x); };
    const double a = -breaks.front();
    out += integrate_to_infinity(mirrored, a, decay_l, std::max(1.0, std::abs(a)), opt);
  }
  return out;
}

}  // namespace detail

/// \int f(t) f(t + tau) dt, or \int |f(t) f(t + tau)| dt when `absolute`.
inline QuadResult kernel_product_integral(const KernelSpec& spec, double tau, bool absolute, double tol) {
  const auto sh = kernel_shape(spec);
  if (sh.lattice_only) {
    // On [j, j + 1) the kernel is c_j (t - j)^j, so the integral is a series in j.
    const int h = std::abs(detail::integer_lag(tau));
    auto term = [h](double j) {
      return counterexample_coefficient(j) * counterexample_coefficient(j + h) / (2.0 * j + h + 1.0);
    };
    return detail::counterexample_sum(term, 2.0, tol);
  }
  const double lo = std::max(sh.lo, sh.lo - tau);
  const double hi = std::min(sh.hi, sh.hi - tau);
  if (!(lo < hi)) return {};
  std::vector<double> breaks;
  auto keep = [&](double x) {
    if (x >= lo && x <= hi) breaks.push_back(x);
  };
  for (double k : sh.kinks) {
    keep(k);
    keep(k - tau);
  }
  if (std::isfinite(lo)) breaks.push_back(lo);
  if (std::isfinite(hi)) breaks.push_back(hi);
  if (breaks.empty()) breaks.push_back(0.0);
  if (!std::isfinite(hi)) {
    const double far = std::max({*std::max_element(breaks.begin(), breaks.end()), sh.right->start,
                                 sh.right->start - tau});
    breaks.push_back(far);
  }
  if (!std::isfinite(lo)) {
    const double far = std::min({*std::min_element(breaks.begin(), breaks.end()), -sh.left->start,
                                 -sh.left->start - tau});
    breaks.push_back(far);
  }
  auto integrand = [&](double t) {
    const double v = eval_kernel(spec, t) * eval_kernel(spec, t + tau);
    return absolute ? std::abs(v) : v;
  };
  const double decay_r = sh.right ? 2.0 * sh.right->exponent : 0.0;
  const double decay_l = sh.left ? 2.0 * sh.left->exponent : 0.0;
  return detail::integrate_line(integrand, std::move(breaks), lo, hi, decay_r, decay_l, tol);
}

/// \int f(t)^power dt for power >= 2.
inline QuadResult kernel_power_integral(const KernelSpec& spec, int power, double tol) {
  if (power < 2) throw ConfigError("kernel power integral needs power >= 2");
  const auto sh = kernel_shape(spec);
  if (sh.lattice_only) {
    auto term = [power](double j) { return std::pow(counterexample_coefficient(j), power) / (power * j + 1.0); };
    return detail::counterexample_sum(term, 0.5 * power + 1.0, tol);
  }
  std::vector<double> breaks = sh.kinks;
  if (!std::isfinite(sh.hi)) breaks.push_back(std::max(breaks.back(), sh.right->start));
  if (!std::isfinite(sh.lo)) breaks.push_back(std::min(breaks.front(), -sh.left->start));
  auto integrand = [&](double t) { return std::pow(eval_kernel(spec, t), power); };
  const double decay_r = sh.right ? power * sh.right->exponent : 0.0;
  const double decay_l = sh.left ? power * sh.left->exponent : 0.0;
  return detail::integrate_line(integrand, std::move(breaks), sh.lo, sh.hi, decay_r, decay_l, tol);
}

/// gamma(h Delta) for h = 0..maxLag by quadrature; `tol` bounds the absolute
/// error of every lag.
inline AcfModel autocov_quadrature(const KernelSpec& spec, double sigma2, double Delta, int max_lag, double tol) {
  if (max_lag < 0) throw ConfigError("maxLag must be non-negative");
  if (!(sigma2 > 0.0)) throw ConfigError("driver variance must be positive");
  if (!(Delta > 0.0 && std::isfinite(Delta))) throw ConfigError("lattice spacing Delta must be positive");
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
  AcfModel m;
  m.delta = Delta;
  m.method = AcfMethod::Quadrature;
  for (int h = 0; h <= max_lag; ++h) {
    const auto r = kernel_product_integral(spec, h * Delta, false, tol / sigma2);
    m.gamma.push_back(sigma2 * r.value);
    m.quad_error = std::max(m.quad_error, sigma2 * r.error);
  }
  if (!(m.gamma[0] > 0.0)) throw ConditionViolation("kernel vanishes almost everywhere: gamma(0) = 0");
  for (double g : m.gamma) m.rho.push_back(g / m.gamma[0]);
  return m;
}

/// Shape of the fractional-noise autocovariance at lag x (in units of the
/// kernel increment D): (|x+1|^a - 2|x|^a + |x-1|^a) / 2, a = 2d + 1.
/// With `differenced`, the autocovariance of Z_t = X_t - X_{t-D}:
/// -(|x+2|^a - 4|x+1|^a + 6|x|^a - 4|x-1|^a + |x-2|^a) / 2.
inline double fractional_acf_shape(double d, double x, bool differenced = false) {
  if (!(d > 0.0 && d < 0.5)) throw ConfigError("fractional shape requires d in (0, 1/2)");
  const double a = 2.0 * d + 1.0;
  x = std::abs(x);
  auto p = [a](double y) { return std::pow(std::abs(y), a); };
  if (!differenced) {
    if (x >= 1.0) return 0.5 * power_backward_difference(x + 1.0, 1.0, a, 2);
    return 0.5 * (p(x + 1.0) - 2.0 * p(x) + p(x - 1.0));
  }
  if (x >= 2.0) return -0.5 * power_backward_difference(x + 2.0, 1.0, a, 4);
  return -0.5 * (p(x + 2.0) - 4.0 * p(x + 1.0) + 6.0 * p(x) - 4.0 * p(x - 1.0) + p(x - 2.0));
}

/// (scale / 2)(|h+1|^(2d+1) - 2|h|^(2d+1) + |h-1|^(2d+1)).
inline double autocov_fractional_closed(double d, double scale, int h) {
  return scale * fractional_acf_shape(d, static_cast<double>(h), false);
}

/// Autocovariance of the differenced noise, scaled so that lag 0 of the
/// undifferenced shape equals `scale`.
inline double autocov_differenced_closed(double d, double scale, int h) {
  return scale * fractional_acf_shape(d, static_cast<double>(h), true);
}

/// Lag-1 autocorrelation of fractional noise, 2^(2d) - 1.
inline double fractional_rho1(double d) { return std::pow(2.0, 2.0 * d) - 1.0; }

/// Closed-form AcfModel for a fractional kernel with the scale fitted to the
/// quadrature value of gamma(0).
inline AcfModel autocov_fractional_model(const KernelSpec& spec, double sigma2, double Delta, int max_lag,
                                         double tol) {
  const auto fp = fractional_params(spec);
  if (!fp) throw ConfigError("closed-form autocovariance needs a fractional kernel");
  auto m = autocov_quadrature(spec, sigma2, Delta, 0, tol);
  const double g0 = m.gamma[0];
  const double s0 = fractional_acf_shape(fp->d, 0.0, fp->differenced);
  m.gamma.clear();
  m.rho.clear();
  for (int h = 0; h <= max_lag; ++h) {
    const double s = fractional_acf_shape(fp->d, h * Delta / fp->delta, fp->differenced) / s0;
    m.gamma.push_back(g0 * s);
    m.rho.push_back(s);
  }
  m.method = AcfMethod::FractionalClosedForm;
  return m;
}

}  // namespace levyma
