#pragma once

/// Lattice-folded kernel sums on [0, Delta]:
///   g_q(u) = sum_k f(u + k Delta) f(u + (k + q) Delta)
///   F(u)   = sum_k |f(u + k Delta)|
/// Finite families are summed exactly. Power-law tails are summed explicitly
/// through the non-smooth core plus a margin, and the remainder is taken from
/// an Euler-Maclaurin estimate whose error is part of the returned bound.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "levyma/errors.hpp"
#include "levyma/kernels.hpp"
#include "levyma/quadrature.hpp"

namespace levyma {

struct LatticeValue {
  double value = 0.0;
  double error = 0.0;      // bound on the discarded tail mass
  bool divergent = false;  // the series has no summable envelope
  long terms = 0;          // explicitly summed terms
};

namespace detail {

inline constexpr long kLatticeMargin = 64;
inline constexpr long kGeometricBudget = 100'000'000;

/// Sum over k in Z of term(k), where term has `factors` kernel factors with
/// arguments u + (k + shift) Delta, shift in [min_shift, max_shift].
template <class Term>
LatticeValue lattice_series(const KernelShape& sh, double Delta, double u, int min_shift, int max_shift, int factors,
                            Term&& term, double tol) {
  LatticeValue out;
  long k_lo = 0;
  long k_hi = 0;
  const double kink_lo = sh.kinks.empty() ? 0.0 : sh.kinks.front();
  const double kink_hi = sh.kinks.empty() ? 0.0 : sh.kinks.back();
  if (std::isfinite(sh.hi)) {
    k_hi = static_cast<long>(std::ceil((sh.hi - u) / Delta)) - min_shift + 1;
  } else {
    const double core = std::max(kink_hi, sh.right->start);
    k_hi = static_cast<long>(std::ceil((core - u) / Delta)) - min_shift + 2 + kLatticeMargin;
  }
  if (std::isfinite(sh.lo)) {
    k_lo = static_cast<long>(std::floor((sh.lo - u) / Delta)) - max_shift - 1;
  } else {
    const double core = std::min(kink_lo, -sh.left->start);
    k_lo = static_cast<long>(std::floor((core - u) / Delta)) - max_shift - 2 - kLatticeMargin;
  }
  const double decay_r = std::isfinite(sh.hi) ? 0.0 : factors * sh.right->exponent;
  const double decay_l = std::isfinite(sh.lo) ? 0.0 : factors * sh.left->exponent;
  if ((!std::isfinite(sh.hi) && decay_r <= 1.0) || (!std::isfinite(sh.lo) && decay_l <= 1.0)) {
    out.divergent = true;
    out.value = std::numeric_limits<double>::infinity();
    out.error = std::numeric_limits<double>::infinity();
    return out;
  }
  double sum = 0.0;
  for (long k = k_lo; k <= k_hi; ++k) sum += term(static_cast<double>(k));
  out.terms = k_hi - k_lo + 1;
  QuadOptions opt;
  opt.tol = tol / 4.0;
  if (!std::isfinite(sh.hi)) {
    const auto tail = euler_maclaurin_tail(term, static_cast<double>(k_hi + 1), decay_r, opt);
    sum += tail.value;
    out.error += tail.error;
  }
  if (!std::isfinite(sh.lo)) {
    auto mirrored = [&](double x) { return term(-x); };
    const auto tail = euler_maclaurin_tail(mirrored, static_cast<double>(-(k_lo - 1)), decay_l, opt);
    sum += tail.value;
    out.error += tail.error;
  }
  out.value = sum;
  return out;
}

inline void require_unit_lattice(double Delta) {
  if (std::abs(Delta - 1.0) > 1e-12)
    throw ConfigError("the counterexample kernel is supported only on the unit lattice (Delta = 1)");
}

/// Counterexample kernel: sum_{k >= k0} c_k c_{k+q} u^(2k+q) (factors = 2) or
/// sum_k c_k u^k (factors = 1), truncated by the geometric envelope u^k.
inline LatticeValue counterexample_series(double u, int q, int factors, double tol) {
  LatticeValue out;
  if (u >= 1.0) u -= 1.0;  // f(1 + k) = f(0 + (k + 1)): the lattice sum is 1-periodic
  const long k0 = factors == 2 ? std::max(0, -q) : 0;
  long K = 0;
  if (u > 0.0) {
    const double ratio = factors == 2 ? u * u : u;
    const double need = std::log(tol * (1.0 - ratio)) / std::log(ratio);
    if (!(need < static_cast<double>(kGeometricBudget)))
      throw ConvergenceError("lattice sum of the counterexample kernel needs more than " +
                             std::to_string(kGeometricBudget) + " terms at u = " + std::to_string(u));
    K = static_cast<long>(std::ceil(std::max(need, 0.0))) + 1;
  }
  double sum = 0.0;
  for (long k = k0; k <= k0 + K; ++k) {
    const double t = factors == 2
                         ? counterexample_coefficient(static_cast<double>(k)) *
                               counterexample_coefficient(static_cast<double>(k + q)) *
                               std::pow(u, static_cast<double>(2 * k + q))
                         : counterexample_coefficient(static_cast<double>(k)) * std::pow(u, static_cast<double>(k));
    sum += t;
    if (t == 0.0 && k > k0) break;
  }
  out.value = sum;
  out.error = tol;
  out.terms = K + 1;
  return out;
}

inline void check_lattice_args(double Delta, double u, double tol) {
  if (!(Delta > 0.0 && std::isfinite(Delta))) throw ConfigError("lattice spacing Delta must be positive");
  if (!(u >= 0.0 && u <= Delta)) throw ConfigError("lattice offset u must lie in [0, Delta]");
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
}

}  // namespace detail

/// g_q(u) = sum_k f(u + k Delta) f(u + (k + q) Delta), u in [0, Delta].
/// Throws ConvergenceError when the family has no summable envelope.
inline LatticeValue lattice_fold(const KernelSpec& spec, double Delta, int q, double u, double tol) {
  detail::check_lattice_args(Delta, u, tol);
  const auto sh = kernel_shape(spec);
  if (sh.lattice_only) {
    detail::require_unit_lattice(Delta);
    return detail::counterexample_series(u, q, 2, tol);
  }
  auto term = [&](double k) { return eval_kernel(spec, u + k * Delta) * eval_kernel(spec, u + (k + q) * Delta); };
  auto out = detail::lattice_series(sh, Delta, u, std::min(0, q), std::max(0, q), 2, term, tol);
  if (out.divergent) throw ConvergenceError("lattice fold diverges: kernel is not square summable on the lattice");
  return out;
}

/// F(u) = sum_k |f(u + k Delta)|; `divergent` is set when the tails of |f|
/// are not summable (then f is not integrable).
inline LatticeValue lattice_abs_sum(const KernelSpec& spec, double Delta, double u, double tol) {
  detail::check_lattice_args(Delta, u, tol);
  const auto sh = kernel_shape(spec);
  if (sh.lattice_only) {
    detail::require_unit_lattice(Delta);
    return detail::counterexample_series(u, 0, 1, tol);
  }
  auto term = [&](double k) { return std::abs(eval_kernel(spec, u + k * Delta)); };
  return detail::lattice_series(sh, Delta, u, 0, 0, 1, term, tol);
}

/// Signed lattice sum sum_k f(u + k Delta).
inline LatticeValue lattice_sum(const KernelSpec& spec, double Delta, double u, double tol) {
  detail::check_lattice_args(Delta, u, tol);
  const auto sh = kernel_shape(spec);
  if (sh.lattice_only) {
    detail::require_unit_lattice(Delta);
    return detail::counterexample_series(u, 0, 1, tol);
  }
  auto term = [&](double k) { return eval_kernel(spec, u + k * Delta); };
  return detail::lattice_series(sh, Delta, u, 0, 0, 1, term, tol);
}

/// Breakpoints of the folded functions on [0, Delta]: kink abscissas reduced
/// modulo Delta, plus both end points.
inline std::vector<double> lattice_breakpoints(const KernelSpec& spec, double Delta) {
  const auto sh = kernel_shape(spec);
  std::vector<double> br{0.0, Delta};
  for (double k : sh.kinks) {
    double r = std::fmod(k, Delta);
    if (r < 0.0) r += Delta;
    if (r > 1e-12 * Delta && r < Delta * (1.0 - 1e-12)) br.push_back(r);
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  return br;
}

/// Immutable evaluator for g_0 .. g_maxLag and F on [0, Delta].
class LatticeFoldings {
 public:
  LatticeFoldings(KernelSpec spec, double Delta, int max_lag, double tol)
      : spec_(std::move(spec)), delta_(Delta), max_lag_(max_lag), tol_(tol) {
    if (max_lag < 0) throw ConfigError("maxLag must be non-negative");
    detail::check_lattice_args(Delta, 0.0, tol);
    breaks_ = lattice_breakpoints(spec_, Delta);
  }

  double delta() const { return delta_; }
  int max_lag() const { return max_lag_; }
  const KernelSpec& kernel() const { return spec_; }
  const std::vector<double>& breakpoints() const { return breaks_; }
  /// Bound on the discarded tail mass of every single evaluation.
  double truncation_bound() const { return tol_; }

  double g(int q, double u) const {
    if (q < -max_lag_ || q > max_lag_) throw ConfigError("fold lag outside the tabulated range");
    return lattice_fold(spec_, delta_, q, u, tol_).value;
  }

  /// F(u); +inf when divergent.
  double abs_sum(double u) const { return lattice_abs_sum(spec_, delta_, u, tol_).value; }

 private:
  KernelSpec spec_;
  double delta_;
  int max_lag_;
  double tol_;
  std::vector<double> breaks_;
};

}  // namespace levyma
