#pragma once

/// Adaptive Gauss-Kronrod quadrature with mandatory breakpoints, a mapped
/// rule for power-law tails on half lines, and Euler-Maclaurin tail sums for
/// slowly decaying lattice series.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "levyma/errors.hpp"

namespace levyma {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  long evaluations = 0;

  QuadResult& operator+=(const QuadResult& o) {
    value += o.value;
    error += o.error;
    evaluations += o.evaluations;
    return *this;
  }
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for kKronrodNodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  double floor;  // rounding part of `error`
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    const double sum = f(centre - dx) + f(centre + dx);
    kronrod += kKronrodWeights[i] * sum;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * sum;
  }
  const double value = kronrod * half;
  double error = std::abs((kronrod - gauss) * half);
  // Rounding floor: the rule cannot resolve below a few ulps of the panel's mass.
  const double floor = 50.0 * std::numeric_limits<double>::epsilon() * std::abs(value);
  error = std::max(error, floor);
  if (!std::isfinite(value)) error = std::numeric_limits<double>::infinity();
  return {a, b, value, error, floor};
}

}  // namespace detail

struct QuadOptions {
  double tol = 1e-10;         // absolute tolerance on the whole integral
  int max_panels = 4000;      // subdivision budget
};

/// Globally adaptive quadrature over [breaks.front(), breaks.back()]; every
/// interior break is a panel boundary. Throws QuadratureError if the error
/// estimate cannot be brought below `opt.tol` within the panel budget. The
/// rounding floor of each panel is added to `opt.tol`.
template <class F>
QuadResult integrate(F&& f, std::span<const double> breaks, QuadOptions opt = {}) {
  QuadResult out;
  if (breaks.size() < 2) return out;
  std::priority_queue<detail::Panel> heap;
  double total = 0.0;
  double err = 0.0;
  double floor = 0.0;
  long evals = 0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i + 1] > breaks[i])) continue;
    auto p = detail::gk15(f, breaks[i], breaks[i + 1]);
    evals += 15;
    total += p.value;
    err += p.error;
    floor += p.floor;
    heap.push(p);
  }
  int panels = static_cast<int>(heap.size());
  while (err > opt.tol + floor && !heap.empty()) {
    if (panels >= opt.max_panels) {
      throw QuadratureError("adaptive quadrature did not reach tolerance " + std::to_string(opt.tol) +
                            " (estimate " + std::to_string(err) + ")");
    }
    auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Panel below floating-point resolution; accept its estimate as is.
      if (worst.error > opt.tol + worst.floor)
        throw QuadratureError("quadrature panel collapsed at x = " + std::to_string(worst.a));
      break;
    }
    heap.pop();
    auto left = detail::gk15(f, worst.a, mid);
    auto right = detail::gk15(f, mid, worst.b);
    evals += 30;
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    floor += left.floor + right.floor - worst.floor;
    heap.push(left);
    heap.push(right);
    ++panels;
  }
  // Re-sum to shed the drift of the running totals.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = total;
  out.error = err;
  out.evaluations = evals;
  if (!std::isfinite(total)) throw QuadratureError("integrand is not finite on the integration range");
  return out;
}

template <class F>
QuadResult integrate(F&& f, double a, double b, QuadOptions opt = {}) {
  const std::array<double, 2> br{a, b};
  return integrate(std::forward<F>(f), std::span<const double>(br), opt);
}

/// Integral of f over [a, inf) for an integrand decaying like x^(-decay),
/// decay > 1. The substitution x = a - s + s t^(-p), p = 2 / (decay - 1),
/// maps the half line onto (0, 1] with an integrand vanishing like t at 0.
template <class F>
QuadResult integrate_to_infinity(F&& f, double a, double decay, double scale, QuadOptions opt = {}) {
  if (!(decay > 1.0)) throw ConvergenceError("tail integral requires decay exponent > 1");
  const double p = 2.0 / (decay - 1.0);
  const double s = std::max(scale, 1e-300);
  auto g = [&](double t) -> double {
    if (t <= 0.0) return 0.0;
    const double tp = std::pow(t, -p);
    const double x = a - s + s * tp;
    if (!std::isfinite(x)) return 0.0;
    const double jac = s * p * tp / t;
    const double v = f(x) * jac;
    return std::isfinite(v) ? v : 0.0;
  };
  return integrate(g, 0.0, 1.0, opt);
}

struct SeriesTail {
  double value = 0.0;
  double error = 0.0;  // estimated remainder plus quadrature error
};

/// Euler-Maclaurin estimate of sum_{k >= first} phi(k) for phi smooth on
/// [first - 2, inf) with |phi(x)| ~ x^(-decay), decay > 1.
template <class F>
SeriesTail euler_maclaurin_tail(F&& phi, double first, double decay, QuadOptions opt = {}) {
  const double h = 1.0;
  const double fm2 = phi(first - 2 * h), fm1 = phi(first - h), f0 = phi(first), fp1 = phi(first + h),
               fp2 = phi(first + 2 * h);
  const double d1 = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
  const double d3 = (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) / (2.0 * h * h * h);
  const auto integral = integrate_to_infinity(phi, first, decay, std::max(1.0, first), opt);
  SeriesTail out;
  out.value = integral.value + 0.5 * f0 - d1 / 12.0 + d3 / 720.0;
  out.error = integral.error + std::abs(d3) / 720.0;
  return out;
}

}  // namespace levyma
