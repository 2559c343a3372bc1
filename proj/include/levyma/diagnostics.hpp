#pragma once

/// Numerical summability diagnostics. Each quantity is evaluated with its
/// lattice sums truncated at |k| <= K for dyadic K, and the ratio of
/// successive dyadic increments gives a growth exponent a: increments that
/// shrink like 2^(-a j) with a > 0 indicate convergence, a <= 0 divergence.
/// This is a heuristic, not a proof.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "levyma/acf.hpp"
#include "levyma/errors.hpp"
#include "levyma/kernels.hpp"
#include "levyma/lattice.hpp"
#include "levyma/quadrature.hpp"

namespace levyma {

enum class Summability { Converging, Diverging, Inconclusive };

inline const char* to_string(Summability s) {
  switch (s) {
    case Summability::Converging: return "converging";
    case Summability::Diverging: return "diverging";
    default: return "inconclusive";
  }
}

struct SummabilityEntry {
  std::string name;
  std::vector<long> cutoffs;      // dyadic K
  std::vector<double> partial;    // value with sums truncated at |k| <= K
  double growth_exponent = 0.0;   // +inf when the last increments vanish
  Summability flag = Summability::Inconclusive;
};

struct SummabilityThresholds {
  double converging = 0.05;  // a above this: converging
  double diverging = 0.02;   // a below this: diverging
};

struct SummabilityReport {
  double delta = 1.0;
  long budget = 0;
  std::vector<SummabilityEntry> entries;

  const SummabilityEntry& at(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw ConfigError("no summability entry named '" + name + "'");
  }
};

namespace detail {

inline std::vector<long> dyadic_cutoffs(long budget) {
  std::vector<long> k;
  for (long K = 4; K <= budget; K *= 2) k.push_back(K);
  if (k.empty()) k.push_back(std::max(1L, budget));
  return k;
}

inline void classify(SummabilityEntry& e, const SummabilityThresholds& th) {
  const auto& s = e.partial;
  const std::size_t n = s.size();
  const double scale = std::max(std::abs(s.back()), std::numeric_limits<double>::min());
  auto negligible = [&](double inc) { return std::abs(inc) <= 1e-13 * scale; };
  if (n >= 2 && negligible(s[n - 1] - s[n - 2]) && (n < 3 || negligible(s[n - 2] - s[n - 3]))) {
    e.growth_exponent = std::numeric_limits<double>::infinity();
    e.flag = Summability::Converging;
    return;
  }
  if (n < 3 || !std::isfinite(s.back())) {
    e.growth_exponent = std::numeric_limits<double>::quiet_NaN();
    e.flag = Summability::Inconclusive;
    return;
  }
  const double prev = s[n - 2] - s[n - 3];
  const double last = s[n - 1] - s[n - 2];
  if (!(prev > 0.0 && last > 0.0)) {
    e.growth_exponent = std::numeric_limits<double>::quiet_NaN();
    e.flag = Summability::Inconclusive;
    return;
  }
  e.growth_exponent = std::log2(prev / last);
  if (e.growth_exponent > th.converging)
    e.flag = Summability::Converging;
  else if (e.growth_exponent < th.diverging)
    e.flag = Summability::Diverging;
  else
    e.flag = Summability::Inconclusive;
}

/// Nodes and weights of a fixed composite rule on [0, Delta], graded
/// geometrically towards every breakpoint so that endpoint singularities of
/// the truncated lattice sums are resolved.
inline void graded_rule(const std::vector<double>& breaks, std::vector<double>& x, std::vector<double>& w) {
  constexpr int kLevels = 24;
  auto panel = [&](double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    for (int i = 0; i < 8; ++i) {
      const double dx = h * kKronrodNodes[i];
      const double wt = h * kKronrodWeights[i];
      x.push_back(c - dx);
      w.push_back(wt);
      if (i < 7) {
        x.push_back(c + dx);
        w.push_back(wt);
      }
    }
  };
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = breaks[p];
    const double b = breaks[p + 1];
    const double mid = 0.5 * (a + b);
    double lo = a;
    double hi = b;
    for (int l = 0; l < kLevels; ++l) {
      const double na = a + (mid - a) * std::ldexp(1.0, -(kLevels - 1 - l));
      panel(lo, na);
      lo = na;
      const double nb = b - (b - mid) * std::ldexp(1.0, -(kLevels - 1 - l));
      panel(nb, hi);
      hi = nb;
    }
    panel(lo, hi);
  }
}

}  // namespace detail

/// Partial values and convergence flags for
///   foldSquareIntegral:    \int_0^Delta (sum_k f(u + k Delta)^2)^2 du
///   autocovSquareSum:      sum_h gamma(h Delta)^2 (per unit driver variance)
///   absProductSquareSum:   sum_k (\int |f(s) f(s + k Delta)| ds)^2
///   absSumSquareIntegral:  \int_0^Delta F_Delta(u)^2 du
inline SummabilityReport summability_diagnostics(const KernelSpec& spec, double Delta, long budget,
                                                 SummabilityThresholds th = {}, double tol = 1e-11) {
  if (budget < 1) throw ConfigError("summability budget K must be at least 1");
  if (!(Delta > 0.0 && std::isfinite(Delta))) throw ConfigError("lattice spacing Delta must be positive");
  validate(spec);
  SummabilityReport rep;
  rep.delta = Delta;
  rep.budget = budget;
  const auto cut = detail::dyadic_cutoffs(budget);
  const long kmax = cut.back();

  // Lattice sums at every node of a fixed rule, truncated at each cutoff.
  std::vector<double> x, w;
  detail::graded_rule(lattice_breakpoints(spec, Delta), x, w);
  SummabilityEntry fold{"foldSquareIntegral", cut, std::vector<double>(cut.size(), 0.0)};
  SummabilityEntry abs{"absSumSquareIntegral", cut, std::vector<double>(cut.size(), 0.0)};
  for (std::size_t node = 0; node < x.size(); ++node) {
    const double u = x[node];
    double sq = eval_kernel(spec, u) * eval_kernel(spec, u);
    double ab = std::abs(eval_kernel(spec, u));
    std::size_t level = 0;
    for (long k = 1; k <= kmax; ++k) {
      const double a = eval_kernel(spec, u + k * Delta);
      const double b = eval_kernel(spec, u - k * Delta);
      sq += a * a + b * b;
      ab += std::abs(a) + std::abs(b);
      if (k == cut[level]) {
        fold.partial[level] += w[node] * sq * sq;
        abs.partial[level] += w[node] * ab * ab;
        ++level;
      }
    }
  }

  SummabilityEntry gam{"autocovSquareSum", cut, std::vector<double>(cut.size(), 0.0)};
  SummabilityEntry prod{"absProductSquareSum", cut, std::vector<double>(cut.size(), 0.0)};
  {
    const double g0 = kernel_product_integral(spec, 0.0, false, tol).value;
    double sg = g0 * g0;
    double sp = sg;
    std::size_t level = 0;
    for (long k = 1; k <= kmax; ++k) {
      const double g = kernel_product_integral(spec, k * Delta, false, tol).value;
      // Signed and absolute products coincide wherever the kernel keeps one sign.
      const double p = kernel_product_integral(spec, k * Delta, true, tol).value;
      sg += 2.0 * g * g;
      sp += 2.0 * p * p;
      if (k == cut[level]) {
        gam.partial[level] = sg;
        prod.partial[level] = sp;
        ++level;
      }
    }
  }
  for (auto* e : {&fold, &gam, &prod, &abs}) {
    detail::classify(*e, th);
    rep.entries.push_back(std::move(*e));
  }
  return rep;
}

}  // namespace levyma
