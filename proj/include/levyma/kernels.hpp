#pragma once

/// Kernel families f : R -> R for moving averages X_t = mu + \int f(t - s) dL_s.
///
/// Besides pointwise evaluation every family publishes a `KernelShape`:
/// support, kink abscissas (where f or its derivative is not smooth) and,
/// for unbounded support, a power-law tail envelope |f(s)| <= C |s|^-beta
/// valid and smooth beyond a start abscissa. Quadrature and lattice-series
/// code is written against that metadata only.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "levyma/errors.hpp"

namespace levyma {

/// f(s) = (s_+^d - (s - D)_+^d) / Gamma(d + 1): increments of the
/// Riemann-Liouville type fractional Lévy process.
struct FractionalPlus {
  double d = 0.25;
  double delta = 1.0;
  bool operator==(const FractionalPlus&) const = default;
};

/// f(s) = |s|^d - |s - D|^d.
struct FractionalAbs {
  double d = 0.25;
  double delta = 1.0;
  bool operator==(const FractionalAbs&) const = default;
};

/// f(s) = f1(s) - f1(s - D) with f1 the FractionalPlus kernel: the kernel of
/// the differenced noise Z_t = X_t - X_{t-D}.
struct DifferencedFractionalPlus {
  double d = 0.25;
  double delta = 1.0;
  bool operator==(const DifferencedFractionalPlus&) const = default;
};

/// f = sum_k psi_k 1_{(i eps, (i + 1) eps]} with i = first_index + k.
struct StepKernel {
  std::vector<double> coefficients;
  int first_index = 0;
  double cell_width = 1.0;
  bool operator==(const StepKernel&) const = default;
};

struct IndicatorPiece {
  double a = 0.0;
  double b = 1.0;
  double height = 1.0;
  bool operator==(const IndicatorPiece&) const = default;
};

/// f = sum height * 1_{(a, b]} over a finite list of intervals.
struct IndicatorUnion {
  std::vector<IndicatorPiece> pieces;
  bool operator==(const IndicatorUnion&) const = default;
};

/// f(u) = c_j (u - j)^j on [j, j + 1), j >= 0, with c_j = (2j - 1)!! / (2^j j!).
/// Integrable and bounded, yet its lattice sum is (1 - u)^(-1/2) on [0, 1),
/// which is not square integrable.
struct Counterexample {
  bool operator==(const Counterexample&) const = default;
};

struct KernelSpec {
  std::variant<FractionalPlus, FractionalAbs, DifferencedFractionalPlus, StepKernel, IndicatorUnion,
               Counterexample>
      family = IndicatorUnion{{IndicatorPiece{}}};
  bool operator==(const KernelSpec&) const = default;
};

inline KernelSpec indicator(double a, double b, double height = 1.0) {
  return KernelSpec{IndicatorUnion{{IndicatorPiece{a, b, height}}}};
}

struct PowerTail {
  double constant = 0.0;  // C
  double exponent = 0.0;  // beta
  double start = 0.0;     // |s| >= start
};

struct KernelShape {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> kinks;
  std::optional<PowerTail> right;
  std::optional<PowerTail> left;
  bool integrable = true;              // f in L1(R)
  bool abs_sum_square_integrable = true;  // u -> sum_j |f(u + j Delta)| in L2([0, Delta])
  bool lattice_only = false;          // only integer-lag quadrature on the unit lattice
};

namespace detail {

/// Generalised binomial coefficients binom(e, n) for n = 0, 1, ...
class BinomialSeries {
 public:
  explicit BinomialSeries(double e) : e_(e) {}
  double next() {
    const double out = value_;
    value_ *= (e_ - n_) / (n_ + 1.0);
    n_ += 1.0;
    return out;
  }

 private:
  double e_;
  double n_ = 0.0;
  double value_ = 1.0;
};

inline double pos_pow(double x, double e) { return x > 0.0 ? std::pow(x, e) : 0.0; }

}  // namespace detail

/// Backward difference sum_{i=0}^{order} (-1)^i C(order, i) (s - i D)_+^e.
/// Far from the kinks a binomial series in D / s replaces the direct form,
/// which would lose all significant digits to cancellation.
inline double power_backward_difference(double s, double step, double e, int order) {
  if (s > 2.0 * order * step) {
    const double x = step / s;
    detail::BinomialSeries binom(e);
    binom.next();  // n = 0 term cancels
    std::vector<double> powers(order + 1, 1.0);
    std::vector<double> weights(order + 1);
    double c = 1.0;
    for (int i = 0; i <= order; ++i) {
      weights[i] = (i % 2 == 0 ? 1.0 : -1.0) * c;
      c = c * (order - i) / (i + 1.0);
    }
    double sum = 0.0;
    double xn = 1.0;
    int quiet = 0;
    for (int n = 1; n < 400; ++n) {
      const double b = binom.next();
      xn *= -x;
      double moment = 0.0;
      for (int i = 1; i <= order; ++i) {
        powers[i] *= i;
        moment += weights[i] * powers[i];
      }
      const double term = b * xn * moment;
      sum += term;
      if (n >= order && std::abs(term) <= 1e-18 * std::abs(sum)) {
        if (++quiet >= 3) break;
      } else {
        quiet = 0;
      }
    }
    return std::pow(s, e) * sum;
  }
  double sum = 0.0;
  double c = 1.0;
  for (int i = 0; i <= order; ++i) {
    sum += (i % 2 == 0 ? 1.0 : -1.0) * c * detail::pos_pow(s - i * step, e);
    c = c * (order - i) / (i + 1.0);
  }
  return sum;
}

/// c_j = Gamma(j + 1/2) / (sqrt(pi) Gamma(j + 1)), extended smoothly to real j >= 0.
inline double counterexample_coefficient(double j) {
  return std::exp(std::lgamma(j + 0.5) - std::lgamma(j + 1.0) - 0.5 * std::log(std::numbers::pi));
}

namespace detail {

inline void check_fractional(double d, double delta) {
  if (!(d > 0.0 && d < 0.5)) throw ConfigError("fractional kernel requires d in (0, 1/2)");
  if (!(delta > 0.0 && std::isfinite(delta))) throw ConfigError("fractional kernel requires delta > 0");
}

/// Snaps s onto a boundary value when they agree to ~1e-12 relative, so
/// lattice abscissas computed in floating point fall in the intended cell.
inline double snap(double s, double boundary) {
  return std::abs(s - boundary) <= 1e-12 * std::max(1.0, std::abs(boundary)) ? boundary : s;
}

struct KernelEval {
  double s;

  double operator()(const FractionalPlus& k) const {
    return power_backward_difference(s, k.delta, k.d, 1) / std::tgamma(k.d + 1.0);
  }
  double operator()(const DifferencedFractionalPlus& k) const {
    return power_backward_difference(s, k.delta, k.d, 2) / std::tgamma(k.d + 1.0);
  }
  double operator()(const FractionalAbs& k) const {
    if (s >= k.delta) return power_backward_difference(s, k.delta, k.d, 1);
    if (s <= 0.0) return -power_backward_difference(-s + k.delta, k.delta, k.d, 1);
    return std::pow(s, k.d) - std::pow(k.delta - s, k.d);
  }
  double operator()(const StepKernel& k) const {
    double q = s / k.cell_width;
    q = snap(q, std::round(q));
    const long cell = static_cast<long>(std::ceil(q)) - 1;  // s in (cell eps, (cell + 1) eps]
    const long idx = cell - k.first_index;
    if (idx < 0 || idx >= static_cast<long>(k.coefficients.size())) return 0.0;
    return k.coefficients[static_cast<std::size_t>(idx)];
  }
  double operator()(const IndicatorUnion& k) const {
    double v = 0.0;
    for (const auto& p : k.pieces) {
      const double x = snap(snap(s, p.a), p.b);
      if (x > p.a && x <= p.b) v += p.height;
    }
    return v;
  }
  double operator()(const Counterexample&) const {
    if (s < 0.0) return 0.0;
    const double j = std::floor(s);
    return counterexample_coefficient(j) * std::pow(s - j, j);
  }
};

}  // namespace detail

/// Pointwise kernel value f(s).
inline double eval_kernel(const KernelSpec& spec, double s) { return std::visit(detail::KernelEval{s}, spec.family); }

/// Throws ConfigError when parameters violate a family's invariants.
inline void validate(const KernelSpec& spec) {
  std::visit(
      [](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FractionalPlus> || std::is_same_v<K, FractionalAbs> ||
                      std::is_same_v<K, DifferencedFractionalPlus>) {
          detail::check_fractional(k.d, k.delta);
        } else if constexpr (std::is_same_v<K, StepKernel>) {
          if (k.coefficients.empty()) throw ConfigError("step kernel needs at least one coefficient");
          if (!(k.cell_width > 0.0)) throw ConfigError("step kernel cell width must be positive");
          for (double c : k.coefficients)
            if (!std::isfinite(c)) throw ConfigError("step kernel coefficients must be finite");
        } else if constexpr (std::is_same_v<K, IndicatorUnion>) {
          if (k.pieces.empty()) throw ConfigError("indicator kernel needs at least one interval");
          for (const auto& p : k.pieces)
            if (!(p.b > p.a) || !std::isfinite(p.a) || !std::isfinite(p.b) || !std::isfinite(p.height))
              throw ConfigError("indicator interval must satisfy a < b with finite height");
        }
      },
      spec.family);
}

inline KernelShape kernel_shape(const KernelSpec& spec) {
  validate(spec);
  return std::visit(
      [](const auto& k) -> KernelShape {
        using K = std::decay_t<decltype(k)>;
        constexpr double inf = std::numeric_limits<double>::infinity();
        KernelShape s;
        if constexpr (std::is_same_v<K, FractionalPlus>) {
          s.lo = 0.0;
          s.hi = inf;
          s.kinks = {0.0, k.delta};
          s.right = PowerTail{std::pow(2.0, 1.0 - k.d) * k.d * k.delta / std::tgamma(k.d + 1.0), 1.0 - k.d,
                              2.0 * k.delta};
          s.integrable = false;
          s.abs_sum_square_integrable = false;
        } else if constexpr (std::is_same_v<K, FractionalAbs>) {
          s.lo = -inf;
          s.hi = inf;
          s.kinks = {0.0, k.delta};
          const PowerTail tail{std::pow(2.0, 1.0 - k.d) * k.d * k.delta, 1.0 - k.d, 2.0 * k.delta};
          s.right = tail;
          s.left = tail;
          s.integrable = false;
          s.abs_sum_square_integrable = false;
        } else if constexpr (std::is_same_v<K, DifferencedFractionalPlus>) {
          s.lo = 0.0;
          s.hi = inf;
          s.kinks = {0.0, k.delta, 2.0 * k.delta};
          s.right = PowerTail{
              std::pow(2.0, 2.0 - k.d) * k.d * (1.0 - k.d) * k.delta * k.delta / std::tgamma(k.d + 1.0),
              2.0 - k.d, 4.0 * k.delta};
        } else if constexpr (std::is_same_v<K, StepKernel>) {
          const auto n = static_cast<int>(k.coefficients.size());
          for (int i = 0; i <= n; ++i) s.kinks.push_back((k.first_index + i) * k.cell_width);
          s.lo = s.kinks.front();
          s.hi = s.kinks.back();
        } else if constexpr (std::is_same_v<K, IndicatorUnion>) {
          for (const auto& p : k.pieces) {
            s.kinks.push_back(p.a);
            s.kinks.push_back(p.b);
          }
          std::sort(s.kinks.begin(), s.kinks.end());
          s.kinks.erase(std::unique(s.kinks.begin(), s.kinks.end()), s.kinks.end());
          s.lo = s.kinks.front();
          s.hi = s.kinks.back();
        } else {
          s.lo = 0.0;
          s.hi = inf;
          s.kinks = {0.0};
          s.abs_sum_square_integrable = false;
          s.lattice_only = true;
        }
        return s;
      },
      spec.family);
}

/// Parameters of the fractional families, if `spec` is one.
struct FractionalParams {
  double d = 0.0;
  double delta = 1.0;
  bool differenced = false;
  bool absolute = false;
};

inline std::optional<FractionalParams> fractional_params(const KernelSpec& spec) {
  if (const auto* k = std::get_if<FractionalPlus>(&spec.family)) return FractionalParams{k->d, k->delta, false, false};
  if (const auto* k = std::get_if<FractionalAbs>(&spec.family)) return FractionalParams{k->d, k->delta, false, true};
  if (const auto* k = std::get_if<DifferencedFractionalPlus>(&spec.family))
    return FractionalParams{k->d, k->delta, true, false};
  return std::nullopt;
}

/// True when f is constant on every lattice cell (i Delta, (i + 1) Delta], so
/// the sampled process is a discrete moving average of i.i.d. noise.
inline bool is_lattice_step(const KernelSpec& spec, double lattice_delta) {
  auto aligned = [&](double x) {
    const double q = x / lattice_delta;
    return std::abs(q - std::round(q)) <= 1e-12 * std::max(1.0, std::abs(q));
  };
  if (const auto* k = std::get_if<StepKernel>(&spec.family)) {
    // Cells must tile the lattice: eps an integer multiple of Delta is enough.
    return aligned(k->cell_width) && aligned(k->first_index * k->cell_width);
  }
  if (const auto* k = std::get_if<IndicatorUnion>(&spec.family)) {
    return std::all_of(k->pieces.begin(), k->pieces.end(),
                       [&](const IndicatorPiece& p) { return aligned(p.a) && aligned(p.b); });
  }
  return false;
}

inline std::string family_name(const KernelSpec& spec) {
  static constexpr const char* names[] = {"FractionalPlus", "FractionalAbs", "DifferencedFractionalPlus",
                                          "Step",           "IndicatorUnion", "Counterexample"};
  return names[spec.family.index()];
}

// ---------------------------------------------------------------------------
// JSON: {"family": "...", "params": {...}}

inline void to_json(nlohmann::json& j, const KernelSpec& spec) {
  nlohmann::json params = nlohmann::json::object();
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FractionalPlus> || std::is_same_v<K, FractionalAbs> ||
                      std::is_same_v<K, DifferencedFractionalPlus>) {
          params = {{"d", k.d}, {"delta", k.delta}};
        } else if constexpr (std::is_same_v<K, StepKernel>) {
          params = {{"coefficients", k.coefficients}, {"firstIndex", k.first_index}, {"cellWidth", k.cell_width}};
        } else if constexpr (std::is_same_v<K, IndicatorUnion>) {
          params["pieces"] = nlohmann::json::array();
          for (const auto& p : k.pieces) params["pieces"].push_back({{"a", p.a}, {"b", p.b}, {"height", p.height}});
        }
      },
      spec.family);
  j = {{"family", family_name(spec)}, {"params", params}};
}

inline void from_json(const nlohmann::json& j, KernelSpec& spec) {
  const auto family = j.at("family").get<std::string>();
  const nlohmann::json params = j.contains("params") ? j.at("params") : nlohmann::json::object();
  auto delta = [&] { return params.contains("delta") ? params.at("delta").get<double>() : 1.0; };
  if (family == "FractionalPlus") {
    spec.family = FractionalPlus{params.at("d").get<double>(), delta()};
  } else if (family == "FractionalAbs") {
    spec.family = FractionalAbs{params.at("d").get<double>(), delta()};
  } else if (family == "DifferencedFractionalPlus") {
    spec.family = DifferencedFractionalPlus{params.at("d").get<double>(), delta()};
  } else if (family == "Step") {
    StepKernel k;
    k.coefficients = params.at("coefficients").get<std::vector<double>>();
    k.first_index = params.value("firstIndex", 0);
    k.cell_width = params.value("cellWidth", 1.0);
    spec.family = std::move(k);
  } else if (family == "IndicatorUnion") {
    IndicatorUnion k;
    for (const auto& p : params.at("pieces"))
      k.pieces.push_back({p.at("a").get<double>(), p.at("b").get<double>(), p.value("height", 1.0)});
    spec.family = std::move(k);
  } else if (family == "Counterexample") {
    spec.family = Counterexample{};
  } else {
    throw ConfigError("unknown kernel family '" + family + "'");
  }
}

}  // namespace levyma
