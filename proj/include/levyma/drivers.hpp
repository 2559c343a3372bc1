#pragma once

/// Lévy driver families with exact second and fourth cumulants.
///
/// All families are centred: jump laws have mean zero and there is no drift,
/// so E L_1 = 0 holds exactly.

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "levyma/errors.hpp"
#include "levyma/rng.hpp"

namespace levyma {

struct GaussianJump {
  double variance = 1.0;
  bool operator==(const GaussianJump&) const = default;
};

/// Jump equal to `a` with probability `p` and to -p a / (1 - p) otherwise.
struct TwoPointJump {
  double a = 1.0;
  double p = 0.5;
  bool operator==(const TwoPointJump&) const = default;
};

using JumpLaw = std::variant<GaussianJump, TwoPointJump>;

struct Brownian {
  double variance = 1.0;  // A
  bool operator==(const Brownian&) const = default;
};

struct CompoundPoisson {
  double rate = 1.0;  // lambda
  JumpLaw jump = GaussianJump{};
  bool operator==(const CompoundPoisson&) const = default;
};

struct BrownianPlusCompoundPoisson {
  double variance = 1.0;
  double rate = 1.0;
  JumpLaw jump = GaussianJump{};
  bool operator==(const BrownianPlusCompoundPoisson&) const = default;
};

struct DriverSpec {
  std::variant<Brownian, CompoundPoisson, BrownianPlusCompoundPoisson> family = Brownian{};
  bool operator==(const DriverSpec&) const = default;
};

struct Cumulants {
  double sigma2 = 0.0;          // E L_1^2
  double eta = 0.0;             // E L_1^4 / sigma^4
  double fourth_cumulant = 0.0;  // (eta - 3) sigma^4, the integral of x^4 against the Lévy measure
};

struct JumpMoments {
  double second = 0.0;
  double fourth = 0.0;
};

inline JumpMoments jump_moments(const JumpLaw& law) {
  return std::visit(
      [](const auto& j) -> JumpMoments {
        using J = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<J, GaussianJump>) {
          if (!(j.variance > 0.0)) throw ConfigError("Gaussian jump variance must be positive");
          return {j.variance, 3.0 * j.variance * j.variance};
        } else {
          if (!(j.p > 0.0 && j.p < 1.0)) throw ConfigError("two-point jump probability must lie in (0, 1)");
          if (!(j.a != 0.0 && std::isfinite(j.a))) throw ConfigError("two-point jump value must be non-zero");
          const double b = -j.p * j.a / (1.0 - j.p);
          const double a2 = j.a * j.a;
          const double b2 = b * b;
          return {j.p * a2 + (1.0 - j.p) * b2, j.p * a2 * a2 + (1.0 - j.p) * b2 * b2};
        }
      },
      law);
}

namespace detail {

inline void check_rate(double rate) {
  if (!(rate > 0.0 && std::isfinite(rate))) throw ConfigError("jump rate lambda must be positive");
}

inline void check_gaussian_variance(double a, bool allow_zero) {
  if (!std::isfinite(a) || a < 0.0 || (!allow_zero && a == 0.0))
    throw ConfigError("Gaussian variance A must be " + std::string(allow_zero ? "non-negative" : "positive"));
}

}  // namespace detail

/// Exact cumulants: sigma^2 = A + lambda E J^2 and (eta - 3) sigma^4 = lambda E J^4.
inline Cumulants cumulants(const DriverSpec& spec) {
  double gauss = 0.0;
  double rate = 0.0;
  JumpMoments jm;
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Brownian>) {
          detail::check_gaussian_variance(f.variance, false);
          gauss = f.variance;
        } else if constexpr (std::is_same_v<F, CompoundPoisson>) {
          detail::check_rate(f.rate);
          rate = f.rate;
          jm = jump_moments(f.jump);
        } else {
          detail::check_gaussian_variance(f.variance, true);
          detail::check_rate(f.rate);
          gauss = f.variance;
          rate = f.rate;
          jm = jump_moments(f.jump);
        }
      },
      spec.family);
  Cumulants c;
  c.sigma2 = gauss + rate * jm.second;
  if (!(c.sigma2 > 0.0)) throw ConfigError("driver has zero variance");
  c.fourth_cumulant = rate * jm.fourth;
  c.eta = 3.0 + c.fourth_cumulant / (c.sigma2 * c.sigma2);
  return c;
}

inline bool is_brownian(const DriverSpec& spec) {
  return std::holds_alternative<Brownian>(spec.family);
}

namespace detail {

inline double draw_jumps(const JumpLaw& law, std::uint64_t count, ElementRng& rng) {
  if (count == 0) return 0.0;
  return std::visit(
      [&](const auto& j) -> double {
        using J = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<J, GaussianJump>) {
          // A sum of `count` i.i.d. N(0, s^2) jumps is N(0, count s^2).
          return std::sqrt(static_cast<double>(count) * j.variance) * rng.normal();
        } else {
          const double b = -j.p * j.a / (1.0 - j.p);
          double sum = 0.0;
          for (std::uint64_t i = 0; i < count; ++i) sum += rng.uniform() < j.p ? j.a : b;
          return sum;
        }
      },
      law);
}

}  // namespace detail

/// Increment of L over an interval of length `step`, drawn from `rng`.
/// The caller is responsible for having validated `spec` (see `cumulants`).
inline double draw_increment(const DriverSpec& spec, double step, ElementRng& rng) {
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Brownian>) {
          return std::sqrt(f.variance * step) * rng.normal();
        } else if constexpr (std::is_same_v<F, CompoundPoisson>) {
          return detail::draw_jumps(f.jump, rng.poisson(f.rate * step), rng);
        } else {
          const double w = f.variance > 0.0 ? std::sqrt(f.variance * step) * rng.normal() : 0.0;
          return w + detail::draw_jumps(f.jump, rng.poisson(f.rate * step), rng);
        }
      },
      spec.family);
}

/// Fills `out[k]` with the increment of global fine-grid index `first + k`.
inline void fill_increments(const DriverSpec& spec, double step, std::uint64_t seed, std::uint32_t stream,
                            std::int64_t first, std::vector<double>& out) {
  for (std::size_t k = 0; k < out.size(); ++k) {
    ElementRng rng(seed, stream, element_index(first + static_cast<std::int64_t>(k)));
    out[k] = draw_increment(spec, step, rng);
  }
}

/// `count` i.i.d. increments over intervals of length `step`; deterministic in
/// (spec, step, count, seed, stream).
inline std::vector<double> sample_increments(const DriverSpec& spec, double step, std::size_t count,
                                             std::uint64_t seed, std::uint32_t stream = 0) {
  if (!(step > 0.0 && std::isfinite(step))) throw ConfigError("increment step must be positive");
  cumulants(spec);
  std::vector<double> out(count);
  fill_increments(spec, step, seed, stream, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// JSON: {"family": "...", "params": {...}}

inline void to_json(nlohmann::json& j, const JumpLaw& law) {
  std::visit(
      [&](const auto& x) {
        using J = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<J, GaussianJump>)
          j = {{"type", "Gaussian"}, {"s2", x.variance}};
        else
          j = {{"type", "TwoPoint"}, {"a", x.a}, {"p", x.p}};
      },
      law);
}

inline void from_json(const nlohmann::json& j, JumpLaw& law) {
  const auto type = j.at("type").get<std::string>();
  if (type == "Gaussian")
    law = GaussianJump{j.at("s2").get<double>()};
  else if (type == "TwoPoint")
    law = TwoPointJump{j.at("a").get<double>(), j.at("p").get<double>()};
  else
    throw ConfigError("unknown jump type '" + type + "'");
}

inline void to_json(nlohmann::json& j, const DriverSpec& spec) {
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Brownian>) {
          j = {{"family", "Brownian"}, {"params", {{"A", f.variance}}}};
        } else if constexpr (std::is_same_v<F, CompoundPoisson>) {
          j = {{"family", "CompoundPoisson"}, {"params", {{"lambda", f.rate}, {"jump", f.jump}}}};
        } else {
          j = {{"family", "BrownianPlusCompoundPoisson"},
               {"params", {{"A", f.variance}, {"lambda", f.rate}, {"jump", f.jump}}}};
        }
      },
      spec.family);
}

inline void from_json(const nlohmann::json& j, DriverSpec& spec) {
  const auto family = j.at("family").get<std::string>();
  const auto& p = j.at("params");
  if (family == "Brownian")
    spec.family = Brownian{p.at("A").get<double>()};
  else if (family == "CompoundPoisson")
    spec.family = CompoundPoisson{p.at("lambda").get<double>(), p.at("jump").get<JumpLaw>()};
  else if (family == "BrownianPlusCompoundPoisson")
    spec.family = BrownianPlusCompoundPoisson{p.at("A").get<double>(), p.at("lambda").get<double>(),
                                              p.at("jump").get<JumpLaw>()};
  else
    throw ConfigError("unknown driver family '" + family + "'");
}

}  // namespace levyma
