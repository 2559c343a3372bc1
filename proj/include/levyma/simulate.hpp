#pragma once

/// Lattice sampling of X_t = mu + \int f(t - s) dL_s.
///
/// The stochastic integral is discretised on a fine grid of step
/// delta = Delta / m with left end points: X_{i Delta} = mu + sum_j f(i Delta - j delta) dL_j,
/// where dL_j is the increment of L over [j delta, (j + 1) delta). All lattice
/// points share one increment path, and increment j is drawn from the random
/// element with global index j, so overlapping simulations see identical noise.
///
/// Every path starts at a common anchor index J: X_i sums all increments
/// j >= J, i.e. the kernel is cut at i Delta - J delta, never earlier than
/// the truncation window T. Because the anchor does not depend on i,
/// differencing a path equals simulating with the differenced kernel.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "json.hpp"
#include "levyma/acf.hpp"
#include "levyma/drivers.hpp"
#include "levyma/errors.hpp"
#include "levyma/estimate.hpp"
#include "levyma/kernels.hpp"
#include "levyma/quadrature.hpp"

namespace levyma {

struct SimConfig {
  KernelSpec kernel;
  DriverSpec driver;
  double mu = 0.0;
  double delta = 1.0;
  long n = 1000;
  int refinement = 32;
  double truncation_t = 0.0;  // 0 selects the window from tail_tol
  double tail_tol = 1e-4;     // allowed kernel L2 mass outside [-T, T], relative to ||f||^2
  std::uint64_t seed = 1;
  bool operator==(const SimConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"kernel", c.kernel},       {"driver", c.driver},         {"mu", c.mu},
       {"delta", c.delta},         {"n", c.n},                   {"refinement", c.refinement},
       {"truncationT", c.truncation_t}, {"tailTol", c.tail_tol}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SimConfig& c) {
  c = SimConfig{};
  c.kernel = j.at("kernel").get<KernelSpec>();
  c.driver = j.at("driver").get<DriverSpec>();
  c.mu = j.value("mu", 0.0);
  c.delta = j.value("delta", 1.0);
  c.n = j.value("n", 1000L);
  c.refinement = j.value("refinement", 32);
  c.truncation_t = j.contains("truncationT") && !j.at("truncationT").is_null() ? j.at("truncationT").get<double>() : 0.0;
  c.tail_tol = j.value("tailTol", 1e-4);
  c.seed = j.value("seed", std::uint64_t{1});
}

/// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
inline std::string config_digest(const nlohmann::json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_digest(const SimConfig& c) { return config_digest(nlohmann::json(c)); }

/// Kernel L2 mass outside [-T_neg, T_pos].
inline double kernel_tail_mass(const KernelSpec& spec, double t_neg, double t_pos, double tol = 1e-12) {
  const auto sh = kernel_shape(spec);
  auto sq = [&](double s) {
    const double v = eval_kernel(spec, s);
    return v * v;
  };
  double mass = 0.0;
  QuadOptions opt;
  opt.tol = tol;
  auto piece = [&](double a, double b) {
    if (!(b > a)) return;
    std::vector<double> br{a, b};
    for (double k : sh.kinks)
      if (k > a && k < b) br.push_back(k);
    std::sort(br.begin(), br.end());
    mass += integrate(sq, std::span<const double>(br), opt).value;
  };
  if (std::isfinite(sh.hi)) {
    piece(std::max(t_pos, sh.lo), sh.hi);
  } else {
    const double a = std::max(t_pos, sh.right->start);
    piece(std::max(t_pos, sh.lo), a);
    mass += integrate_to_infinity(sq, a, 2.0 * sh.right->exponent, std::max(1.0, a), opt).value;
  }
  if (std::isfinite(sh.lo)) {
    piece(sh.lo, std::min(-t_neg, sh.hi));
  } else {
    const double a = std::max(t_neg, sh.left->start);
    piece(-a, std::min(-t_neg, sh.hi));
    auto mirrored = [&](double x) { return sq(-x); };
    mass += integrate_to_infinity(mirrored, a, 2.0 * sh.left->exponent, std::max(1.0, a), opt).value;
  }
  return mass;
}

enum class ConvMethod { Auto, Direct, Fft };

struct SimPlan {
  double t_pos = 0.0;            // kernel window on the positive side
  double t_neg = 0.0;            // and on the negative side
  double tail_mass = 0.0;        // relative L2 mass of f outside the window
  bool capped = false;           // window hit the cap 4 n Delta before reaching tail_tol
  long lag_pos = 0;              // fine-grid lags 0..lag_pos on the positive side
  long lag_neg = 0;              // and 1..lag_neg on the negative side
  std::int64_t anchor = 0;       // first global increment index
  std::size_t increments = 0;    // number of increments drawn per path
  ConvMethod method = ConvMethod::Direct;
  std::size_t fft_size = 0;
};

struct SimOptions {
  ConvMethod method = ConvMethod::Auto;
  long first_point = 1;                 // lattice index of the first output
  std::optional<std::int64_t> anchor{}; // override of the first increment index
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::size_t next_fft_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p7 = 1; p7 < best; p7 *= 7)
    for (std::size_t p5 = p7; p5 < best; p5 *= 5)
      for (std::size_t p3 = p5; p3 < best; p3 *= 3) {
        std::size_t v = p3;
        while (v < n) v <<= 1;
        best = std::min(best, v);
      }
  return best;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwFree>;

inline RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
inline ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~FftPlans() {
    std::lock_guard lock(fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

}  // namespace detail

/// Validated simulation setup: window, weight table and (if used) the kernel
/// spectrum are computed once and shared by every path.
class PathSimulator {
 public:
  explicit PathSimulator(SimConfig cfg, SimOptions opt = {}) : cfg_(std::move(cfg)), opt_(opt) {
    validate_config();
    cum_ = cumulants(cfg_.driver);
    const int m = cfg_.refinement;
    step_ = cfg_.delta / m;
    choose_window();
    const long lp = plan_.lag_pos;
    const long ln = plan_.lag_neg;
    const long first = opt_.first_point;
    const long last = first + cfg_.n - 1;
    plan_.anchor = opt_.anchor ? *opt_.anchor : static_cast<std::int64_t>(first) * m - lp;
    const std::int64_t j_hi = static_cast<std::int64_t>(last) * m + ln;
    if (j_hi < plan_.anchor) throw ConfigError("simulation anchor lies beyond the last increment");
    plan_.increments = static_cast<std::size_t>(j_hi - plan_.anchor + 1);

    // Weights w[l] = f(l delta) for l = -lag_neg .. max_lag, stored at l + lag_neg.
    const std::int64_t reach = static_cast<std::int64_t>(last) * m - plan_.anchor;
    const auto sh = kernel_shape(cfg_.kernel);
    std::int64_t max_lag = reach;
    if (std::isfinite(sh.hi)) max_lag = std::min<std::int64_t>(reach, static_cast<std::int64_t>(std::ceil(sh.hi / step_)) + 1);
    max_lag = std::max<std::int64_t>(max_lag, -ln);
    weights_.resize(static_cast<std::size_t>(max_lag + ln + 1));
    for (std::int64_t l = -ln; l <= max_lag; ++l)
      weights_[static_cast<std::size_t>(l + ln)] = eval_kernel(cfg_.kernel, (static_cast<double>(l) * cfg_.delta) / m);
    nonzero_ = static_cast<std::size_t>(std::count_if(weights_.begin(), weights_.end(), [](double w) { return w != 0.0; }));

    // Outputs sit at positions t = i m - anchor + lag_neg of the linear convolution.
    t_min_ = static_cast<std::size_t>(static_cast<std::int64_t>(first) * m - plan_.anchor + ln);
    const std::size_t fft_len =
        detail::next_fft_size(plan_.increments + weights_.size() - 1 - std::min(t_min_, plan_.increments - 1));
    const double direct_cost = static_cast<double>(cfg_.n) * static_cast<double>(nonzero_);
    const double fft_cost = 6.0 * static_cast<double>(fft_len) * std::log2(static_cast<double>(fft_len)) +
                            40.0 * static_cast<double>(fft_len);
    plan_.method = opt_.method == ConvMethod::Auto ? (direct_cost <= fft_cost ? ConvMethod::Direct : ConvMethod::Fft)
                                                   : opt_.method;
    if (plan_.method == ConvMethod::Fft) prepare_fft(fft_len);
  }

  const SimConfig& config() const { return cfg_; }
  const SimPlan& plan() const { return plan_; }
  const Cumulants& driver_cumulants() const { return cum_; }
  double fine_step() const { return step_; }
  /// w[l] = f(l delta), first entry at l = -lag_neg.
  const std::vector<double>& weights() const { return weights_; }

  /// Increments dL_j for j = anchor .. anchor + increments - 1.
  std::vector<double> increments(std::uint64_t seed, std::uint32_t stream = 0) const {
    std::vector<double> inc(plan_.increments);
    fill_increments(cfg_.driver, step_, seed, stream, plan_.anchor, inc);
    return inc;
  }

  /// Lattice values computed from a caller-supplied increment path.
  SampledSeries from_increments(std::span<const double> inc) const {
    if (inc.size() != plan_.increments) throw ConfigError("increment path has the wrong length");
    SampledSeries s;
    s.delta = cfg_.delta;
    s.mu = cfg_.mu;
    s.values.resize(static_cast<std::size_t>(cfg_.n));
    if (plan_.method == ConvMethod::Direct)
      convolve_direct(inc, s.values);
    else
      convolve_fft(inc, s.values);
    for (double& v : s.values) v = cfg_.mu + v;
    s.provenance = config_digest(cfg_);
    return s;
  }

  SampledSeries simulate(std::uint64_t seed, std::uint32_t stream = 0) const {
    const auto inc = increments(seed, stream);
    return from_increments(inc);
  }

  SampledSeries simulate() const { return simulate(cfg_.seed, 0); }

 private:
  void validate_config() const {
    if (cfg_.refinement < 1) throw ConfigError("refinement m must be at least 1");
    if (!(cfg_.delta > 0.0 && std::isfinite(cfg_.delta))) throw ConfigError("lattice spacing Delta must be positive");
    if (cfg_.n < 1) throw ConfigError("number of lattice samples n must be at least 1");
    if (!(cfg_.tail_tol > 0.0 && cfg_.tail_tol < 1.0)) throw ConfigError("tailTol must lie in (0, 1)");
    if (cfg_.truncation_t < 0.0 || !std::isfinite(cfg_.truncation_t)) throw ConfigError("truncationT must be >= 0");
    validate(cfg_.kernel);
    cumulants(cfg_.driver);
  }

  void choose_window() {
    const auto sh = kernel_shape(cfg_.kernel);
    const double norm = kernel_power_integral(cfg_.kernel, 2, 1e-12).value;
    if (!(norm > 0.0)) throw ConfigError("kernel vanishes almost everywhere");
    const double support_pos = std::max(0.0, sh.hi);
    const double support_neg = std::max(0.0, -sh.lo);
    auto rel_tail = [&](double t) {
      return kernel_tail_mass(cfg_.kernel, std::min(t, support_neg), std::min(t, support_pos)) / norm;
    };
    double t = 0.0;
    if (cfg_.truncation_t > 0.0) {
      t = cfg_.truncation_t;
      plan_.tail_mass = rel_tail(t);
      if (plan_.tail_mass > cfg_.tail_tol)
        throw ConfigError("kernel tail mass beyond T = " + std::to_string(t) + " is " + std::to_string(plan_.tail_mass) +
                          " of ||f||^2, above tailTol = " + std::to_string(cfg_.tail_tol));
    } else if (std::isfinite(support_pos) && std::isfinite(support_neg)) {
      t = std::max(support_pos, support_neg);
      plan_.tail_mass = 0.0;
    } else {
      const double cap = 4.0 * cfg_.n * cfg_.delta;
      double lo = 0.0;
      double hi = std::max(cfg_.delta, 2.0 * std::max(sh.right ? sh.right->start : 0.0, sh.left ? sh.left->start : 0.0));
      while (rel_tail(hi) > cfg_.tail_tol && hi < cap) {
        lo = hi;
        hi *= 2.0;
      }
      if (hi >= cap && rel_tail(cap) > cfg_.tail_tol) {
        t = cap;
        plan_.capped = true;
      } else {
        hi = std::min(hi, cap);
        for (int it = 0; it < 30 && hi - lo > 1e-3 * hi; ++it) {
          const double mid = 0.5 * (lo + hi);
          (rel_tail(mid) > cfg_.tail_tol ? lo : hi) = mid;
        }
        t = hi;
      }
      plan_.tail_mass = rel_tail(t);
    }
    plan_.t_pos = std::min(t, support_pos);
    plan_.t_neg = std::min(t, support_neg);
    const int m = cfg_.refinement;
    plan_.lag_pos = static_cast<long>(std::ceil(plan_.t_pos * m / cfg_.delta - 1e-9));
    plan_.lag_neg = static_cast<long>(std::ceil(plan_.t_neg * m / cfg_.delta - 1e-9));
  }

  void convolve_direct(std::span<const double> inc, std::vector<double>& out) const {
    const int m = cfg_.refinement;
    const std::int64_t ln = plan_.lag_neg;
    const auto nw = static_cast<std::int64_t>(weights_.size());
    for (long k = 0; k < cfg_.n; ++k) {
      const std::int64_t i = opt_.first_point + k;
      const std::int64_t base = i * m - plan_.anchor;  // increment offset for lag 0
      double acc = 0.0;
      const std::int64_t l_max = std::min<std::int64_t>(nw - 1 - ln, base);
      for (std::int64_t l = -ln; l <= l_max; ++l) {
        const double w = weights_[static_cast<std::size_t>(l + ln)];
        if (w == 0.0) continue;
        acc += w * inc[static_cast<std::size_t>(base - l)];
      }
      out[static_cast<std::size_t>(k)] = acc;
    }
  }

  void prepare_fft(std::size_t len) {
    plan_.fft_size = len;
    fft_len_ = len;
    auto in = detail::alloc_real(len);
    auto spec = detail::alloc_complex(len / 2 + 1);
    plans_ = std::make_shared<detail::FftPlans>();
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      plans_->forward = fftw_plan_dft_r2c_1d(static_cast<int>(len), in.get(), spec.get(), FFTW_ESTIMATE);
      plans_->backward = fftw_plan_dft_c2r_1d(static_cast<int>(len), spec.get(), in.get(), FFTW_ESTIMATE);
    }
    if (!plans_->forward || !plans_->backward) throw ConfigError("FFTW could not create a transform plan");
    std::fill(in.get(), in.get() + len, 0.0);
    // Weight lags beyond the buffer cannot reach any requested output.
    const std::size_t used = std::min(weights_.size(), len);
    std::copy(weights_.begin(), weights_.begin() + static_cast<std::ptrdiff_t>(used), in.get());
    fftw_execute_dft_r2c(plans_->forward, in.get(), spec.get());
    kernel_spectrum_.resize(len / 2 + 1);
    const double scale = 1.0 / static_cast<double>(len);
    for (std::size_t k = 0; k < kernel_spectrum_.size(); ++k)
      kernel_spectrum_[k] = std::complex<double>(spec.get()[k][0], spec.get()[k][1]) * scale;
  }

  void convolve_fft(std::span<const double> inc, std::vector<double>& out) const {
    const std::size_t len = fft_len_;
    auto buf = detail::alloc_real(len);
    auto spec = detail::alloc_complex(len / 2 + 1);
    std::fill(buf.get(), buf.get() + len, 0.0);
    std::copy(inc.begin(), inc.end(), buf.get());
    fftw_execute_dft_r2c(plans_->forward, buf.get(), spec.get());
    for (std::size_t k = 0; k < kernel_spectrum_.size(); ++k) {
      const std::complex<double> v = std::complex<double>(spec.get()[k][0], spec.get()[k][1]) * kernel_spectrum_[k];
      spec.get()[k][0] = v.real();
      spec.get()[k][1] = v.imag();
    }
    fftw_execute_dft_c2r(plans_->backward, spec.get(), buf.get());
    const int m = cfg_.refinement;
    for (long k = 0; k < cfg_.n; ++k) out[static_cast<std::size_t>(k)] = buf.get()[(t_min_ + static_cast<std::size_t>(k) * m) % len];
  }

  SimConfig cfg_;
  SimOptions opt_;
  Cumulants cum_;
  double step_ = 1.0;
  SimPlan plan_;
  std::vector<double> weights_;
  std::size_t nonzero_ = 0;
  std::size_t t_min_ = 0;
  std::size_t fft_len_ = 0;
  std::shared_ptr<detail::FftPlans> plans_;
  std::vector<std::complex<double>> kernel_spectrum_;
};

inline SampledSeries simulate_path(const SimConfig& cfg) { return PathSimulator(cfg).simulate(); }

/// Fractional noise X_0..X_n together with its differences Z_1..Z_n obtained
/// two ways: by differencing X and by simulating the differenced kernel on
/// the same increments from the same anchor.
struct FractionalPair {
  SampledSeries x;
  SampledSeries z_differenced;
  SampledSeries z_kernel;
};

inline FractionalPair simulate_fractional_pair(const SimConfig& cfg, std::uint32_t stream = 0,
                                               ConvMethod method = ConvMethod::Auto) {
  const auto fp = fractional_params(cfg.kernel);
  if (!fp || fp->absolute) throw ConfigError("fractional pair needs a FractionalPlus or DifferencedFractionalPlus kernel");
  if (std::abs(fp->delta - cfg.delta) > 1e-12 * cfg.delta)
    throw ConfigError("fractional pair needs the kernel increment equal to the lattice spacing");
  SimConfig xcfg = cfg;
  xcfg.kernel = KernelSpec{FractionalPlus{fp->d, fp->delta}};
  xcfg.n = cfg.n + 1;
  PathSimulator xs(xcfg, SimOptions{method, 0, std::nullopt});
  // Z_1..Z_n is the differenced kernel from the same anchor; the mean cancels.
  SimConfig zcfg = cfg;
  zcfg.kernel = KernelSpec{DifferencedFractionalPlus{fp->d, fp->delta}};
  zcfg.mu = 0.0;
  zcfg.truncation_t = xs.plan().t_pos;
  zcfg.tail_tol = std::max(cfg.tail_tol, xs.plan().tail_mass);
  PathSimulator zs(zcfg, SimOptions{method, 1, xs.plan().anchor});

  FractionalPair out;
  const auto inc = xs.increments(cfg.seed, stream);
  out.x = xs.from_increments(inc);
  out.z_kernel = zs.plan().increments == inc.size() ? zs.from_increments(inc)
                                                     : zs.from_increments(zs.increments(cfg.seed, stream));
  out.z_differenced.delta = cfg.delta;
  out.z_differenced.values = difference(out.x.values);
  out.z_differenced.provenance = out.x.provenance;
  // Report X_1..X_n as the noise series.
  out.x.values.erase(out.x.values.begin());
  return out;
}

}  // namespace levyma
