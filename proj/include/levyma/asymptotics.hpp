#pragma once

/// Limit covariances of lattice-sampled moving averages:
///   V  for sqrt(n)(gamma*(p Delta) - gamma(p Delta)), p = 0..h
///   W  for sqrt(n)(rho*(i Delta) - rho(i Delta)),     i = 1..h
/// with W = Bartlett part + fourth-cumulant correction, plus the sample-mean
/// variance, the fourth moment of kernel integrals and delta-method
/// variances of the Hurst estimators.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "levyma/acf.hpp"
#include "levyma/drivers.hpp"
#include "levyma/errors.hpp"
#include "levyma/estimate.hpp"
#include "levyma/kernels.hpp"
#include "levyma/lattice.hpp"
#include "levyma/quadrature.hpp"

namespace levyma {

/// (eta - 3) sigma^4 \int f^4 + 3 sigma^4 (\int f^2)^2.
inline double fourth_moment_integral(const KernelSpec& kernel, const Cumulants& cum, double tol = 1e-10) {
  const double f2 = kernel_power_integral(kernel, 2, tol).value;
  const double f4 = kernel_power_integral(kernel, 4, tol).value;
  return cum.fourth_cumulant * f4 + 3.0 * cum.sigma2 * cum.sigma2 * f2 * f2;
}

struct MeanAsymptotics {
  double variance = 0.0;
  double mu = 0.0;
  double error = 0.0;
};

/// sigma^2 \int_0^Delta (sum_j f(u + j Delta))^2 du. Requires f in L1 and
/// the lattice absolute sum in L2([0, Delta]).
inline MeanAsymptotics mean_asymptotic_variance(const KernelSpec& kernel, double Delta, double sigma2,
                                                double tol = 1e-10, double mu = 0.0) {
  const auto sh = kernel_shape(kernel);
  if (!sh.integrable)
    throw ConditionViolation("sample-mean CLT: kernel is not integrable, so F_Delta is not in L1([0, Delta])");
  if (!sh.abs_sum_square_integrable)
    throw ConditionViolation("sample-mean CLT: F_Delta(u) = sum_j |f(u + j Delta)| is not in L2([0, Delta])");
  if (!(sigma2 > 0.0)) throw ConfigError("driver variance must be positive");
  const auto br = lattice_breakpoints(kernel, Delta);
  const double fold_tol = 0.01 * tol / Delta;
  auto integrand = [&](double u) {
    const double s = lattice_sum(kernel, Delta, u, fold_tol).value;
    return s * s;
  };
  QuadOptions opt;
  opt.tol = tol / sigma2;
  const auto r = integrate(integrand, std::span<const double>(br), opt);
  return {sigma2 * r.value, mu, sigma2 * r.error};
}

/// gamma(k Delta) for every integer k, from quadrature near the origin and
/// an analytic tail model beyond it.
class AutocovSequence {
 public:
  static constexpr long kExplicitLags = 4096;

  AutocovSequence(const KernelSpec& kernel, double sigma2, double Delta, int min_lags, double tol)
      : delta_(Delta) {
    const auto sh = kernel_shape(kernel);
    frac_ = fractional_params(kernel);
    if (std::isfinite(sh.lo) && std::isfinite(sh.hi)) {
      const double width = sh.hi - sh.lo;
      last_ = static_cast<long>(std::ceil(width / Delta - 1e-12));
      const auto acf = autocov_quadrature(kernel, sigma2, Delta, static_cast<int>(std::max<long>(last_, min_lags)), tol);
      table_ = acf.gamma;
      quad_error_ = acf.quad_error;
      decay_ = std::numeric_limits<double>::infinity();
    } else if (frac_) {
      const int q = std::max(min_lags, 16);
      const auto acf = autocov_quadrature(kernel, sigma2, Delta, q, tol);
      quad_error_ = acf.quad_error;
      table_ = acf.gamma;
      scale_ = acf.gamma[0] / fractional_acf_shape(frac_->d, 0.0, frac_->differenced);
      for (long k = q + 1; k <= kExplicitLags + min_lags + 2; ++k) table_.push_back(closed(static_cast<double>(k)));
      decay_ = frac_->differenced ? 3.0 - 2.0 * frac_->d : 1.0 - 2.0 * frac_->d;
    } else {
      throw ConvergenceError("no autocovariance tail envelope is available for the " + family_name(kernel) +
                             " kernel; lattice sums of gamma cannot be truncated with a certified bound");
    }
  }

  double operator()(double k) const {
    k = std::abs(k);
    const double r = std::round(k);
    if (std::abs(k - r) < 1e-12 && r < static_cast<double>(table_.size())) return table_[static_cast<std::size_t>(r)];
    if (compact()) return 0.0;
    return closed(k);
  }

  bool compact() const { return !frac_.has_value(); }
  long last_nonzero() const { return last_; }
  double decay() const { return decay_; }
  double quad_error() const { return quad_error_; }
  double gamma0() const { return table_[0]; }

 private:
  double closed(double k) const { return scale_ * fractional_acf_shape(frac_->d, k * delta_ / frac_->delta, frac_->differenced); }

  double delta_;
  std::optional<FractionalParams> frac_;
  std::vector<double> table_;
  double scale_ = 0.0;
  double decay_ = 0.0;
  double quad_error_ = 0.0;
  long last_ = 0;
};

struct TruncationReport {
  long ksum_explicit_terms = 0;
  double ksum_tail_bound = 0.0;      // largest Euler-Maclaurin remainder estimate over all k-sums
  double acf_quad_error = 0.0;       // per-lag quadrature error of gamma
  double fold_truncation = 0.0;      // per-evaluation tail bound of g_q
  double integral_error = 0.0;       // largest error estimate of the [0, Delta] integrals
};

enum class Statistic { Star, Hat };

struct AsymptoticCov {
  int h = 0;
  double gamma0 = 0.0;
  std::vector<double> rho;          // rho(0..h)
  Eigen::MatrixXd V;                // (h+1) x (h+1)
  Eigen::MatrixXd W;                // h x h
  Eigen::MatrixXd WBartlett;
  Eigen::MatrixXd WCorrection;
  Eigen::MatrixXd WQuadratic;       // W from the quadratic form in V entries
  TruncationReport truncation;
};

namespace detail {

struct KSum {
  double value = 0.0;
  double tail_error = 0.0;
  long terms = 0;
};

/// sum_{k >= 1} term(k) where term is a product of two autocovariances.
template <class Term>
KSum one_sided_ksum(const AutocovSequence& g, int h, Term&& term, double tol) {
  KSum out;
  if (g.compact()) {
    const long K = g.last_nonzero() + h + 1;
    for (long k = 1; k <= K; ++k) out.value += term(static_cast<double>(k));
    out.terms = K;
    return out;
  }
  const double decay = 2.0 * g.decay();
  if (!(decay > 1.0))
    throw ConditionViolation("sum_k gamma(k Delta)^2 diverges for this kernel (gamma decays like k^-" +
                             std::to_string(g.decay()) + "); the asymptotic covariance does not exist");
  const long K = AutocovSequence::kExplicitLags;
  for (long k = 1; k <= K; ++k) out.value += term(static_cast<double>(k));
  QuadOptions opt;
  opt.tol = tol;
  const auto tail = euler_maclaurin_tail(term, static_cast<double>(K + 1), decay, opt);
  out.value += tail.value;
  out.tail_error = tail.error;
  out.terms = K;
  return out;
}

inline void check_psd(const Eigen::MatrixXd& m, const char* name) {
  if (m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double floor = -1e-8 * std::max(1.0, std::abs(m.trace()));
  if (es.eigenvalues().minCoeff() < floor)
    throw ConditionViolation(std::string(name) + " is not positive semidefinite (min eigenvalue " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
}

/// \int_0^Delta g_p g_q du for p, q = 0..h, sharing fold evaluations.
inline Eigen::MatrixXd fold_gram(const KernelSpec& kernel, double Delta, int h, double tol, TruncationReport& rep) {
  const auto br = lattice_breakpoints(kernel, Delta);
  const double fold_tol = 1e-3 * tol / Delta;
  rep.fold_truncation = fold_tol;
  std::map<double, Eigen::VectorXd> memo;
  auto folds = [&](double u) -> const Eigen::VectorXd& {
    auto it = memo.find(u);
    if (it != memo.end()) return it->second;
    Eigen::VectorXd v(h + 1);
    for (int q = 0; q <= h; ++q) v[q] = lattice_fold(kernel, Delta, q, u, fold_tol).value;
    return memo.emplace(u, std::move(v)).first->second;
  };
  Eigen::MatrixXd G(h + 1, h + 1);
  QuadOptions opt;
  opt.tol = tol;
  for (int p = 0; p <= h; ++p) {
    for (int q = p; q <= h; ++q) {
      const auto r = integrate([&](double u) { const auto& v = folds(u); return v[p] * v[q]; },
                               std::span<const double>(br), opt);
      G(p, q) = G(q, p) = r.value;
      rep.integral_error = std::max(rep.integral_error, r.error);
    }
  }
  return G;
}

inline void check_statistic(const KernelSpec& kernel, Statistic stat) {
  if (stat != Statistic::Hat) return;
  const auto sh = kernel_shape(kernel);
  if (!sh.abs_sum_square_integrable || !sh.integrable)
    throw ConditionViolation(
        "asymptotics of the mean-corrected estimators (gamma-hat, rho-hat) need F_Delta(u) = sum_j |f(u + j Delta)| "
        "in L2([0, Delta]); this condition fails for the " + family_name(kernel) + " kernel");
}

inline void check_common(double Delta, int h, double tol) {
  if (!(Delta > 0.0 && std::isfinite(Delta))) throw ConfigError("lattice spacing Delta must be positive");
  if (h < 0) throw ConfigError("number of lags h must be non-negative");
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
}

}  // namespace detail

/// V: v_pq = (eta - 3) sigma^4 \int_0^Delta g_p g_q du
///           + sum_k [gamma(k) gamma(k - p + q) + gamma(k + q) gamma(k - p)].
inline AsymptoticCov cov_matrix_V(const KernelSpec& kernel, double Delta, const Cumulants& cum, int h,
                                  double tol = 1e-10, Statistic stat = Statistic::Star) {
  detail::check_common(Delta, h, tol);
  detail::check_statistic(kernel, stat);
  AsymptoticCov out;
  out.h = h;
  AutocovSequence g(kernel, cum.sigma2, Delta, h + 2, 1e-3 * tol);
  out.gamma0 = g.gamma0();
  for (int i = 0; i <= h; ++i) out.rho.push_back(g(i) / g.gamma0());
  out.truncation.acf_quad_error = g.quad_error();

  out.V.resize(h + 1, h + 1);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(h + 1, h + 1);
  if (cum.fourth_cumulant != 0.0) G = detail::fold_gram(kernel, Delta, h, tol, out.truncation);
  for (int p = 0; p <= h; ++p) {
    for (int q = p; q <= h; ++q) {
      auto term = [&](double k) { return g(k) * g(k - p + q) + g(k + q) * g(k - p); };
      auto sym = [&](double k) { return term(k) + term(-k); };
      const auto s = detail::one_sided_ksum(g, h, sym, 1e-3 * tol);
      out.truncation.ksum_explicit_terms = s.terms;
      out.truncation.ksum_tail_bound = std::max(out.truncation.ksum_tail_bound, s.tail_error);
      out.V(p, q) = out.V(q, p) = cum.fourth_cumulant * G(p, q) + term(0.0) + s.value;
    }
  }
  detail::check_psd(out.V, "V");
  return out;
}

/// W = WBartlett + WCorrection with
///   WBartlett_ij = sum_{k >= 1} (rho(k+i) + rho(k-i) - 2 rho(i) rho(k))(rho(k+j) + rho(k-j) - 2 rho(j) rho(k))
///   WCorrection_ij = (eta - 3) sigma^4 / gamma(0)^2 \int_0^Delta (g_i - rho(i) g_0)(g_j - rho(j) g_0) du,
/// and the quadratic-form route WQuadratic from V for cross-checking.
inline AsymptoticCov corr_matrix_W(const KernelSpec& kernel, double Delta, const Cumulants& cum, int h,
                                   double tol = 1e-10, Statistic stat = Statistic::Star) {
  if (h < 1) throw ConfigError("W needs at least one lag");
  auto out = cov_matrix_V(kernel, Delta, cum, h, tol, stat);
  AutocovSequence g(kernel, cum.sigma2, Delta, h + 2, 1e-3 * tol);
  const double g0 = g.gamma0();
  auto rho = [&](double k) { return g(k) / g0; };

  out.WBartlett.resize(h, h);
  out.WCorrection = Eigen::MatrixXd::Zero(h, h);
  out.WQuadratic.resize(h, h);
  for (int i = 1; i <= h; ++i) {
    for (int j = i; j <= h; ++j) {
      const double ri = rho(i), rj = rho(j);
      auto term = [&](double k) {
        return (rho(k + i) + rho(k - i) - 2.0 * ri * rho(k)) * (rho(k + j) + rho(k - j) - 2.0 * rj * rho(k));
      };
      const auto s = detail::one_sided_ksum(g, h, term, 1e-3 * tol / (g0 * g0));
      out.truncation.ksum_tail_bound = std::max(out.truncation.ksum_tail_bound, s.tail_error);
      out.WBartlett(i - 1, j - 1) = out.WBartlett(j - 1, i - 1) = s.value;
    }
  }
  if (cum.fourth_cumulant != 0.0) {
    const auto G = detail::fold_gram(kernel, Delta, h, tol, out.truncation);
    const double c = cum.fourth_cumulant / (g0 * g0);
    for (int i = 1; i <= h; ++i)
      for (int j = 1; j <= h; ++j) {
        const double ri = rho(i), rj = rho(j);
        out.WCorrection(i - 1, j - 1) = c * (G(i, j) - ri * G(0, j) - rj * G(i, 0) + ri * rj * G(0, 0));
      }
    out.WCorrection = 0.5 * (out.WCorrection + out.WCorrection.transpose()).eval();
  }
  out.W = out.WBartlett + out.WCorrection;
  for (int i = 1; i <= h; ++i)
    for (int j = 1; j <= h; ++j) {
      const double ri = rho(i), rj = rho(j);
      out.WQuadratic(i - 1, j - 1) =
          (out.V(i, j) - ri * out.V(0, j) - rj * out.V(i, 0) + ri * rj * out.V(0, 0)) / (g0 * g0);
    }
  detail::check_psd(out.W, "W");
  return out;
}

/// Two-sided Bartlett form sum_{k in Z} [rho(k+i) rho(k+j) + rho(k-i) rho(k+j) + 2 rho(i) rho(j) rho(k)^2
/// - 2 rho(i) rho(k) rho(k+j) - 2 rho(j) rho(k) rho(k+i)], for cross-checking the one-sided form.
inline Eigen::MatrixXd bartlett_two_sided(const KernelSpec& kernel, double Delta, double sigma2, int h,
                                          double tol = 1e-10) {
  AutocovSequence g(kernel, sigma2, Delta, h + 2, 1e-3 * tol);
  const double g0 = g.gamma0();
  auto rho = [&](double k) { return g(k) / g0; };
  Eigen::MatrixXd B(h, h);
  for (int i = 1; i <= h; ++i)
    for (int j = 1; j <= h; ++j) {
      const double ri = rho(i), rj = rho(j);
      auto term = [&](double k) {
        return rho(k + i) * rho(k + j) + rho(k - i) * rho(k + j) + 2.0 * ri * rj * rho(k) * rho(k) -
               2.0 * ri * rho(k) * rho(k + j) - 2.0 * rj * rho(k) * rho(k + i);
      };
      auto sym = [&](double k) { return term(k) + term(-k); };
      B(i - 1, j - 1) = term(0.0) + detail::one_sided_ksum(g, h, sym, 1e-3 * tol).value;
    }
  return B;
}

enum class HurstKind { DHat, DTilde };

/// Delta-method variance of sqrt(n)(d_est - d):
///   d-hat:   W_11 / ((1 + rho(1)) 2 ln 2)^2 for the noise X
///   d-tilde: W_Z,11 / phi'(d)^2 for the differenced noise Z
inline double hurst_delta_variance(const KernelSpec& kernel, double Delta, const Cumulants& cum, HurstKind which,
                                   double tol = 1e-10) {
  const auto fp = fractional_params(kernel);
  if (!fp) throw ConfigError("Hurst delta-method variance needs a fractional kernel");
  if (which == HurstKind::DHat) {
    if (fp->differenced) throw ConfigError("d-hat applies to the undifferenced noise");
    const auto a = corr_matrix_W(kernel, Delta, cum, 1, tol);
    const double denom = (1.0 + a.rho[1]) * 2.0 * std::log(2.0);
    return a.W(0, 0) / (denom * denom);
  }
  KernelSpec z = kernel;
  if (!fp->differenced) z = KernelSpec{DifferencedFractionalPlus{fp->d, fp->delta}};
  if (fp->absolute) throw ConfigError("d-tilde variance is implemented for the FractionalPlus family");
  const auto a = corr_matrix_W(z, Delta, cum, 1, tol);
  const double dp = phi_derivative(fp->d);
  return a.W(0, 0) / (dp * dp);
}

}  // namespace levyma
