#include "ntkd/distillation.hpp"

#include "ntkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ntkd {

namespace {

constexpr double kResidualTol = 1e-12;
constexpr int kMaxBracketDoublings = 64;
constexpr int kMaxBisections = 2000;

void require_binary(int y_g) {
  if (y_g != 0 && y_g != 1) throw InvalidArgument("hard label must be 0 or 1");
}

// sigma(z) - y for binary y without cancellation.
double hard_residual(double z, int y_g) noexcept { return y_g == 1 ? -sigmoid(-z) : sigmoid(z); }

// log|sinh(u)| for u != 0
double log_abs_sinh(double u) noexcept {
  const double a = std::abs(u);
  return a + std::log(-std::expm1(-2.0 * a)) - std::numbers::ln2;
}

double log_cosh(double v) noexcept {
  const double a = std::abs(v);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace

void DistillParams::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    std::ostringstream os;
    os << "soft ratio rho=" << rho << " outside [0, 1]";
    throw InvalidArgument(os.str());
  }
  if (!(T > 0.0) || !std::isfinite(T)) {
    std::ostringstream os;
    os << "temperature T=" << T << " must be positive";
    throw InvalidArgument(os.str());
  }
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double sigmoid_prime(double z) noexcept { return sigmoid(z) * sigmoid(-z); }

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid_diff(double a, double b) noexcept {
  if (a == b) return 0.0;
  // sigma(a) - sigma(b) = sinh((a-b)/2) / (2 cosh(a/2) cosh(b/2)), in log space
  const double u = 0.5 * (a - b);
  const double log_mag = log_abs_sinh(u) - std::numbers::ln2 - log_cosh(0.5 * a) - log_cosh(0.5 * b);
  return std::copysign(std::exp(log_mag), u);
}

double bce_with_logit(double p, double z) noexcept { return softplus(z) - p * z; }

double distill_loss(double z_s, double z_t, int y_g, const DistillParams& params) {
  params.validate();
  require_binary(y_g);
  const double soft = bce_with_logit(sigmoid(z_t / params.T), z_s / params.T);
  const double hard = bce_with_logit(static_cast<double>(y_g), z_s);
  return params.rho * soft + (1.0 - params.rho) * hard;
}

double loss_gradient(double z_s, double z_t, int y_g, const DistillParams& params) {
  require_binary(y_g);
  const double soft = sigmoid_diff(z_s / params.T, z_t / params.T);
  return params.rho / params.T * soft + (1.0 - params.rho) * hard_residual(z_s, y_g);
}

double z_max(double T) noexcept { return 30.0 * std::max(1.0, T); }

double effective_logit(double z_t, int y_g, const DistillParams& params) {
  params.validate();
  require_binary(y_g);
  if (!std::isfinite(z_t)) throw InvalidArgument("effective_logit: non-finite teacher logit");
  if (params.rho == 0.0) {
    const double sat = (2 * y_g - 1) * z_max(params.T);
    throw UnboundedSolutionError("effective_logit: rho = 0 leaves only hard labels; the minimizer is at infinity",
                                 sat);
  }
  // With rho = 1 the residual is (1/T)(sigma(z/T) - sigma(z_t/T)), zero exactly at z_t.
  if (params.rho == 1.0) return z_t;

  auto residual = [&](double z) { return loss_gradient(z, z_t, y_g, params); };

  double lo = -z_max(params.T);
  double hi = z_max(params.T);
  for (int i = 0; residual(lo) > 0.0; ++i) {
    if (i == kMaxBracketDoublings) throw NumericalError("effective_logit: could not bracket root from below");
    lo *= 2.0;
  }
  for (int i = 0; residual(hi) < 0.0; ++i) {
    if (i == kMaxBracketDoublings) throw NumericalError("effective_logit: could not bracket root from above");
    hi *= 2.0;
  }

  double g_lo = residual(lo);
  double g_hi = residual(hi);
  if (g_lo == 0.0) return lo;
  if (g_hi == 0.0) return hi;
  for (int it = 0; it < kMaxBisections; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double g_mid = residual(mid);
    if (g_mid == 0.0) return mid;
    if (g_mid < 0.0) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
      g_hi = g_mid;
    }
  }
  const bool take_lo = std::abs(g_lo) <= std::abs(g_hi);
  const double root = take_lo ? lo : hi;
  const double res = take_lo ? g_lo : g_hi;
  if (!(std::abs(res) <= kResidualTol)) {
    std::ostringstream os;
    os << "effective_logit: residual " << res << " above tolerance at z=" << root;
    throw NumericalError(os.str());
  }
  return root;
}

SaturatedLogit effective_logit_or_saturate(double z_t, int y_g, const DistillParams& params) {
  try {
    return {effective_logit(z_t, y_g, params), false};
  } catch (const UnboundedSolutionError& e) {
    return {e.saturated_value(), true};
  }
}

double effective_logit_closed_T1(double z_t, int y_g, double rho) {
  require_binary(y_g);
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("effective_logit_closed_T1: rho outside [0, 1]");
  if (y_g == 1) {
    // 1 - p = rho * sigma(-z_t)
    const double q = rho * sigmoid(-z_t);
    if (!(q > 0.0)) throw UnboundedSolutionError("effective_logit_closed_T1: probability is exactly 1", z_max(1.0));
    return std::log1p(-q) - std::log(q);
  }
  const double p = rho * sigmoid(z_t);
  if (!(p > 0.0)) throw UnboundedSolutionError("effective_logit_closed_T1: probability is exactly 0", -z_max(1.0));
  return std::log(p) - std::log1p(-p);
}

double correction_logit(double z_t, int y_g, double T) {
  require_binary(y_g);
  if (!(T > 0.0)) throw InvalidArgument("correction_logit: temperature must be positive");
  if (std::abs(z_t / T) > 500.0) {
    std::ostringstream os;
    os << "correction_logit: sigma'(z_t/T) underflows at z_t/T=" << z_t / T;
    throw NumericalError(os.str());
  }
  const double numerator = y_g == 1 ? sigmoid(-z_t) : -sigmoid(z_t);
  return T * T * numerator / sigmoid_prime(z_t / T);
}

double label_smoothing_logit(int y_g, double eps) {
  require_binary(y_g);
  if (!(eps > 0.0 && eps <= 1.0)) {
    std::ostringstream os;
    os << "label smoothing eps=" << eps << " outside (0, 1]";
    throw InvalidArgument(os.str());
  }
  const double a = std::log(2.0 / eps - 1.0);
  return y_g == 1 ? a : -a;
}

}  // namespace ntkd
