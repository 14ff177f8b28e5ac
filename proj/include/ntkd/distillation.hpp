#pragma once

namespace ntkd {

/// Soft ratio rho in [0, 1] and temperature T > 0 of the distillation loss
///   rho * H(sigma(z_t/T), sigma(z_s/T)) + (1 - rho) * H(y_g, sigma(z_s)).
struct DistillParams {
  double rho = 1.0;
  double T = 1.0;

  void validate() const;
};

struct LogitTriple {
  double z_t = 0.0;
  int y_g = 0;
  double z_s = 0.0;
};

double sigmoid(double z) noexcept;
/// sigma'(z) = sigma(z) sigma(-z)
double sigmoid_prime(double z) noexcept;
/// log(1 + e^z) without overflow.
double softplus(double z) noexcept;
/// sigma(a) - sigma(b), accurate when both saturate.
double sigmoid_diff(double a, double b) noexcept;
/// H(p, sigma(z)) = softplus(z) - p z.
double bce_with_logit(double p, double z) noexcept;

double distill_loss(double z_s, double z_t, int y_g, const DistillParams& params);

/// d loss / d z_s = (rho/T)(sigma(z_s/T) - sigma(z_t/T)) + (1 - rho)(sigma(z_s) - y_g).
double loss_gradient(double z_s, double z_t, int y_g, const DistillParams& params);

/// Saturation level used when pure hard labels make the effective logit infinite.
double z_max(double T) noexcept;

/// Root of loss_gradient in z_s by bracketed bisection. Throws
/// UnboundedSolutionError when rho == 0; the error carries the saturated value
/// sign(2 y_g - 1) * z_max(T).
double effective_logit(double z_t, int y_g, const DistillParams& params);

struct SaturatedLogit {
  double value = 0.0;
  bool saturated = false;
};

/// Like effective_logit, but returns the saturated value with a flag instead of
/// throwing when rho == 0.
SaturatedLogit effective_logit_or_saturate(double z_t, int y_g, const DistillParams& params);

/// T = 1 closed form: logit(rho sigma(z_t) + (1 - rho) y_g).
double effective_logit_closed_T1(double z_t, int y_g, double rho);

/// Correction logit delta z_h = T^2 (y_g - sigma(z_t)) / sigma'(z_t/T): the
/// first-order response of the effective logit to the hard ratio 1 - rho at
/// rho = 1.
double correction_logit(double z_t, int y_g, double T);

/// Effective logit of label smoothing with K = 2: +-log(2/eps - 1).
double label_smoothing_logit(int y_g, double eps);

}  // namespace ntkd
