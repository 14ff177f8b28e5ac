#pragma once

#include "ntkd/linalg.hpp"
#include "ntkd/network.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace ntkd {

/// ||dw_n|| = sqrt(dz^T Theta_n^{-1} dz), with dz = targets - initial logits.
double weight_change_norm(const KernelMatrix& K, const Vec& dz);

// --- data inefficiency ----------------------------------------------------

/// Kernel and logit deltas over n + 1 points for one repeat.
struct KernelSample {
  KernelMatrix K;
  Vec dz;
};

/// Must be a pure function of (n, repeat).
using KernelSampler = std::function<KernelSample(std::size_t n, std::size_t repeat)>;

enum class InefficiencyEstimator {
  /// E||dw_n|| averages over all n + 1 leave-one-out subsets of the augmented
  /// sample, using dz^T A^{-1} dz - v_i^2 / (A^{-1})_ii with v = A^{-1} dz.
  leave_one_out,
  /// E||dw_n|| uses only the first n points.
  last_point,
};

struct InefficiencyOptions {
  std::size_t repeats = 20;
  InefficiencyEstimator estimator = InefficiencyEstimator::leave_one_out;
  /// A grid point with more than this fraction of singular repeats is unreliable.
  double unreliable_fraction = 0.2;
  unsigned threads = 1;
};

struct InefficiencyPoint {
  std::size_t n = 0;
  double mean_norm_n = 0.0;
  double mean_norm_n1 = 0.0;
  double value = 0.0;  // I(n)
  std::size_t used = 0;
  std::size_t skipped = 0;
  bool unreliable = false;
};

struct InefficiencyCurve {
  std::vector<std::size_t> ns;
  /// ln E||dw_n||
  std::vector<double> log_mean_norm;
  std::vector<double> I;
  std::size_t repeats = 0;
  std::vector<InefficiencyPoint> points;
};

/// I(n) = n [ln E||dw_{n+1}|| - ln E||dw_n||]; the mean is over repeats (and
/// subsets), taken before the logarithm.
double inefficiency_from_norms(std::size_t n, double mean_norm_n, double mean_norm_n1);

/// I(n) on a grid for a deterministic norm law n -> ||dw_n||.
InefficiencyCurve inefficiency_from_law(const std::function<double(double)>& norm_law,
                                        const std::vector<std::size_t>& ns);

InefficiencyCurve data_inefficiency(const KernelSampler& sampler, const std::vector<std::size_t>& ns,
                                    const InefficiencyOptions& options = {});

/// Centered moving average of odd width over a curve, for plotting only.
std::vector<double> smooth_curve(const std::vector<double>& values, std::size_t window);

// --- angles and risk ------------------------------------------------------

/// Acute angle between dw_* - dw_z and dw_student - dw_z.
double alpha_n(const WeightDelta& student, const WeightDelta& oracle, const WeightDelta& zero);

/// acos(min(1, ||dw_student|| / ||dw_*||)), the small-zero-change approximation.
double alpha_n_neglect_zero(double student_norm, double oracle_norm);

/// |cos| between phi(x_i) and `direction`, computed from backprop traces.
Vec feature_abs_cosines(const NetConfig& cfg, const ParamVector& params0, const Mat& X, const Vec& direction);

/// |cos| = |z_eff(x)| / (||dw_* - dw_z|| sqrt(Theta(x, x))), clamped to 1.
Vec eq7_abs_cosines(const Vec& z_eff, const Vec& theta_diag, double oracle_norm);

struct AngleCurve {
  Vec beta;
  /// P[angle > beta]
  Vec p;
  std::size_t samples = 0;
  /// 95% normal-approximation half-widths.
  Vec half_width;
};

/// Survival curve of acos(|cos|) on a uniform grid of [0, pi/2].
AngleCurve angle_distribution(const Vec& abs_cosines, std::size_t grid_points = 512);

/// p(pi/2 - alpha), read at the grid point at or below pi/2 - alpha. Because p
/// is nonincreasing this never falls below the interpolated value.
double risk_bound(const AngleCurve& curve, double alpha);

struct RiskEstimate {
  double risk = 0.0;
  std::size_t disagreements = 0;  // including ties
  std::size_t ties = 0;
  std::size_t samples = 0;
  /// sqrt(risk (1 - risk) / N)
  double std_error = 0.0;
};

/// Fraction of samples where z_student z_teacher < 0; a zero logit on either
/// side counts as a disagreement and is also reported as a tie.
RiskEstimate empirical_risk(const Vec& z_student, const Vec& z_teacher);

using LogitFn = std::function<Vec(const Mat& X)>;
using InputSampler = std::function<Mat(std::size_t n)>;

RiskEstimate empirical_risk(const LogitFn& student, const LogitFn& teacher, const InputSampler& sampler,
                            std::size_t N);

struct PowerLawFit {
  double exponent = 0.0;
  double intercept = 0.0;
  /// RMS residual of the log-log fit.
  double residual = 0.0;
};

/// Least squares of ln value on ln n.
PowerLawFit fit_power_law(const std::vector<double>& ns, const std::vector<double>& values);

}  // namespace ntkd
