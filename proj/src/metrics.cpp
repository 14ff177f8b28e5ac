#include "ntkd/metrics.hpp"

#include "ntkd/errors.hpp"
#include "ntkd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

namespace ntkd {

double weight_change_norm(const KernelMatrix& K, const Vec& dz) {
  if (dz.size() != K.size()) throw InvalidArgument("weight_change_norm: dimension mismatch");
  return std::sqrt(std::max(0.0, kernel_inner(K, dz, dz)));
}

double inefficiency_from_norms(std::size_t n, double mean_norm_n, double mean_norm_n1) {
  if (!(mean_norm_n > 0.0) || !(mean_norm_n1 > 0.0))
    throw DegenerateVectorError("data inefficiency needs positive mean norms");
  return static_cast<double>(n) * (std::log(mean_norm_n1) - std::log(mean_norm_n));
}

InefficiencyCurve inefficiency_from_law(const std::function<double(double)>& norm_law,
                                        const std::vector<std::size_t>& ns) {
  InefficiencyCurve curve;
  curve.repeats = 1;
  for (std::size_t n : ns) {
    InefficiencyPoint pt;
    pt.n = n;
    pt.mean_norm_n = norm_law(static_cast<double>(n));
    pt.mean_norm_n1 = norm_law(static_cast<double>(n + 1));
    pt.value = inefficiency_from_norms(n, pt.mean_norm_n, pt.mean_norm_n1);
    pt.used = 1;
    curve.ns.push_back(n);
    curve.log_mean_norm.push_back(std::log(pt.mean_norm_n));
    curve.I.push_back(pt.value);
    curve.points.push_back(pt);
  }
  return curve;
}

namespace {

struct RepeatNorms {
  bool ok = false;
  double norm_n1 = 0.0;
  double sum_norm_n = 0.0;  // summed over subsets
  std::size_t subsets = 0;
};

RepeatNorms repeat_norms(const KernelSample& s, std::size_t n, InefficiencyEstimator est) {
  if (s.K.size() != static_cast<Eigen::Index>(n + 1) || s.dz.size() != s.K.size()) {
    std::ostringstream os;
    os << "data_inefficiency: sampler returned " << s.K.size() << " points for n=" << n << ", expected n+1";
    throw InvalidArgument(os.str());
  }
  RepeatNorms r;
  const SpdSolver full(s.K);
  const Vec v = full.solve(s.dz);
  const double q_full = std::max(0.0, s.dz.dot(v));
  r.norm_n1 = std::sqrt(q_full);
  if (est == InefficiencyEstimator::leave_one_out) {
    const Vec inv_diag = full.inverse_diagonal();
    for (Eigen::Index i = 0; i < inv_diag.size(); ++i) {
      const double q = q_full - v[i] * v[i] / inv_diag[i];
      r.sum_norm_n += std::sqrt(std::max(0.0, q));
    }
    r.subsets = static_cast<std::size_t>(inv_diag.size());
  } else {
    const auto m = static_cast<Eigen::Index>(n);
    const KernelMatrix sub(s.K.entries().topLeftCorner(m, m), s.K.jitter());
    r.sum_norm_n = weight_change_norm(sub, s.dz.head(m));
    r.subsets = 1;
  }
  r.ok = std::isfinite(r.norm_n1) && std::isfinite(r.sum_norm_n);
  return r;
}

}  // namespace

InefficiencyCurve data_inefficiency(const KernelSampler& sampler, const std::vector<std::size_t>& ns,
                                    const InefficiencyOptions& options) {
  if (options.repeats < 1) throw InvalidArgument("data_inefficiency: repeats must be >= 1");
  for (std::size_t k = 0; k < ns.size(); ++k) {
    if (ns[k] < 2) throw InvalidArgument("data_inefficiency: grid points must be >= 2");
    if (k > 0 && ns[k] <= ns[k - 1]) throw InvalidArgument("data_inefficiency: grid must be strictly increasing");
  }
  const std::size_t R = options.repeats;
  std::vector<RepeatNorms> results(ns.size() * R);
  parallel_for(results.size(), options.threads, [&](std::size_t unit) {
    const std::size_t g = unit / R;
    const std::size_t rep = unit % R;
    try {
      results[unit] = repeat_norms(sampler(ns[g], rep), ns[g], options.estimator);
    } catch (const SingularKernelError&) {
      results[unit] = RepeatNorms{};
    }
  });

  InefficiencyCurve curve;
  curve.repeats = R;
  for (std::size_t g = 0; g < ns.size(); ++g) {
    InefficiencyPoint pt;
    pt.n = ns[g];
    double sum_n1 = 0.0, sum_n = 0.0;
    std::size_t subsets = 0;
    for (std::size_t rep = 0; rep < R; ++rep) {
      const RepeatNorms& r = results[g * R + rep];
      if (!r.ok) {
        ++pt.skipped;
        continue;
      }
      ++pt.used;
      sum_n1 += r.norm_n1;
      sum_n += r.sum_norm_n;
      subsets += r.subsets;
    }
    pt.unreliable = static_cast<double>(pt.skipped) > options.unreliable_fraction * static_cast<double>(R);
    if (pt.used > 0) {
      pt.mean_norm_n1 = sum_n1 / static_cast<double>(pt.used);
      pt.mean_norm_n = sum_n / static_cast<double>(subsets);
      pt.value = pt.mean_norm_n > 0.0 && pt.mean_norm_n1 > 0.0
                     ? inefficiency_from_norms(pt.n, pt.mean_norm_n, pt.mean_norm_n1)
                     : std::numeric_limits<double>::quiet_NaN();
    } else {
      pt.value = std::numeric_limits<double>::quiet_NaN();
    }
    curve.ns.push_back(pt.n);
    curve.log_mean_norm.push_back(pt.used > 0 ? std::log(pt.mean_norm_n) : std::numeric_limits<double>::quiet_NaN());
    curve.I.push_back(pt.value);
    curve.points.push_back(pt);
  }
  return curve;
}

std::vector<double> smooth_curve(const std::vector<double>& values, std::size_t window) {
  if (window % 2 == 0) throw InvalidArgument("smooth_curve: window must be odd");
  const std::size_t half = window / 2;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(values.size() - 1, i + half);
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) s += values[k];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double alpha_n(const WeightDelta& student, const WeightDelta& oracle, const WeightDelta& zero) {
  if (student.values.size() != oracle.values.size() || zero.values.size() != oracle.values.size())
    throw InvalidArgument("alpha_n: weight deltas have different layouts");
  return acute_angle(oracle.values - zero.values, student.values - zero.values);
}

double alpha_n_neglect_zero(double student_norm, double oracle_norm) {
  if (!(oracle_norm > 0.0)) throw DegenerateVectorError("alpha_n_neglect_zero: zero oracle norm");
  return std::acos(std::clamp(student_norm / oracle_norm, 0.0, 1.0));
}

Vec feature_abs_cosines(const NetConfig& cfg, const ParamVector& params0, const Mat& X, const Vec& direction) {
  const double dn = direction.norm();
  if (!(dn > 0.0)) throw DegenerateVectorError("feature_abs_cosines: zero direction");
  const BackpropTrace trace = backprop(cfg, params0, X);
  const Vec dots = trace_dot(cfg, trace, direction);
  const Vec norms = trace_sqnorms(cfg, trace).cwiseSqrt();
  Vec out(X.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!(norms[i] > 0.0)) throw DegenerateVectorError("feature_abs_cosines: zero feature vector");
    out[i] = std::min(1.0, std::abs(dots[i]) / (norms[i] * dn));
  }
  return out;
}

Vec eq7_abs_cosines(const Vec& z_eff, const Vec& theta_diag, double oracle_norm) {
  if (z_eff.size() != theta_diag.size()) throw InvalidArgument("eq7_abs_cosines: size mismatch");
  if (!(oracle_norm > 0.0)) throw DegenerateVectorError("eq7_abs_cosines: zero oracle norm");
  Vec out(z_eff.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!(theta_diag[i] > 0.0)) throw DegenerateVectorError("eq7_abs_cosines: non-positive kernel diagonal");
    out[i] = std::min(1.0, std::abs(z_eff[i]) / (oracle_norm * std::sqrt(theta_diag[i])));
  }
  return out;
}

AngleCurve angle_distribution(const Vec& abs_cosines, std::size_t grid_points) {
  if (grid_points < 2) throw InvalidArgument("angle_distribution: need at least 2 grid points");
  if (abs_cosines.size() == 0) throw InvalidArgument("angle_distribution: no samples");
  std::vector<double> angles(static_cast<std::size_t>(abs_cosines.size()));
  for (Eigen::Index i = 0; i < abs_cosines.size(); ++i)
    angles[static_cast<std::size_t>(i)] = std::acos(std::clamp(std::abs(abs_cosines[i]), 0.0, 1.0));
  std::sort(angles.begin(), angles.end());

  AngleCurve c;
  c.samples = angles.size();
  const auto G = static_cast<Eigen::Index>(grid_points);
  c.beta = Vec::LinSpaced(G, 0.0, std::numbers::pi / 2.0);
  c.p.resize(G);
  c.half_width.resize(G);
  const double N = static_cast<double>(c.samples);
  for (Eigen::Index g = 0; g < G; ++g) {
    // count of angles strictly greater than beta
    const auto above = angles.end() - std::upper_bound(angles.begin(), angles.end(), c.beta[g]);
    const double p = static_cast<double>(above) / N;
    c.p[g] = p;
    c.half_width[g] = 1.96 * std::sqrt(p * (1.0 - p) / N);
  }
  return c;
}

double risk_bound(const AngleCurve& curve, double alpha) {
  const double half_pi = std::numbers::pi / 2.0;
  if (!(alpha >= 0.0 && alpha <= half_pi + 1e-12)) throw InvalidArgument("risk_bound: alpha outside [0, pi/2]");
  if (curve.beta.size() < 2) throw InvalidArgument("risk_bound: empty angle curve");
  const double beta = std::clamp(half_pi - alpha, 0.0, half_pi);
  const double step = curve.beta[curve.beta.size() - 1] / static_cast<double>(curve.beta.size() - 1);
  // Snap to the grid when within rounding of a node, otherwise take the node below.
  double pos = beta / step;
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-9) pos = nearest;
  const auto idx = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), 0, curve.beta.size() - 1);
  return curve.p[idx];
}

RiskEstimate empirical_risk(const Vec& z_student, const Vec& z_teacher) {
  if (z_student.size() != z_teacher.size()) throw InvalidArgument("empirical_risk: size mismatch");
  if (z_student.size() == 0) throw InvalidArgument("empirical_risk: no samples");
  RiskEstimate r;
  r.samples = static_cast<std::size_t>(z_student.size());
  for (Eigen::Index i = 0; i < z_student.size(); ++i) {
    if (z_student[i] == 0.0 || z_teacher[i] == 0.0) {
      ++r.ties;
      ++r.disagreements;
    } else if ((z_student[i] > 0.0) != (z_teacher[i] > 0.0)) {
      ++r.disagreements;
    }
  }
  const double N = static_cast<double>(r.samples);
  r.risk = static_cast<double>(r.disagreements) / N;
  r.std_error = std::sqrt(r.risk * (1.0 - r.risk) / N);
  return r;
}

RiskEstimate empirical_risk(const LogitFn& student, const LogitFn& teacher, const InputSampler& sampler,
                            std::size_t N) {
  if (N < 1) throw InvalidArgument("empirical_risk: N must be >= 1");
  const Mat X = sampler(N);
  return empirical_risk(student(X), teacher(X));
}

PowerLawFit fit_power_law(const std::vector<double>& ns, const std::vector<double>& values) {
  if (ns.size() != values.size()) throw InvalidArgument("fit_power_law: size mismatch");
  if (ns.size() < 3) throw InvalidArgument("fit_power_law: need at least 3 points");
  const std::size_t k = ns.size();
  Vec lx(static_cast<Eigen::Index>(k)), ly(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    if (!(ns[i] > 0.0) || !(values[i] > 0.0)) throw InvalidArgument("fit_power_law: values must be positive");
    lx[static_cast<Eigen::Index>(i)] = std::log(ns[i]);
    ly[static_cast<Eigen::Index>(i)] = std::log(values[i]);
  }
  const double mx = lx.mean(), my = ly.mean();
  const Vec cx = lx.array() - mx;
  const Vec cy = ly.array() - my;
  const double sxx = cx.squaredNorm();
  if (!(sxx > 0.0)) throw InvalidArgument("fit_power_law: all sample sizes equal");
  PowerLawFit fit;
  fit.exponent = cx.dot(cy) / sxx;
  fit.intercept = my - fit.exponent * mx;
  const Vec res = ly - (fit.intercept + fit.exponent * lx.array()).matrix();
  fit.residual = std::sqrt(res.squaredNorm() / static_cast<double>(k));
  return fit;
}

}  // namespace ntkd
