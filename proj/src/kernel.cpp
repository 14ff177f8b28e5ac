#include "ntkd/kernel.hpp"

#include "ntkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace ntkd {

namespace {

struct LayerStep {
  double sigma = 0.0;
  double sigma_dot = 0.0;
};

LayerStep relu_step(const NetConfig& cfg, double sxx, double syy, double sxy, bool same) {
  const double sw2 = cfg.sigma_w * cfg.sigma_w;
  const double sb2 = cfg.sigma_b * cfg.sigma_b;
  if (same) return {sw2 * sxx / 2.0 + sb2, sw2 / 2.0};
  const double prod = sxx * syy;
  if (prod < 0.0 || !std::isfinite(prod)) {
    std::ostringstream os;
    os << "analytic_ntk: invalid variance product " << prod;
    throw NumericalError(os.str());
  }
  const double norm = std::sqrt(prod);
  // A zero-variance side is identically zero pre-activation; treat it as uncorrelated.
  const double c = norm > 0.0 ? std::clamp(sxy / norm, -1.0, 1.0) : 0.0;
  const double t = std::acos(c);
  const double pi = std::numbers::pi;
  return {sw2 * norm / (2.0 * pi) * (std::sin(t) + (pi - t) * c) + sb2, sw2 * (pi - t) / (2.0 * pi)};
}

void check_dim(const NetConfig& cfg, Eigen::Index rows, const char* who) {
  if (rows != cfg.d) {
    std::ostringstream os;
    os << who << ": input dimension " << rows << " does not match d=" << cfg.d;
    throw InvalidArgument(os.str());
  }
}

template <class A, class B>
double ntk_entry(const NetConfig& cfg, const A& x, const B& y) {
  const double sw2 = cfg.sigma_w * cfg.sigma_w;
  const double sb2 = cfg.sigma_b * cfg.sigma_b;
  const double d = static_cast<double>(cfg.d);
  const bool same = (x.array() == y.array()).all();
  double sxx = sw2 * x.squaredNorm() / d + sb2;
  double syy = same ? sxx : sw2 * y.squaredNorm() / d + sb2;
  double sxy = same ? sxx : sw2 * x.dot(y) / d + sb2;
  double theta = sxy;
  for (int l = 0; l < cfg.L; ++l) {
    const LayerStep s = relu_step(cfg, sxx, syy, sxy, same);
    theta = s.sigma + s.sigma_dot * theta;
    sxy = s.sigma;
    sxx = sw2 * sxx / 2.0 + sb2;
    syy = sw2 * syy / 2.0 + sb2;
  }
  return theta;
}

}  // namespace

KernelMatrix empirical_kernel(const Mat& features, std::optional<double> jitter) {
  Mat g = features.transpose() * features;
  g = 0.5 * (g + g.transpose()).eval();
  return KernelMatrix(std::move(g), jitter);
}

KernelMatrix empirical_kernel(const std::vector<Vec>& features, std::optional<double> jitter) {
  if (features.empty()) return KernelMatrix(Mat(0, 0), jitter);
  const Eigen::Index p = features.front().size();
  Mat cols(p, static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].size() != p) throw InvalidArgument("empirical_kernel: feature vectors differ in length");
    cols.col(static_cast<Eigen::Index>(j)) = features[j];
  }
  return empirical_kernel(cols, jitter);
}

Mat empirical_ntk_cross(const NetConfig& cfg, const ParamVector& params0, const Mat& X, const Mat& Y) {
  return trace_gram(cfg, backprop(cfg, params0, X), backprop(cfg, params0, Y));
}

Mat empirical_ntk_entries(const NetConfig& cfg, const ParamVector& params0, const Mat& X) {
  const BackpropTrace t = backprop(cfg, params0, X);
  Mat g = trace_gram(cfg, t, t);
  return 0.5 * (g + g.transpose());
}

KernelMatrix empirical_ntk_gram(const NetConfig& cfg, const ParamVector& params0, const Mat& X,
                                std::optional<double> jitter) {
  return KernelMatrix(empirical_ntk_entries(cfg, params0, X), jitter);
}

double analytic_ntk(const NetConfig& cfg, const Vec& x, const Vec& y) {
  cfg.validate();
  check_dim(cfg, x.size(), "analytic_ntk");
  check_dim(cfg, y.size(), "analytic_ntk");
  return ntk_entry(cfg, x, y);
}

double input_covariance(const NetConfig& cfg, const Vec& x, const Vec& y) {
  cfg.validate();
  check_dim(cfg, x.size(), "input_covariance");
  check_dim(cfg, y.size(), "input_covariance");
  return cfg.sigma_w * cfg.sigma_w * x.dot(y) / static_cast<double>(cfg.d) + cfg.sigma_b * cfg.sigma_b;
}

Mat analytic_ntk_entries(const NetConfig& cfg, const Mat& X) {
  cfg.validate();
  check_dim(cfg, X.rows(), "analytic_ntk_gram");
  const Eigen::Index n = X.cols();
  Mat k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      k(i, j) = ntk_entry(cfg, X.col(i), X.col(j));
      k(j, i) = k(i, j);
    }
  }
  return k;
}

KernelMatrix analytic_ntk_gram(const NetConfig& cfg, const Mat& X, std::optional<double> jitter) {
  return KernelMatrix(analytic_ntk_entries(cfg, X), jitter);
}

Mat analytic_ntk_cross(const NetConfig& cfg, const Mat& X, const Mat& Y) {
  cfg.validate();
  check_dim(cfg, X.rows(), "analytic_ntk_cross");
  check_dim(cfg, Y.rows(), "analytic_ntk_cross");
  Mat k(X.cols(), Y.cols());
  for (Eigen::Index j = 0; j < Y.cols(); ++j)
    for (Eigen::Index i = 0; i < X.cols(); ++i) k(i, j) = ntk_entry(cfg, X.col(i), Y.col(j));
  return k;
}

Vec analytic_ntk_diag(const NetConfig& cfg, const Mat& X) {
  cfg.validate();
  check_dim(cfg, X.rows(), "analytic_ntk_diag");
  Vec k(X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) k[i] = ntk_entry(cfg, X.col(i), X.col(i));
  return k;
}

double relative_frobenius_error(const Mat& approx, const Mat& exact) {
  if (approx.rows() != exact.rows() || approx.cols() != exact.cols())
    throw InvalidArgument("relative_frobenius_error: shape mismatch");
  const double denom = exact.norm();
  if (!(denom > 0.0)) throw DegenerateVectorError("relative_frobenius_error: reference matrix is zero");
  return (approx - exact).norm() / denom;
}

void write_kernel_csv(std::ostream& os, const Mat& entries) {
  os << "i,j,value\n";
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < entries.rows(); ++i)
    for (Eigen::Index j = 0; j < entries.cols(); ++j) os << i << ',' << j << ',' << entries(i, j) << '\n';
}

}  // namespace ntkd
