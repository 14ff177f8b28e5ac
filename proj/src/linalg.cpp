#include "ntkd/linalg.hpp"

#include "ntkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ntkd {

namespace {

constexpr int kJitterRetries = 3;
constexpr double kJitterGrowth = 10.0;
constexpr double kSymmetryTol = 1e-10;

void require_finite(const Vec& v, const char* what) {
  if (!all_finite(v)) {
    throw InvalidArgument(std::string(what) + ": non-finite entry");
  }
}

}  // namespace

bool all_finite(const Vec& v) { return v.allFinite(); }

double KernelMatrix::default_jitter(const Mat& entries) {
  if (entries.rows() == 0) return 0.0;
  return 1e-8 * std::abs(entries.trace()) / static_cast<double>(entries.rows());
}

KernelMatrix::KernelMatrix(Mat entries, std::optional<double> jitter)
    : entries_(std::move(entries)), jitter_(0.0) {
  if (entries_.rows() != entries_.cols()) {
    throw InvalidArgument("KernelMatrix: entries must be square");
  }
  if (!entries_.allFinite()) {
    throw InvalidArgument("KernelMatrix: non-finite entry");
  }
  const double scale = entries_.size() ? entries_.cwiseAbs().maxCoeff() : 0.0;
  const double asym = entries_.size() ? (entries_ - entries_.transpose()).cwiseAbs().maxCoeff() : 0.0;
  if (asym > kSymmetryTol * std::max(scale, 1e-300)) {
    std::ostringstream os;
    os << "KernelMatrix: not symmetric (max asymmetry " << asym << " vs scale " << scale << ")";
    throw InvalidArgument(os.str());
  }
  jitter_ = jitter.value_or(default_jitter(entries_));
  if (jitter_ < 0.0 || !std::isfinite(jitter_)) {
    throw InvalidArgument("KernelMatrix: jitter must be finite and non-negative");
  }
}

SpdSolver::SpdSolver(const KernelMatrix& k) : n_(k.size()) {
  const Mat& a = k.entries();
  const double eigen_scale = n_ ? std::abs(a.trace()) / static_cast<double>(n_) : 0.0;
  double jitter = k.jitter();
  for (int attempt = 0; attempt <= kJitterRetries; ++attempt) {
    Mat shifted = a;
    shifted.diagonal().array() += jitter;
    llt_.compute(shifted);
    if (llt_.info() == Eigen::Success) {
      jitter_used_ = jitter;
      return;
    }
    // a zero starting jitter would never grow
    jitter = jitter > 0.0 ? jitter * kJitterGrowth : 1e-8 * std::max(eigen_scale, 1e-300);
  }
  std::ostringstream os;
  os << "singular kernel: Cholesky failed for n=" << n_ << " at eigen-scale trace/n=" << eigen_scale
     << " after jitter escalation to " << jitter / kJitterGrowth;
  throw SingularKernelError(os.str(), eigen_scale, jitter / kJitterGrowth);
}

Vec SpdSolver::solve(const Vec& b) const {
  if (b.size() != n_) throw InvalidArgument("spd_solve: dimension mismatch");
  require_finite(b, "spd_solve");
  return llt_.solve(b);
}

Mat SpdSolver::solve(const Mat& b) const {
  if (b.rows() != n_) throw InvalidArgument("spd_solve: dimension mismatch");
  return llt_.solve(b);
}

double SpdSolver::inner(const Vec& a, const Vec& b) const {
  if (a.size() != n_ || b.size() != n_) throw InvalidArgument("kernel_inner: dimension mismatch");
  require_finite(a, "kernel_inner");
  require_finite(b, "kernel_inner");
  // Solving against the triangular factor on both sides keeps the result
  // exactly symmetric in (a, b).
  const Vec la = llt_.matrixL().solve(a);
  const Vec lb = llt_.matrixL().solve(b);
  return la.dot(lb);
}

double SpdSolver::squared_norm(const Vec& a) const {
  if (a.size() != n_) throw InvalidArgument("kernel_inner: dimension mismatch");
  const Vec la = llt_.matrixL().solve(a);
  return la.squaredNorm();
}

Vec SpdSolver::inverse_diagonal() const {
  // diag(A^{-1})_i = || L^{-1} e_i ||^2
  Mat linv = llt_.matrixL().solve(Mat::Identity(n_, n_));
  return linv.colwise().squaredNorm().transpose();
}

Vec spd_solve(const KernelMatrix& k, const Vec& b) { return SpdSolver(k).solve(b); }

double kernel_inner(const KernelMatrix& k, const Vec& a, const Vec& b) {
  return SpdSolver(k).inner(a, b);
}

double abs_cosine(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) throw InvalidArgument("acute_angle: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) {
    throw DegenerateVectorError("acute_angle: zero-norm input");
  }
  const double c = std::abs(u.dot(v)) / (nu * nv);
  return std::clamp(c, 0.0, 1.0);
}

double acute_angle(const Vec& u, const Vec& v) { return std::acos(abs_cosine(u, v)); }

}  // namespace ntkd
