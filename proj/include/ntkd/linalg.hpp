#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <optional>

namespace ntkd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Symmetric positive-semidefinite Gram matrix plus the diagonal jitter that is
/// added before any factorization.
///
/// Construction validates symmetry (1e-10 relative to the largest entry). The
/// default jitter is 1e-8 * trace / n. A KernelMatrix never changes after
/// construction and can be shared between threads.
class KernelMatrix {
 public:
  explicit KernelMatrix(Mat entries, std::optional<double> jitter = std::nullopt);

  const Mat& entries() const noexcept { return entries_; }
  double jitter() const noexcept { return jitter_; }
  Eigen::Index size() const noexcept { return entries_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

  static double default_jitter(const Mat& entries);

 private:
  Mat entries_;
  double jitter_;
};

/// Cholesky factor of K + jitter*I. When the first attempt fails the jitter is
/// multiplied by 10 up to three more times before giving up with a
/// SingularKernelError.
class SpdSolver {
 public:
  explicit SpdSolver(const KernelMatrix& k);

  Vec solve(const Vec& b) const;
  Mat solve(const Mat& b) const;
  /// a^T (K + jitter I)^{-1} b
  double inner(const Vec& a, const Vec& b) const;
  /// || L^{-1} a ||^2, the same quantity as inner(a, a) through the triangular factor.
  double squared_norm(const Vec& a) const;
  /// diag((K + jitter I)^{-1})
  Vec inverse_diagonal() const;

  double jitter_used() const noexcept { return jitter_used_; }
  Eigen::Index size() const noexcept { return n_; }
  const Eigen::LLT<Mat>& factor() const noexcept { return llt_; }

 private:
  Eigen::LLT<Mat> llt_;
  double jitter_used_ = 0.0;
  Eigen::Index n_ = 0;
};

/// Solves (K + jitter I) v = b.
Vec spd_solve(const KernelMatrix& k, const Vec& b);

/// a^T (K + jitter I)^{-1} b.
double kernel_inner(const KernelMatrix& k, const Vec& a, const Vec& b);

/// Acute angle in [0, pi/2] between two non-zero vectors.
double acute_angle(const Vec& u, const Vec& v);

/// |u.v| / (|u||v|) clamped to [0, 1].
double abs_cosine(const Vec& u, const Vec& v);

bool all_finite(const Vec& v);

}  // namespace ntkd
