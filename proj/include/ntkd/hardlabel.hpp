#pragma once

#include "ntkd/linalg.hpp"

namespace ntkd {

// All inner products below are <a, b> = a^T (Theta_n + jitter I)^{-1} b.
// Each function has an overload taking a prepared SpdSolver so that sweeps
// over many label vectors factor the kernel once.

/// <dz_g, dz_s> / (norm_wg sqrt(<dz_s, dz_s>))
double cos_alpha_g(const SpdSolver& K, const Vec& dz_g, const Vec& dz_s, double norm_wg);
double cos_alpha_g(const KernelMatrix& K, const Vec& dz_g, const Vec& dz_s, double norm_wg);

/// <dz_g, dz_h> - (<dz_g, dz_t> / <dz_t, dz_t>) <dz_t, dz_h>: the hard-label
/// correction projected on the part of the ground truth the teacher misses.
double correction_projection(const SpdSolver& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h);
double correction_projection(const KernelMatrix& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h);

/// d cos(alpha(dw_student, dw_g)) / d(1 - rho) at rho = 1:
/// correction_projection / (norm_wg sqrt(<dz_t, dz_t>)).
double hard_label_derivative(const SpdSolver& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h, double norm_wg);
double hard_label_derivative(const KernelMatrix& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h,
                             double norm_wg);

/// correction_projection / (||dz_g residual|| ||dz_h||) in the same inner
/// product: a cosine in [-1, 1] that is comparable across teachers.
double normalized_correction_projection(const SpdSolver& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h);

}  // namespace ntkd
