#pragma once

#include "ntkd/linalg.hpp"
#include "ntkd/network.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace ntkd {

enum class KernelSource { analytic, empirical };

/// Gram matrix of explicit feature vectors, Theta_ij = phi_i . phi_j.
KernelMatrix empirical_kernel(const std::vector<Vec>& features, std::optional<double> jitter = std::nullopt);
/// Same, with features stored as the columns of a p x n matrix.
KernelMatrix empirical_kernel(const Mat& features, std::optional<double> jitter = std::nullopt);

/// phi(X)^T phi(Y) at params0 without forming the features (columns of X, Y
/// are inputs).
Mat empirical_ntk_cross(const NetConfig& cfg, const ParamVector& params0, const Mat& X, const Mat& Y);
/// Symmetrized empirical Gram of the columns of X.
Mat empirical_ntk_entries(const NetConfig& cfg, const ParamVector& params0, const Mat& X);
KernelMatrix empirical_ntk_gram(const NetConfig& cfg, const ParamVector& params0, const Mat& X,
                                std::optional<double> jitter = std::nullopt);

/// Infinite-width NTK of the ReLU network in `cfg` (width is ignored):
///
///   Sigma^0 = sigma_w^2 x.x'/d + sigma_b^2,  Theta^0 = Sigma^0
///   theta   = acos(Sigma(x,x') / sqrt(Sigma(x,x) Sigma(x',x')))
///   Sigma   <- sigma_w^2 sqrt(Sigma(x,x) Sigma(x',x'))/(2 pi) (sin theta + (pi - theta) cos theta) + sigma_b^2
///   Sigmad  =  sigma_w^2 (pi - theta)/(2 pi)
///   Theta   <- Sigma + Sigmad Theta
///
/// applied once per hidden layer. Identical inputs take the theta = 0 branch.
double analytic_ntk(const NetConfig& cfg, const Vec& x, const Vec& y);

/// Input-layer covariance Sigma^0(x, x') = sigma_w^2 x.x'/d + sigma_b^2.
double input_covariance(const NetConfig& cfg, const Vec& x, const Vec& y);

/// n x n Gram over the columns of X; upper triangle computed, then mirrored.
Mat analytic_ntk_entries(const NetConfig& cfg, const Mat& X);
KernelMatrix analytic_ntk_gram(const NetConfig& cfg, const Mat& X, std::optional<double> jitter = std::nullopt);
/// Theta(X_i, Y_j).
Mat analytic_ntk_cross(const NetConfig& cfg, const Mat& X, const Mat& Y);
/// Theta(x_i, x_i).
Vec analytic_ntk_diag(const NetConfig& cfg, const Mat& X);

/// ||approx - exact||_F / ||exact||_F
double relative_frobenius_error(const Mat& approx, const Mat& exact);

/// Writes "i,j,value" rows with a header.
void write_kernel_csv(std::ostream& os, const Mat& entries);

}  // namespace ntkd
