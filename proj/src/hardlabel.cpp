#include "ntkd/hardlabel.hpp"

#include "ntkd/errors.hpp"

#include <cmath>

namespace ntkd {

namespace {

void check_sizes(const SpdSolver& K, std::initializer_list<const Vec*> vs) {
  for (const Vec* v : vs)
    if (v->size() != K.size()) throw InvalidArgument("hard-label analysis: vector length differs from kernel size");
}

double teacher_sqnorm(const SpdSolver& K, const Vec& dz_t) {
  const double tt = K.inner(dz_t, dz_t);
  if (!(tt > 0.0)) throw DegenerateVectorError("hard-label analysis: teacher logit delta has zero norm");
  return tt;
}

}  // namespace

double cos_alpha_g(const SpdSolver& K, const Vec& dz_g, const Vec& dz_s, double norm_wg) {
  check_sizes(K, {&dz_g, &dz_s});
  if (!(norm_wg > 0.0)) throw InvalidArgument("cos_alpha_g: norm_wg must be > 0");
  const double ss = K.inner(dz_s, dz_s);
  if (!(ss > 0.0)) throw DegenerateVectorError("cos_alpha_g: student logit delta has zero norm");
  return K.inner(dz_g, dz_s) / (norm_wg * std::sqrt(ss));
}

double cos_alpha_g(const KernelMatrix& K, const Vec& dz_g, const Vec& dz_s, double norm_wg) {
  return cos_alpha_g(SpdSolver(K), dz_g, dz_s, norm_wg);
}

double correction_projection(const SpdSolver& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h) {
  check_sizes(K, {&dz_g, &dz_t, &dz_h});
  const double tt = teacher_sqnorm(K, dz_t);
  return K.inner(dz_g, dz_h) - K.inner(dz_g, dz_t) / tt * K.inner(dz_t, dz_h);
}

double correction_projection(const KernelMatrix& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h) {
  return correction_projection(SpdSolver(K), dz_g, dz_t, dz_h);
}

double hard_label_derivative(const SpdSolver& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h, double norm_wg) {
  if (!(norm_wg > 0.0)) throw InvalidArgument("hard_label_derivative: norm_wg must be > 0");
  const double proj = correction_projection(K, dz_g, dz_t, dz_h);
  return proj / (norm_wg * std::sqrt(teacher_sqnorm(K, dz_t)));
}

double hard_label_derivative(const KernelMatrix& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h,
                             double norm_wg) {
  return hard_label_derivative(SpdSolver(K), dz_g, dz_t, dz_h, norm_wg);
}

double normalized_correction_projection(const SpdSolver& K, const Vec& dz_g, const Vec& dz_t, const Vec& dz_h) {
  const double proj = correction_projection(K, dz_g, dz_t, dz_h);
  const double tt = teacher_sqnorm(K, dz_t);
  const double gt = K.inner(dz_g, dz_t);
  const double gc2 = K.inner(dz_g, dz_g) - gt * gt / tt;
  const double hh = K.inner(dz_h, dz_h);
  if (!(gc2 > 0.0) || !(hh > 0.0)) throw DegenerateVectorError("normalized projection: zero residual or correction");
  return proj / std::sqrt(gc2 * hh);
}

}  // namespace ntkd
