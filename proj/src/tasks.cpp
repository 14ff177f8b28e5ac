#include "ntkd/tasks.hpp"

#include "ntkd/errors.hpp"
#include "ntkd/rng.hpp"

#include <cmath>
#include <sstream>

namespace ntkd {

namespace {

// Stream labels keep the draws of different roles apart under one seed.
const std::uint64_t kInputStream = rng::hash_label("inputs");
const std::uint64_t kFlipStream = rng::hash_label("flip");
const std::uint64_t kLabelStream = rng::hash_label("random-labels");
const std::uint64_t kMixtureStream = rng::hash_label("mixture");

double signed_unit(std::uint64_t key) { return 2.0 * rng::uniform_from_key(key) - 1.0; }

}  // namespace

Mat sample_inputs(int d, std::size_t n, std::uint64_t seed, double sigma, std::size_t first_index) {
  if (d < 1) throw InvalidArgument("sample_inputs: d must be >= 1");
  Mat X(d, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      const std::uint64_t key = rng::derive(seed, {kInputStream, first_index + i, static_cast<std::uint64_t>(k)});
      X(k, static_cast<Eigen::Index>(i)) = sigma * rng::normal_from_key(key);
    }
  }
  return X;
}

void MixtureParams::validate() const {
  std::ostringstream os;
  if (q < 1) os << "mixture q=" << q << " must be >= 1";
  else if (d < 1) os << "mixture d=" << d << " must be >= 1";
  else if (!(amplitude > 0.0)) os << "mixture amplitude must be > 0";
  else if (!(center_spread >= 0.0)) os << "mixture center_spread must be >= 0";
  else if (!(amplitude_jitter >= 0.0 && amplitude_jitter < 1.0)) os << "mixture amplitude_jitter outside [0, 1)";
  else if (!(width_jitter >= 0.0 && width_jitter < 1.0)) os << "mixture width_jitter outside [0, 1)";
  else return;
  throw InvalidArgument(os.str());
}

MixtureSpec realize_mixture(const MixtureParams& params, std::uint64_t seed) {
  params.validate();
  MixtureSpec spec{params, seed, {}};
  spec.modes.reserve(static_cast<std::size_t>(params.q));
  for (int j = 0; j < params.q; ++j) {
    const auto ju = static_cast<std::uint64_t>(j);
    auto key = [&](std::uint64_t field, std::uint64_t k = 0) { return rng::derive(seed, {kMixtureStream, ju, field, k}); };
    MixtureMode mode;
    const double sign = rng::uniform_from_key(key(0)) < 0.5 ? -1.0 : 1.0;
    mode.amplitude = sign * params.amplitude * (1.0 + params.amplitude_jitter * signed_unit(key(1)));
    mode.center.resize(params.d);
    for (int k = 0; k < params.d; ++k)
      mode.center[k] = params.center_spread * rng::normal_from_key(key(2, static_cast<std::uint64_t>(k)));
    mode.width = params.base_width() * (1.0 + params.width_jitter * signed_unit(key(3)));
    spec.modes.push_back(std::move(mode));
  }
  return spec;
}

double mixture_value(const MixtureSpec& spec, const Vec& x) {
  if (x.size() != spec.params.d) throw InvalidArgument("mixture_value: input dimension mismatch");
  double total = 0.0;
  for (const MixtureMode& mode : spec.modes) {
    const double r2 = (x - mode.center).squaredNorm();
    const double scale = spec.params.exponent == MixtureExponent::sigma ? mode.width : mode.width * mode.width;
    total += mode.amplitude * std::exp(-r2 / scale);
  }
  return total;
}

Vec mixture_values(const MixtureSpec& spec, const Mat& X) {
  Vec out(X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) out[i] = mixture_value(spec, X.col(i));
  return out;
}

double flip_sign(std::uint64_t seed, std::uint64_t index, double p_flip) {
  return rng::uniform_from_key(rng::derive(seed, {kFlipStream, index})) < p_flip ? -1.0 : 1.0;
}

TargetFn flip_labels(TargetFn base, double p_flip, std::uint64_t seed) {
  if (!(p_flip >= 0.0 && p_flip <= 0.5)) throw InvalidArgument("flip_labels: p_flip outside [0, 0.5]");
  return [base = std::move(base), p_flip, seed](const Vec& x, std::uint64_t index) {
    return flip_sign(seed, index, p_flip) * base(x, index);
  };
}

TeacherLabels::TeacherLabels(NetConfig cfg, ParamVector params, double T, double r, TargetFn ground_truth)
    : cfg_(cfg), params_(std::move(params)), T_(T), r_(r), ground_truth_(std::move(ground_truth)) {
  cfg_.validate();
  if (params_.values.size() != param_count(cfg_)) throw InvalidArgument("teacher parameters do not match config");
  if (!(T_ > 0.0)) throw InvalidArgument("teacher temperature must be > 0");
  if (!(r_ > 0.0)) throw InvalidArgument("reduction factor r must be > 0");
}

double TeacherLabels::z_t(const Vec& x) const { return r_ * forward(cfg_, params_, x); }

Vec TeacherLabels::z_t(const Mat& X) const { return r_ * forward_batch(cfg_, params_, X); }

double TeacherLabels::soft_label(const Vec& x) const { return sigmoid(z_t(x) / T_); }

int TeacherLabels::y_g(const Vec& x, std::uint64_t index) const {
  if (!ground_truth_) throw InvalidArgument("teacher label source has no ground truth");
  return ground_truth_(x, index) > 0.0 ? 1 : 0;
}

TeacherLabels teacher_labels(const NetConfig& cfg, const ParamVector& checkpoint, double T, double r,
                             TargetFn ground_truth) {
  return TeacherLabels(cfg, checkpoint, T, r, std::move(ground_truth));
}

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::mixture: return "mixture";
    case TargetKind::flipped_mixture: return "flipped-mixture";
    case TargetKind::teacher_net: return "teacher-net";
    case TargetKind::zero: return "zero";
    case TargetKind::random_labels: return "random-labels";
  }
  return "unknown";
}

TargetKind target_kind_from_string(const std::string& s) {
  for (TargetKind k : {TargetKind::mixture, TargetKind::flipped_mixture, TargetKind::teacher_net, TargetKind::zero,
                       TargetKind::random_labels})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown target kind '" + s + "'");
}

void TaskSpec::validate() const {
  if (d < 1) throw InvalidArgument("task d must be >= 1");
  if (!(input_sigma > 0.0)) throw InvalidArgument("task input_sigma must be > 0");
  if (!(p_flip >= 0.0 && p_flip <= 0.5)) throw InvalidArgument("task p_flip outside [0, 0.5]");
  if (!(r > 0.0)) throw InvalidArgument("task reduction factor r must be > 0");
  if (!(T > 0.0)) throw InvalidArgument("task temperature T must be > 0");
  if (kind == TargetKind::mixture || kind == TargetKind::flipped_mixture) {
    mixture.validate();
    if (mixture.d != d) throw InvalidArgument("mixture dimension differs from task dimension");
  }
}

Task::Task(const TaskSpec& spec) : spec_(spec) {
  spec_.validate();
  if (spec_.kind == TargetKind::teacher_net) throw InvalidArgument("teacher-net task needs a teacher");
  if (kind_has_mixture()) mixture_ = realize_mixture(spec_.mixture, spec_.seed);
}

Task::Task(const TaskSpec& spec, std::shared_ptr<const TeacherLabels> teacher)
    : spec_(spec), teacher_(std::move(teacher)) {
  spec_.validate();
  if (spec_.kind != TargetKind::teacher_net || !teacher_) throw InvalidArgument("teacher task needs kind teacher-net");
  if (teacher_->config().d != spec_.d) throw InvalidArgument("teacher input dimension differs from task");
}

Mat Task::inputs(std::size_t n, std::size_t first_index) const {
  return sample_inputs(spec_.d, n, spec_.seed, spec_.input_sigma, first_index);
}

double Task::target(const Vec& x, std::uint64_t index) const {
  switch (spec_.kind) {
    case TargetKind::mixture: return mixture_value(mixture_, x);
    case TargetKind::flipped_mixture: return flip_sign(spec_.seed, index, spec_.p_flip) * mixture_value(mixture_, x);
    case TargetKind::teacher_net: return teacher_->z_t(x);
    case TargetKind::zero: return 0.0;
    case TargetKind::random_labels: return rng::normal_from_key(rng::derive(spec_.seed, {kLabelStream, index}));
  }
  return 0.0;
}

Vec Task::targets(const Mat& X, std::uint64_t first_index) const {
  if (spec_.kind == TargetKind::teacher_net) return teacher_->z_t(X);
  Vec out(X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) out[i] = target(X.col(i), first_index + static_cast<std::uint64_t>(i));
  return out;
}

Vec Task::hard_labels(const Mat& X, std::uint64_t first_index) const {
  return (targets(X, first_index).array() > 0.0).cast<double>();
}

TargetFn Task::as_function() const {
  return [self = *this](const Vec& x, std::uint64_t index) { return self.target(x, index); };
}

}  // namespace ntkd
