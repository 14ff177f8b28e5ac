#pragma once

#include "ntkd/linalg.hpp"
#include "ntkd/network.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ntkd {

/// Columns are samples. Coordinate k of sample i is sigma * N(0,1) drawn from
/// the key (seed, i, k), so the first n columns never depend on how many more
/// are requested.
Mat sample_inputs(int d, std::size_t n, std::uint64_t seed, double sigma = 5.0, std::size_t first_index = 0);

enum class MixtureExponent {
  sigma,          // exp(-|x - x_j|^2 / sigma_j), the recipe form
  sigma_squared,  // exp(-|x - x_j|^2 / sigma_j^2)
};

struct MixtureParams {
  int q = 10;
  int d = 1;
  double amplitude = 1.0;      // A
  double center_spread = 5.0;  // sigma_p
  double amplitude_jitter = 0.2;
  double width_jitter = 0.2;
  MixtureExponent exponent = MixtureExponent::sigma;

  /// Base width 15 / q^2.
  double base_width() const noexcept { return 15.0 / (static_cast<double>(q) * q); }
  void validate() const;
};

struct MixtureMode {
  double amplitude = 0.0;
  Vec center;
  double width = 1.0;
};

/// A realized mixture: A_j = +-A (1 + a U[-1,1]) with a fair sign,
/// x_j ~ N(0, sigma_p^2 I), sigma_j = (15/q^2)(1 + w U[-1,1]).
struct MixtureSpec {
  MixtureParams params;
  std::uint64_t seed = 0;
  std::vector<MixtureMode> modes;
};

MixtureSpec realize_mixture(const MixtureParams& params, std::uint64_t seed);
double mixture_value(const MixtureSpec& spec, const Vec& x);
Vec mixture_values(const MixtureSpec& spec, const Mat& X);

/// +1 or -1; -1 with probability p_flip, keyed by (seed, index).
double flip_sign(std::uint64_t seed, std::uint64_t index, double p_flip);

/// A target function of (input, sample index). The index lets per-sample
/// randomness (flips, random labels) stay a pure function of the stream.
using TargetFn = std::function<double(const Vec& x, std::uint64_t index)>;

TargetFn flip_labels(TargetFn base, double p_flip, std::uint64_t seed);

/// Teacher network logits scaled by the reduction factor r, with soft labels
/// sigma(z_t / T) and hard labels from a ground-truth function.
class TeacherLabels {
 public:
  TeacherLabels(NetConfig cfg, ParamVector params, double T, double r, TargetFn ground_truth);

  /// r * f(x; teacher)
  double z_t(const Vec& x) const;
  Vec z_t(const Mat& X) const;
  double soft_label(const Vec& x) const;
  int y_g(const Vec& x, std::uint64_t index = 0) const;

  double temperature() const noexcept { return T_; }
  double reduction() const noexcept { return r_; }
  const NetConfig& config() const noexcept { return cfg_; }
  const ParamVector& params() const noexcept { return params_; }

 private:
  NetConfig cfg_;
  ParamVector params_;
  double T_;
  double r_;
  TargetFn ground_truth_;
};

TeacherLabels teacher_labels(const NetConfig& cfg, const ParamVector& checkpoint, double T, double r,
                             TargetFn ground_truth);

enum class TargetKind { mixture, flipped_mixture, teacher_net, zero, random_labels };

std::string to_string(TargetKind kind);
TargetKind target_kind_from_string(const std::string& s);

struct TaskSpec {
  int d = 1;
  double input_sigma = 5.0;
  TargetKind kind = TargetKind::mixture;
  MixtureParams mixture{};
  double p_flip = 0.0;
  double r = 0.3;
  double T = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A realized task: inputs and targets are pure functions of (seed, index).
class Task {
 public:
  /// mixture, flipped_mixture, zero, random_labels.
  explicit Task(const TaskSpec& spec);
  /// teacher_net: targets are the scaled teacher logits.
  Task(const TaskSpec& spec, std::shared_ptr<const TeacherLabels> teacher);

  const TaskSpec& spec() const noexcept { return spec_; }
  const MixtureSpec* mixture() const noexcept { return kind_has_mixture() ? &mixture_ : nullptr; }

  Mat inputs(std::size_t n, std::size_t first_index = 0) const;
  double target(const Vec& x, std::uint64_t index) const;
  Vec targets(const Mat& X, std::uint64_t first_index = 0) const;
  /// y = 1{target > 0}.
  Vec hard_labels(const Mat& X, std::uint64_t first_index = 0) const;
  /// Random-label targets are logit deltas themselves; the rest are logits.
  bool targets_are_deltas() const noexcept { return spec_.kind == TargetKind::random_labels; }

  TargetFn as_function() const;

 private:
  bool kind_has_mixture() const noexcept {
    return spec_.kind == TargetKind::mixture || spec_.kind == TargetKind::flipped_mixture;
  }

  TaskSpec spec_;
  MixtureSpec mixture_;
  std::shared_ptr<const TeacherLabels> teacher_;
};

}  // namespace ntkd
