#pragma once

#include "ntkd/distillation.hpp"
#include "ntkd/linalg.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ntkd {

/// Fully-connected ReLU network in NTK parameterization:
///
///   h^1     = sigma_w W^0 x / sqrt(d) + sigma_b b^0
///   h^{l+1} = sigma_w W^l relu(h^l) / sqrt(m) + sigma_b b^l,  l = 1..L-1
///   f(x)    = sigma_w W^L relu(h^L) / sqrt(m) + sigma_b b^L
struct NetConfig {
  int d = 2;
  int L = 3;
  int m = 512;
  double sigma_w = 1.0;
  double sigma_b = 1.0;

  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

struct LayerShape {
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Eigen::Index w_offset = 0;  // row-major out x in block
  Eigen::Index b_offset = 0;
};

/// Offsets of {W^l, b^l} in the flat parameter vector, layer-major:
/// [W^0, b^0, W^1, b^1, ..., W^L, b^L], each W stored row-major.
class ParamLayout {
 public:
  explicit ParamLayout(const NetConfig& cfg);

  Eigen::Index size() const noexcept { return size_; }
  const std::vector<LayerShape>& layers() const noexcept { return layers_; }

 private:
  std::vector<LayerShape> layers_;
  Eigen::Index size_ = 0;
};

/// Number of parameters for a configuration.
Eigen::Index param_count(const NetConfig& cfg);

struct ParamVector {
  Vec values;
};

enum class DeltaRole { student, oracle, zero, ground_truth, hard_correction };

std::string to_string(DeltaRole role);

struct WeightDelta {
  Vec values;
  DeltaRole role = DeltaRole::student;
};

/// Activations and backpropagated sensitivities of one batched pass, per layer.
/// For layer l, `input` holds a^l (in_l x B, a^0 = x) and `delta` holds
/// df/dh^{l+1} (out_l x B) with unit output gradient. Every random feature is
/// the product of one delta row, one input row and a layer constant, so
/// feature dot products never need the p-dimensional vectors.
struct LayerTrace {
  Mat input;
  Mat delta;
};

struct BackpropTrace {
  Vec output;
  std::vector<LayerTrace> layers;

  Eigen::Index batch() const noexcept { return output.size(); }
};

ParamVector init_params(const NetConfig& cfg, std::uint64_t seed);

/// Unflatten helper; returns W^l as a row-major view.
Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weight_block(
    const ParamLayout& layout, const Vec& flat, std::size_t layer);

double forward(const NetConfig& cfg, const ParamVector& params, const Vec& x);
/// Columns of `x` are inputs.
Vec forward_batch(const NetConfig& cfg, const ParamVector& params, const Mat& x);

BackpropTrace backprop(const NetConfig& cfg, const ParamVector& params, const Mat& x);

/// delta^T phi(x_i) for each column of the trace.
Vec trace_dot(const NetConfig& cfg, const BackpropTrace& trace, const Vec& delta);
/// sum_i w_i phi(x_i), laid out like a ParamVector.
Vec trace_accumulate(const NetConfig& cfg, const BackpropTrace& trace, const Vec& weights);
/// phi(x_i)^T phi(y_j) for the columns of two traces.
Mat trace_gram(const NetConfig& cfg, const BackpropTrace& a, const BackpropTrace& b);
/// ||phi(x_i)||^2
Vec trace_sqnorms(const NetConfig& cfg, const BackpropTrace& trace);

/// Random feature phi(x) = d f(x; w0) / d w, by reverse-mode accumulation.
Vec feature(const NetConfig& cfg, const ParamVector& params0, const Vec& x);
/// Explicit p x n feature matrix. Only sensible for small networks.
Mat features(const NetConfig& cfg, const ParamVector& params0, const Mat& x);

double linear_logit(const NetConfig& cfg, const ParamVector& params0, const WeightDelta& delta, const Vec& x);
Vec linear_logits(const NetConfig& cfg, const ParamVector& params0, const WeightDelta& delta, const Mat& x);

// --- training -------------------------------------------------------------

enum class Optimizer { adam, sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 1000;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Fresh samples every step instead of a fixed dataset.
  bool online_batch = true;
  /// Online mode only: optimizer steps per epoch.
  std::size_t steps_per_epoch = 1;
  /// Teacher stopping epochs at which checkpoints are kept.
  std::vector<std::size_t> checkpoint_epochs;
  /// train_linearized: gradient-norm threshold for the convergence flag.
  double grad_tol = 1e-6;

  void validate() const;
};

/// {0, 1, 2, 4, ..., 2^k <= max_epoch} merged with `extra`, sorted, unique.
std::vector<std::size_t> power_of_two_epochs(std::size_t max_epoch, const std::vector<std::size_t>& extra = {});

struct LabeledBatch {
  Mat x;       // d x B
  Vec target;  // logit target (L2), teacher logit (distill) or hard label (BCE)
  Vec hard;    // ground-truth hard labels for distillation, may be empty
};

/// Produces a batch for a given step. Must be a pure function of its
/// arguments so that training is reproducible.
using BatchSource = std::function<LabeledBatch(std::uint64_t step, std::size_t batch_size)>;

struct TeacherCheckpoint {
  std::size_t epoch = 0;
  ParamVector params;
};

/// Adam (or SGD) on binary cross-entropy against hard labels in `target`.
/// Online mode draws source(epoch * steps_per_epoch + s, batch_size) for each
/// step; fixed mode draws source(0, batch_size) once and reuses it.
/// Throws NumericalError naming the epoch if the loss becomes NaN.
std::vector<TeacherCheckpoint> train_teacher(const NetConfig& cfg, const BatchSource& source,
                                             const TrainConfig& train, std::uint64_t seed);

struct LinearLoss {
  enum class Kind { l2, distill };
  Kind kind = Kind::l2;
  DistillParams distill{};
};

struct LinearTrainResult {
  WeightDelta delta;
  bool converged = false;
  double final_grad_norm = 0.0;
  double final_loss = 0.0;
  std::size_t epochs_run = 0;
  /// Optional ||delta|| after each epoch.
  std::vector<double> norm_history;
};

/// Gradient training of the linearized model f(x; w0) + delta^T phi(x) on a
/// fixed dataset. Minibatches are reshuffled each epoch from `seed`.
LinearTrainResult train_linearized(const NetConfig& cfg, const ParamVector& params0, const LabeledBatch& data,
                                   const LinearLoss& loss, const TrainConfig& train, std::uint64_t seed,
                                   DeltaRole role = DeltaRole::student);

/// Online-batch variant: a fresh batch every step. The convergence flag uses
/// the gradient norm of the final batch.
LinearTrainResult train_linearized_online(const NetConfig& cfg, const ParamVector& params0, const BatchSource& source,
                                          const LinearLoss& loss, const TrainConfig& train,
                                          DeltaRole role, bool record_norms = false);

}  // namespace ntkd
