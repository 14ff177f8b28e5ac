#include "ntkd/network.hpp"

#include "ntkd/errors.hpp"
#include "ntkd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace ntkd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

double layer_scale(const NetConfig& cfg, const LayerShape& s) {
  return cfg.sigma_w / std::sqrt(static_cast<double>(s.in));
}

void check_params(const ParamLayout& layout, const Vec& flat, const char* who) {
  if (flat.size() != layout.size()) {
    std::ostringstream os;
    os << who << ": parameter vector has length " << flat.size() << ", layout needs " << layout.size();
    throw InvalidArgument(os.str());
  }
}

void check_inputs(const NetConfig& cfg, const Mat& x, const char* who) {
  if (x.rows() != cfg.d) {
    std::ostringstream os;
    os << who << ": input dimension " << x.rows() << " does not match d=" << cfg.d;
    throw InvalidArgument(os.str());
  }
}

void check_trace(const ParamLayout& layout, const BackpropTrace& trace) {
  if (trace.layers.size() != layout.layers().size()) throw InvalidArgument("trace does not match network layout");
}

}  // namespace

void NetConfig::validate() const {
  std::ostringstream os;
  if (d < 1) os << "d=" << d << " must be >= 1";
  else if (L < 1) os << "L=" << L << " must be >= 1";
  else if (m < 1) os << "m=" << m << " must be >= 1";
  else if (!(sigma_w > 0.0)) os << "sigma_w=" << sigma_w << " must be > 0";
  else if (!(sigma_b >= 0.0)) os << "sigma_b=" << sigma_b << " must be >= 0";
  else return;
  throw InvalidArgument(os.str());
}

ParamLayout::ParamLayout(const NetConfig& cfg) {
  cfg.validate();
  Eigen::Index offset = 0;
  for (int l = 0; l <= cfg.L; ++l) {
    LayerShape s;
    s.in = l == 0 ? cfg.d : cfg.m;
    s.out = l == cfg.L ? 1 : cfg.m;
    s.w_offset = offset;
    s.b_offset = offset + s.in * s.out;
    offset = s.b_offset + s.out;
    layers_.push_back(s);
  }
  size_ = offset;
}

Eigen::Index param_count(const NetConfig& cfg) { return ParamLayout(cfg).size(); }

std::string to_string(DeltaRole role) {
  switch (role) {
    case DeltaRole::student: return "student";
    case DeltaRole::oracle: return "oracle";
    case DeltaRole::zero: return "zero";
    case DeltaRole::ground_truth: return "ground_truth";
    case DeltaRole::hard_correction: return "hard_correction";
  }
  return "unknown";
}

ParamVector init_params(const NetConfig& cfg, std::uint64_t seed) {
  const ParamLayout layout(cfg);
  auto gen = rng::engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector p{Vec(layout.size())};
  for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values[i] = normal(gen);
  return p;
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weight_block(
    const ParamLayout& layout, const Vec& flat, std::size_t layer) {
  const LayerShape& s = layout.layers().at(layer);
  return {flat.data() + s.w_offset, s.out, s.in};
}

Vec forward_batch(const NetConfig& cfg, const ParamVector& params, const Mat& x) {
  const ParamLayout layout(cfg);
  check_params(layout, params.values, "forward");
  check_inputs(cfg, x, "forward");
  Mat a = x;
  const auto& layers = layout.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerShape& s = layers[l];
    const auto W = weight_block(layout, params.values, l);
    const auto b = params.values.segment(s.b_offset, s.out);
    Mat h = layer_scale(cfg, s) * (W * a);
    h.colwise() += cfg.sigma_b * b;
    a = l + 1 < layers.size() ? Mat(h.cwiseMax(0.0)) : h;
  }
  return a.row(0).transpose();
}

double forward(const NetConfig& cfg, const ParamVector& params, const Vec& x) {
  return forward_batch(cfg, params, Mat(x))(0);
}

BackpropTrace backprop(const NetConfig& cfg, const ParamVector& params, const Mat& x) {
  const ParamLayout layout(cfg);
  check_params(layout, params.values, "backprop");
  check_inputs(cfg, x, "backprop");
  const auto& layers = layout.layers();
  const Eigen::Index B = x.cols();

  BackpropTrace trace;
  trace.layers.resize(layers.size());
  Mat a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerShape& s = layers[l];
    trace.layers[l].input = a;
    Mat h = layer_scale(cfg, s) * (weight_block(layout, params.values, l) * a);
    h.colwise() += cfg.sigma_b * params.values.segment(s.b_offset, s.out);
    if (l + 1 < layers.size()) {
      a = h.cwiseMax(0.0);
    } else {
      trace.output = h.row(0).transpose();
    }
  }

  // delta_l = df/dh^{l+1}; the output layer has unit sensitivity.
  trace.layers.back().delta = Mat::Ones(1, B);
  for (std::size_t l = layers.size() - 1; l > 0; --l) {
    const LayerShape& s = layers[l];
    Mat back = layer_scale(cfg, s) * (weight_block(layout, params.values, l).transpose() * trace.layers[l].delta);
    // a^l = relu(h^l), so the gate is a^l > 0.
    back.array() *= (trace.layers[l].input.array() > 0.0).cast<double>();
    trace.layers[l - 1].delta = std::move(back);
  }
  return trace;
}

Vec trace_dot(const NetConfig& cfg, const BackpropTrace& trace, const Vec& delta) {
  const ParamLayout layout(cfg);
  check_params(layout, delta, "trace_dot");
  check_trace(layout, trace);
  Vec out = Vec::Zero(trace.batch());
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const LayerShape& s = layout.layers()[l];
    const LayerTrace& lt = trace.layers[l];
    Mat pre = layer_scale(cfg, s) * (weight_block(layout, delta, l) * lt.input);
    pre.colwise() += cfg.sigma_b * delta.segment(s.b_offset, s.out);
    out += (lt.delta.array() * pre.array()).colwise().sum().matrix().transpose();
  }
  return out;
}

Vec trace_accumulate(const NetConfig& cfg, const BackpropTrace& trace, const Vec& weights) {
  const ParamLayout layout(cfg);
  check_trace(layout, trace);
  if (weights.size() != trace.batch()) throw InvalidArgument("trace_accumulate: weight count differs from batch");
  Vec out = Vec::Zero(layout.size());
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const LayerShape& s = layout.layers()[l];
    const LayerTrace& lt = trace.layers[l];
    const Mat weighted = lt.delta * weights.asDiagonal();
    RowMap W(out.data() + s.w_offset, s.out, s.in);
    W.noalias() = layer_scale(cfg, s) * (weighted * lt.input.transpose());
    out.segment(s.b_offset, s.out) = cfg.sigma_b * weighted.rowwise().sum();
  }
  return out;
}

Mat trace_gram(const NetConfig& cfg, const BackpropTrace& a, const BackpropTrace& b) {
  const ParamLayout layout(cfg);
  check_trace(layout, a);
  check_trace(layout, b);
  Mat out = Mat::Zero(a.batch(), b.batch());
  const double sb2 = cfg.sigma_b * cfg.sigma_b;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const LayerShape& s = layout.layers()[l];
    const double c2 = cfg.sigma_w * cfg.sigma_w / static_cast<double>(s.in);
    Mat inputs = c2 * (a.layers[l].input.transpose() * b.layers[l].input);
    inputs.array() += sb2;
    const Mat deltas = a.layers[l].delta.transpose() * b.layers[l].delta;
    out.array() += deltas.array() * inputs.array();
  }
  return out;
}

Vec trace_sqnorms(const NetConfig& cfg, const BackpropTrace& trace) {
  const ParamLayout layout(cfg);
  check_trace(layout, trace);
  Vec out = Vec::Zero(trace.batch());
  const double sb2 = cfg.sigma_b * cfg.sigma_b;
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const LayerShape& s = layout.layers()[l];
    const double c2 = cfg.sigma_w * cfg.sigma_w / static_cast<double>(s.in);
    const auto d2 = trace.layers[l].delta.array().square().colwise().sum();
    const auto a2 = trace.layers[l].input.array().square().colwise().sum();
    out.array() += (d2 * (c2 * a2 + sb2)).transpose();
  }
  return out;
}

Mat features(const NetConfig& cfg, const ParamVector& params0, const Mat& x) {
  const BackpropTrace trace = backprop(cfg, params0, x);
  Mat out(param_count(cfg), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Vec e = Vec::Zero(x.cols());
    e[j] = 1.0;
    out.col(j) = trace_accumulate(cfg, trace, e);
  }
  return out;
}

Vec feature(const NetConfig& cfg, const ParamVector& params0, const Vec& x) {
  return features(cfg, params0, Mat(x)).col(0);
}

Vec linear_logits(const NetConfig& cfg, const ParamVector& params0, const WeightDelta& delta, const Mat& x) {
  const BackpropTrace trace = backprop(cfg, params0, x);
  return trace.output + trace_dot(cfg, trace, delta.values);
}

double linear_logit(const NetConfig& cfg, const ParamVector& params0, const WeightDelta& delta, const Vec& x) {
  return linear_logits(cfg, params0, delta, Mat(x))(0);
}

// --- training -------------------------------------------------------------

void TrainConfig::validate() const {
  std::ostringstream os;
  if (!(learning_rate > 0.0)) os << "learning_rate=" << learning_rate << " must be > 0";
  else if (batch_size == 0) os << "batch_size must be > 0";
  else if (steps_per_epoch == 0) os << "steps_per_epoch must be > 0";
  else if (!(beta1 >= 0.0 && beta1 < 1.0)) os << "beta1=" << beta1 << " outside [0, 1)";
  else if (!(beta2 >= 0.0 && beta2 < 1.0)) os << "beta2=" << beta2 << " outside [0, 1)";
  else if (!(adam_eps > 0.0)) os << "adam_eps must be > 0";
  else return;
  throw InvalidArgument(os.str());
}

std::vector<std::size_t> power_of_two_epochs(std::size_t max_epoch, const std::vector<std::size_t>& extra) {
  std::vector<std::size_t> out{0};
  for (std::size_t e = 1; e <= max_epoch; e *= 2) out.push_back(e);
  for (std::size_t e : extra) out.push_back(e);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

class Stepper {
 public:
  Stepper(const TrainConfig& cfg, Eigen::Index p) : cfg_(cfg) {
    if (cfg.optimizer == Optimizer::adam) {
      m_ = Vec::Zero(p);
      v_ = Vec::Zero(p);
    }
  }

  void step(Vec& w, const Vec& grad) {
    if (cfg_.optimizer == Optimizer::sgd) {
      w.noalias() -= cfg_.learning_rate * grad;
      return;
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    w.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.adam_eps);
  }

 private:
  const TrainConfig& cfg_;
  Vec m_, v_;
  std::uint64_t t_ = 0;
};

// Mean loss and dloss/dz / B for the linear model.
double linear_residual(const LinearLoss& loss, const Vec& z, const LabeledBatch& batch, Vec& residual) {
  const Eigen::Index B = z.size();
  residual.resize(B);
  double total = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    if (loss.kind == LinearLoss::Kind::l2) {
      const double r = z[i] - batch.target[i];
      residual[i] = r / static_cast<double>(B);
      total += 0.5 * r * r;
    } else {
      const int y = batch.hard[i] > 0.5 ? 1 : 0;
      residual[i] = loss_gradient(z[i], batch.target[i], y, loss.distill) / static_cast<double>(B);
      total += distill_loss(z[i], batch.target[i], y, loss.distill);
    }
  }
  return total / static_cast<double>(B);
}

void check_batch(const LabeledBatch& batch, const LinearLoss& loss) {
  if (batch.target.size() != batch.x.cols()) throw InvalidArgument("batch target count differs from input count");
  if (loss.kind == LinearLoss::Kind::distill) {
    loss.distill.validate();
    if (batch.hard.size() != batch.x.cols()) throw InvalidArgument("distillation needs a hard label per input");
  }
}

BackpropTrace select_columns(const BackpropTrace& full, const std::vector<Eigen::Index>& idx) {
  BackpropTrace out;
  out.output = full.output(idx);
  out.layers.reserve(full.layers.size());
  for (const LayerTrace& lt : full.layers) {
    out.layers.push_back({lt.input(Eigen::all, idx), lt.delta(Eigen::all, idx)});
  }
  return out;
}

}  // namespace

std::vector<TeacherCheckpoint> train_teacher(const NetConfig& cfg, const BatchSource& source,
                                             const TrainConfig& train, std::uint64_t seed) {
  train.validate();
  ParamVector params = init_params(cfg, seed);
  std::vector<std::size_t> wanted = train.checkpoint_epochs;
  wanted.push_back(train.epochs);
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  wanted.erase(std::remove_if(wanted.begin(), wanted.end(), [&](std::size_t e) { return e > train.epochs; }),
               wanted.end());

  std::vector<TeacherCheckpoint> out;
  auto next = wanted.begin();
  if (next != wanted.end() && *next == 0) {
    out.push_back({0, params});
    ++next;
  }

  Stepper stepper(train, params.values.size());
  LabeledBatch fixed;
  if (!train.online_batch) fixed = source(0, train.batch_size);

  Vec residual;
  for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
    const std::size_t steps = train.online_batch ? train.steps_per_epoch : 1;
    for (std::size_t s = 0; s < steps; ++s) {
      const LabeledBatch batch =
          train.online_batch ? source((epoch - 1) * train.steps_per_epoch + s, train.batch_size) : fixed;
      if (batch.target.size() != batch.x.cols()) throw InvalidArgument("teacher batch target count mismatch");
      const BackpropTrace trace = backprop(cfg, params, batch.x);
      const Eigen::Index B = batch.x.cols();
      residual.resize(B);
      double loss = 0.0;
      for (Eigen::Index i = 0; i < B; ++i) {
        const double z = trace.output[i];
        const double y = batch.target[i];
        residual[i] = (sigmoid(z) - y) / static_cast<double>(B);
        loss += bce_with_logit(y, z);
      }
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "teacher training diverged: loss is " << loss << " at epoch " << epoch;
        throw NumericalError(os.str());
      }
      stepper.step(params.values, trace_accumulate(cfg, trace, residual));
    }
    if (next != wanted.end() && *next == epoch) {
      out.push_back({epoch, params});
      ++next;
    }
  }
  return out;
}

LinearTrainResult train_linearized(const NetConfig& cfg, const ParamVector& params0, const LabeledBatch& data,
                                   const LinearLoss& loss, const TrainConfig& train, std::uint64_t seed,
                                   DeltaRole role) {
  train.validate();
  check_batch(data, loss);
  const ParamLayout layout(cfg);
  const BackpropTrace full = backprop(cfg, params0, data.x);
  const Eigen::Index n = data.x.cols();
  const Eigen::Index B = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(train.batch_size));

  LinearTrainResult result;
  result.delta = {Vec::Zero(layout.size()), role};
  Vec& w = result.delta.values;
  Stepper stepper(train, w.size());
  auto gen = rng::engine(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const bool full_batch = B == n;

  Vec residual;
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    if (full_batch) {
      const Vec z = full.output + trace_dot(cfg, full, w);
      linear_residual(loss, z, data, residual);
      stepper.step(w, trace_accumulate(cfg, full, residual));
    } else {
      std::shuffle(order.begin(), order.end(), gen);
      for (Eigen::Index start = 0; start < n; start += B) {
        const Eigen::Index len = std::min(B, n - start);
        std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
        const BackpropTrace sub = select_columns(full, idx);
        LabeledBatch batch{data.x(Eigen::all, idx), data.target(idx),
                           data.hard.size() ? Vec(data.hard(idx)) : Vec()};
        const Vec z = sub.output + trace_dot(cfg, sub, w);
        linear_residual(loss, z, batch, residual);
        stepper.step(w, trace_accumulate(cfg, sub, residual));
      }
    }
    ++result.epochs_run;
    result.norm_history.push_back(w.norm());
  }

  const Vec z = full.output + trace_dot(cfg, full, w);
  result.final_loss = linear_residual(loss, z, data, residual);
  result.final_grad_norm = trace_accumulate(cfg, full, residual).norm();
  result.converged = result.final_grad_norm <= train.grad_tol;
  if (!all_finite(w)) throw NumericalError("linearized training produced non-finite weights");
  return result;
}

LinearTrainResult train_linearized_online(const NetConfig& cfg, const ParamVector& params0, const BatchSource& source,
                                          const LinearLoss& loss, const TrainConfig& train, DeltaRole role,
                                          bool record_norms) {
  train.validate();
  const ParamLayout layout(cfg);
  LinearTrainResult result;
  result.delta = {Vec::Zero(layout.size()), role};
  Vec& w = result.delta.values;
  Stepper stepper(train, w.size());

  Vec residual;
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    for (std::size_t s = 0; s < train.steps_per_epoch; ++s) {
      const LabeledBatch batch = source(epoch * train.steps_per_epoch + s, train.batch_size);
      check_batch(batch, loss);
      const BackpropTrace trace = backprop(cfg, params0, batch.x);
      const Vec z = trace.output + trace_dot(cfg, trace, w);
      result.final_loss = linear_residual(loss, z, batch, residual);
      const Vec grad = trace_accumulate(cfg, trace, residual);
      result.final_grad_norm = grad.norm();
      stepper.step(w, grad);
    }
    ++result.epochs_run;
    if (record_norms) result.norm_history.push_back(w.norm());
  }
  result.converged = result.final_grad_norm <= train.grad_tol;
  if (!all_finite(w)) throw NumericalError("online linearized training produced non-finite weights");
  return result;
}

}  // namespace ntkd
