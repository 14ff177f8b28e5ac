#pragma once

#include "ntkd/config.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ntkd {

/// One atomic measurement. Empty optionals are written as empty CSV cells.
/// value_name may carry qualifiers for variables without a column, as in
/// "frob_rel_error[m=256]".
struct RunRecord {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n;
  std::optional<double> rho;
  std::optional<double> T;
  std::optional<std::size_t> epoch;
  std::optional<int> q;
  std::optional<double> p_flip;
  std::optional<double> beta;
  std::string value_name;
  double value = 0.0;
  std::string flag;
  double wall_ms = 0.0;
};

struct UnitFailure {
  std::string unit;
  std::string message;
};

struct UnitSeed {
  std::string unit;
  std::uint64_t seed = 0;
};

struct ExperimentResult {
  std::vector<RunRecord> rows;
  std::vector<UnitFailure> failures;
  std::vector<UnitSeed> unit_seeds;
};

/// Runs every unit of the experiment (on cfg.threads workers) and collects
/// rows in unit order, so the output does not depend on scheduling. A unit
/// that throws is recorded as a failure; the rows of the other units are kept.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// --- shared building blocks (also used by the tests) ------------------------

/// Labeling function z_g = scale * (f(x) - offset). For a network, f is a
/// random initialization and offset the median of f over a reference sample
/// when centering is on; for a mixture, offset is 0.
class GroundTruth {
 public:
  GroundTruth(const GroundTruthConfig& cfg, int d, std::uint64_t seed, double input_sigma = 5.0);

  Vec operator()(const Mat& X) const;
  double offset() const noexcept { return offset_; }

 private:
  GroundTruthConfig cfg_;
  ParamVector params_;
  MixtureSpec mixture_;
  double offset_ = 0.0;
};

/// Online Adam on hard labels 1{z_g > 0}, checkpoints at powers of two plus
/// the extra epochs.
std::vector<TeacherCheckpoint> train_hard_teacher(const TeacherConfig& teacher, const GroundTruth& truth,
                                                  std::uint64_t seed, double input_sigma = 5.0);

using BatchLogits = std::function<Vec(const Mat& X)>;

/// Online L2 training of the linear model toward `target` on fresh inputs.
LinearTrainResult train_online_oracle(const NetConfig& cfg, const ParamVector& params0, const BatchLogits& target,
                                      const TrainConfig& train, std::uint64_t seed, DeltaRole role,
                                      bool record_norms = false, double input_sigma = 5.0);

/// Effective logits of each column; y_g from `truth`. Saturated entries (rho = 0)
/// are counted in `saturated` when given.
Vec effective_logits(const Vec& z_t, const Vec& z_g, const DistillParams& params, std::size_t* saturated = nullptr);

}  // namespace ntkd
