#pragma once

#include "ntkd/distillation.hpp"
#include "ntkd/kernel.hpp"
#include "ntkd/metrics.hpp"
#include "ntkd/network.hpp"
#include "ntkd/tasks.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ntkd {

enum class ExperimentKind { effective_logits, ntk_check, inefficiency, risk, angle_dist, hard_label_effect, zero_norm };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> experiment_kind_from_string(const std::string& s);
const std::vector<ExperimentKind>& all_experiment_kinds();

/// Function whose sign defines the hard labels y_g = 1{z_g(x) > 0}.
struct GroundTruthConfig {
  enum class Kind { mixture, network };
  Kind kind = Kind::network;
  MixtureParams mixture{};
  /// Randomly initialized network used as the labeling function.
  NetConfig net{2, 2, 32, 1.0, 1.0};
  /// Subtract the median of f over a reference sample so classes are balanced.
  bool center = true;
  std::size_t center_samples = 20001;
  /// z_g = scale * (f(x) - offset)
  double scale = 0.3;
};

/// Network trained online on ground-truth hard labels.
struct TeacherConfig {
  NetConfig net{2, 2, 64, 1.0, 1.0};
  TrainConfig train{};
  /// Checkpoints are powers of two up to train.epochs plus these.
  std::vector<std::size_t> extra_epochs;
  /// Checkpoint used where a single teacher is needed (default: last).
  std::optional<std::size_t> use_epoch;
  /// Reduction factor applied to the teacher logits.
  double r = 0.3;
  /// Hard labels for the student come from the teacher's own sign
  /// (perfect-teacher distillation) instead of the ground truth.
  bool perfect = false;
};

/// Online-batch training of the linear model for dw_*, dw_z and dw_g.
struct OracleConfig {
  /// Width of the network whose features are trained (depth and input size
  /// follow the student).
  int m = 128;
  TrainConfig train{};
};

struct EffectiveLogitsOptions {
  std::vector<double> z_t;
  std::vector<double> label_smoothing_eps;
};

struct NtkCheckOptions {
  std::vector<int> widths{64, 256, 1024, 4096};
  std::size_t n = 16;
  std::vector<double> diag_scales{1, 3, 10, 30, 100};
  std::size_t diag_samples = 10000;
};

struct InefficiencyConfig {
  InefficiencyEstimator estimator = InefficiencyEstimator::leave_one_out;
  double unreliable_fraction = 0.2;
  /// Convert task targets to effective logits for each distill entry.
  bool distill_targets = false;
};

struct RiskOptions {
  std::size_t test_samples = 10000;
  std::size_t angle_samples = 10000;
  std::size_t angle_grid = 512;
  enum class AngleMode { eq7, features };
  AngleMode angle_mode = AngleMode::features;
  /// Compute angles and the bound (needs the empirical kernel and oracles).
  bool bound = true;
};

struct HardLabelOptions {
  std::size_t test_samples = 4000;
  /// "online" trains dw_g; "kernel" uses sqrt(<dz_g, dz_g>) at the student's n.
  bool online_norm = true;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::effective_logits;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output = "results";
  std::size_t replicates = 1;

  NetConfig student{2, 3, 1024, 1.0, 1.0};
  KernelSource kernel = KernelSource::analytic;
  std::optional<double> jitter;
  std::vector<DistillParams> distill{{1.0, 1.0}};

  std::vector<TaskSpec> tasks;
  GroundTruthConfig ground_truth{};
  std::optional<TeacherConfig> teacher;
  OracleConfig oracle{};

  std::vector<std::size_t> n_grid;
  std::size_t repeats = 20;

  EffectiveLogitsOptions effective_logits{};
  NtkCheckOptions ntk_check{};
  InefficiencyConfig inefficiency{};
  RiskOptions risk{};
  HardLabelOptions hard_label{};

  /// validate warns when the kernel-solve cost estimate exceeds this many flops.
  double cost_budget = 1e12;
};

/// Defaults for each experiment, used when a field is absent.
ExperimentConfig default_config(ExperimentKind kind);

/// Parses JSON text. Errors are ConfigError with line/column (syntax) or a
/// JSON-pointer path (fields). Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> expected = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<ExperimentKind> expected = std::nullopt);

/// Cross-field checks; throws ConfigError naming the field.
void validate_config(const ExperimentConfig& cfg);

/// Fully resolved configuration, every default written out.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// FNV-1a over the canonical (key-sorted) dump of the resolved config,
/// excluding the thread count and output path, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Rough flop count of the kernel solves, sum of n^3 over grid, repeats,
/// tasks and replicates.
double estimated_cost(const ExperimentConfig& cfg);

nlohmann::json to_json(const NetConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const MixtureParams& p);
nlohmann::json to_json(const MixtureSpec& s);
nlohmann::json to_json(const TaskSpec& s);

}  // namespace ntkd
