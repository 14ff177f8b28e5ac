#pragma once

#include "ntkd/experiments.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ntkd {

const char* library_version() noexcept;

enum class OutputFormat { csv, json };

/// Fixed CSV header: experiment, config_hash, seed, n, rho, T, epoch, q,
/// p_flip, beta, value_name, value, flag, wall_ms.
const std::vector<std::string>& csv_columns();

/// Doubles use 17 significant digits so values round-trip; empty optionals
/// are empty cells.
void write_csv(std::ostream& os, const std::vector<RunRecord>& rows);
void write_rows_json(std::ostream& os, const std::vector<RunRecord>& rows);

/// Full resolved config, seeds of every unit, library version and status.
nlohmann::json make_manifest(const ExperimentConfig& cfg, const ExperimentResult& result, const std::string& data_file);

struct RunSummary {
  /// 0 success, 2 when any unit failed numerically (rows of the others are kept).
  int exit_code = 0;
  std::size_t rows = 0;
  std::vector<UnitFailure> failures;
  std::filesystem::path data_path;
  std::filesystem::path manifest_path;
};

/// Runs the experiment and writes <out>/<kind>.csv (or .json) and
/// <out>/<kind>.manifest.json.
RunSummary run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, OutputFormat format);

struct ValidationReport {
  ExperimentConfig config;
  double cost = 0.0;
  bool cost_warning = false;
  std::vector<std::string> notes;
};

/// Parses and validates without running. Throws ConfigError on any problem.
ValidationReport validate(const ExperimentConfig& cfg);

}  // namespace ntkd
