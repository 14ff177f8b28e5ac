#include "ntkd/runner.hpp"

#include "ntkd/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ntkd {

namespace {

constexpr const char* kSeedScheme =
    "unit seed = derive(root, [fnv1a(kind), fnv1a(family), index]); "
    "derive: s0 = splitmix64(root), s_k = splitmix64(s_{k-1} xor splitmix64(c_k + 0x9e3779b97f4a7c15)); "
    "sub-streams use derive(unit, [fnv1a(label)]) with labels such as inputs, train, test, teacher, student-init";

std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T>
std::string fmt_opt(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>)
    return fmt_double(*v);
  else
    return std::to_string(*v);
}

// Quotes a CSV field when it contains a separator or a quote.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <class T>
nlohmann::json json_opt(const std::optional<T>& v) {
  if (!v) return nullptr;
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(*v)) return fmt_double(*v);
  return *v;
}

nlohmann::json json_number(double x) {
  if (!std::isfinite(x)) return fmt_double(x);
  return x;
}

}  // namespace

const char* library_version() noexcept { return "1.0.0"; }

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{"experiment", "config_hash", "seed",  "n",          "rho",
                                             "T",          "epoch",       "q",     "p_flip",     "beta",
                                             "value_name", "value",       "flag",  "wall_ms"};
  return cols;
}

void write_csv(std::ostream& os, const std::vector<RunRecord>& rows) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  char wall[32];
  for (const RunRecord& r : rows) {
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
    os << csv_field(r.experiment) << ',' << r.config_hash << ',' << r.seed << ',' << fmt_opt(r.n) << ','
       << fmt_opt(r.rho) << ',' << fmt_opt(r.T) << ',' << fmt_opt(r.epoch) << ',' << fmt_opt(r.q) << ','
       << fmt_opt(r.p_flip) << ',' << fmt_opt(r.beta) << ',' << csv_field(r.value_name) << ','
       << fmt_double(r.value) << ',' << csv_field(r.flag) << ',' << wall << '\n';
  }
}

void write_rows_json(std::ostream& os, const std::vector<RunRecord>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const RunRecord& r : rows) {
    arr.push_back({{"experiment", r.experiment},
                   {"config_hash", r.config_hash},
                   {"seed", r.seed},
                   {"n", json_opt(r.n)},
                   {"rho", json_opt(r.rho)},
                   {"T", json_opt(r.T)},
                   {"epoch", json_opt(r.epoch)},
                   {"q", json_opt(r.q)},
                   {"p_flip", json_opt(r.p_flip)},
                   {"beta", json_opt(r.beta)},
                   {"value_name", r.value_name},
                   {"value", json_number(r.value)},
                   {"flag", r.flag},
                   {"wall_ms", r.wall_ms}});
  }
  os << arr.dump(1) << '\n';
}

nlohmann::json make_manifest(const ExperimentConfig& cfg, const ExperimentResult& result, const std::string& data_file) {
  nlohmann::json units = nlohmann::json::array();
  for (const UnitSeed& u : result.unit_seeds) units.push_back({{"unit", u.unit}, {"seed", u.seed}});
  nlohmann::json failures = nlohmann::json::array();
  for (const UnitFailure& f : result.failures) failures.push_back({{"unit", f.unit}, {"error", f.message}});
  return {{"library", {{"name", "ntkd"}, {"version", library_version()}}},
          {"experiment", to_string(cfg.kind)},
          {"config", to_json(cfg)},
          {"config_hash", config_hash(cfg)},
          {"root_seed", cfg.seed},
          {"seed_scheme", kSeedScheme},
          {"units", std::move(units)},
          {"status", result.failures.empty() ? "complete" : "incomplete"},
          {"failures", std::move(failures)},
          {"rows", result.rows.size()},
          {"data_file", data_file},
          {"columns", csv_columns()}};
}

RunSummary run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, OutputFormat format) {
  validate_config(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError(out_dir.string() + ": cannot create output directory: " + ec.message());

  ExperimentResult result = run_experiment(cfg);
  const std::string hash = config_hash(cfg);
  for (RunRecord& r : result.rows) {
    r.experiment = to_string(cfg.kind);
    r.config_hash = hash;
  }

  RunSummary summary;
  const std::string stem = to_string(cfg.kind);
  summary.data_path = out_dir / (stem + (format == OutputFormat::csv ? ".csv" : ".json"));
  summary.manifest_path = out_dir / (stem + ".manifest.json");
  {
    std::ofstream out(summary.data_path, std::ios::binary);
    if (!out) throw ConfigError(summary.data_path.string() + ": cannot open for writing");
    if (format == OutputFormat::csv)
      write_csv(out, result.rows);
    else
      write_rows_json(out, result.rows);
  }
  {
    std::ofstream out(summary.manifest_path, std::ios::binary);
    if (!out) throw ConfigError(summary.manifest_path.string() + ": cannot open for writing");
    out << make_manifest(cfg, result, summary.data_path.filename().string()).dump(2) << '\n';
  }
  summary.rows = result.rows.size();
  summary.failures = result.failures;
  summary.exit_code = result.failures.empty() ? 0 : 2;
  return summary;
}

ValidationReport validate(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ValidationReport report;
  report.config = cfg;
  report.cost = estimated_cost(cfg);
  report.cost_warning = report.cost > cfg.cost_budget;
  std::ostringstream os;
  os << "kernel-solve cost estimate " << report.cost << " flops (budget " << cfg.cost_budget << ")";
  report.notes.push_back(os.str());
  if (!cfg.n_grid.empty() && cfg.n_grid.back() > 1024)
    report.notes.push_back("n grid exceeds 1024; kernel memory grows as n^2 per repeat");
  if (cfg.repeats > 20) report.notes.push_back("more than 20 repeats");
  return report;
}

}  // namespace ntkd
