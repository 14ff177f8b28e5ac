// Command-line front end for the experiment runner.

#include "ntkd/errors.hpp"
#include "ntkd/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string format = "csv";
};

void add_run_flags(CLI::App* cmd, Flags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "Experiment config (JSON)");
  if (config_required) c->required();
  c->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory (default: the config's output field)");
  cmd->add_option("--seed", f.seed, "Root seed, overrides the config");
  cmd->add_option("--threads", f.threads, "Worker threads, 0 for all cores");
  cmd->add_option("--format", f.format, "Row format")->check(CLI::IsMember({"csv", "json"}));
}

ntkd::ExperimentConfig resolve(const Flags& f, std::optional<ntkd::ExperimentKind> kind) {
  ntkd::ExperimentConfig cfg = f.config.empty() ? ntkd::default_config(*kind) : ntkd::load_config(f.config, kind);
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (!f.out.empty()) cfg.output = f.out;
  ntkd::validate_config(cfg);
  return cfg;
}

int do_run(const Flags& f, std::optional<ntkd::ExperimentKind> kind) {
  const ntkd::ExperimentConfig cfg = resolve(f, kind);
  const auto format = f.format == "json" ? ntkd::OutputFormat::json : ntkd::OutputFormat::csv;
  const ntkd::RunSummary s = ntkd::run(cfg, cfg.output, format);
  std::cout << ntkd::to_string(cfg.kind) << ": " << s.rows << " rows -> " << s.data_path.string() << "\n";
  std::cout << "manifest: " << s.manifest_path.string() << "\n";
  for (const auto& failure : s.failures) std::cerr << "unit " << failure.unit << " failed: " << failure.message << "\n";
  if (!s.failures.empty()) std::cerr << "run incomplete: " << s.failures.size() << " unit(s) failed\n";
  return s.exit_code;
}

int do_validate(const Flags& f) {
  const ntkd::ValidationReport r = ntkd::validate(resolve(f, std::nullopt));
  std::cout << f.config << ": OK (" << ntkd::to_string(r.config.kind) << ", hash " << ntkd::config_hash(r.config)
            << ")\n";
  for (const std::string& note : r.notes) std::cout << "  " << note << "\n";
  if (r.cost_warning) std::cout << "warning: estimated kernel-solve cost exceeds the budget\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-regime knowledge distillation experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ntkd::library_version()));

  Flags flags;
  std::optional<ntkd::ExperimentKind> chosen;
  bool validate_only = false;

  for (ntkd::ExperimentKind kind : ntkd::all_experiment_kinds()) {
    auto* cmd = app.add_subcommand(ntkd::to_string(kind), "Run the " + ntkd::to_string(kind) + " experiment");
    add_run_flags(cmd, flags, false);
    cmd->callback([&chosen, kind] { chosen = kind; });
  }
  auto* run_cmd = app.add_subcommand("run", "Run the experiment named in the config");
  add_run_flags(run_cmd, flags, true);
  auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
  validate_cmd->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  validate_cmd->callback([&validate_only] { validate_only = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate_only) return do_validate(flags);
    return do_run(flags, chosen);
  } catch (const ntkd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ntkd::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}
