#include "ntkd/checkpoint.hpp"
#include "ntkd/config.hpp"
#include "ntkd/errors.hpp"
#include "ntkd/runner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ntkd;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ntkd-test-" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("minimal configs validate") {
    for (ExperimentKind k : all_experiment_kinds()) {
      const ExperimentConfig c = parse_config("{\"experiment\": \"" + to_string(k) + "\"}");
      CHECK(c.kind == k);
      CHECK_NOTHROW(validate(c));
      CHECK(config_hash(c) == config_hash(default_config(k)));
    }
  }

  TEST_CASE("resolved configs round-trip") {
    for (ExperimentKind k : all_experiment_kinds()) {
      const ExperimentConfig c = default_config(k);
      const ExperimentConfig back = parse_config(to_json(c).dump());
      CHECK(config_hash(back) == config_hash(c));
      CHECK(to_json(back) == to_json(c));
    }
  }

  TEST_CASE("range and field errors name the field") {
    const std::string e = error_of(R"({"experiment": "risk", "distill": [{"rho": 1.0, "T": 2}, {"rho": 1.5}]})");
    CHECK(e.find("/distill/1/rho") != std::string::npos);
    CHECK(e.find("outside [0, 1]") != std::string::npos);
    CHECK(error_of(R"({"experiment": "risk", "student": {"m": 64, "width": 3}})").find("/student/width") !=
          std::string::npos);
    CHECK(error_of(R"({"experiment": "risk", "seed": "x"})").find("/seed") != std::string::npos);
    CHECK(error_of(R"({"experiment": "nope"})").find("unknown experiment") != std::string::npos);
    CHECK(error_of(R"({"experiment": "risk", "distill": [{"rho": 0.5, "T": 0}]})").find("/distill/0/T") !=
          std::string::npos);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "risk"})", ExperimentKind::ntk_check), ConfigError);
  }

  TEST_CASE("syntax errors carry line and column") {
    const std::string e = error_of("{\n  \"experiment\": \"risk\",\n  \"seed\": ,\n}");
    CHECK(e.rfind("line 3, column", 0) == 0);
  }

  TEST_CASE("grid shorthand") {
    const ExperimentConfig c =
        parse_config(R"({"experiment": "effective-logits", "effective_logits": {"z_t": {"min": -1, "max": 1, "count": 5}}})");
    REQUIRE(c.effective_logits.z_t.size() == 5);
    CHECK(c.effective_logits.z_t[1] == doctest::Approx(-0.5));
  }

  TEST_CASE("cost warning for a huge grid") {
    ExperimentConfig c = parse_config(R"({"experiment": "inefficiency", "n_grid": [8, 100000]})");
    const ValidationReport r = validate(c);
    CHECK(r.cost_warning);
    CHECK(r.notes.size() >= 2);
    CHECK_FALSE(validate(default_config(ExperimentKind::inefficiency)).cost_warning);
  }

  TEST_CASE("hash ignores key order, threads and output") {
    const ExperimentConfig a = parse_config(R"({"experiment": "risk", "seed": 4, "n_grid": [8, 16, 32]})");
    const ExperimentConfig b =
        parse_config(R"({"n_grid": [8, 16, 32], "threads": 3, "output": "elsewhere", "seed": 4, "experiment": "risk"})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    ExperimentConfig c = a;
    c.seed = 5;
    CHECK(config_hash(c) != config_hash(a));
  }

  TEST_CASE("cross-field validation") {
    CHECK_THROWS_AS(parse_config(R"({"experiment": "risk", "n_grid": [32, 8]})"), ConfigError);
    CHECK_THROWS_AS(
        validate_config(parse_config(R"({"experiment": "risk", "kernel": {"source": "analytic"}, "risk": {"bound": true}})")),
        ConfigError);
  }
}

TEST_SUITE("runner") {
  TEST_CASE("csv layout and determinism") {
    ExperimentConfig c = default_config(ExperimentKind::effective_logits);
    c.effective_logits.z_t = {-1.0, 0.0, 2.0};
    const auto d1 = scratch_dir("a"), d2 = scratch_dir("b");
    const RunSummary s1 = run(c, d1, OutputFormat::csv);
    const RunSummary s2 = run(c, d2, OutputFormat::csv);
    CHECK(s1.exit_code == 0);
    CHECK(s1.data_path.filename() == "effective-logits.csv");

    auto strip_wall = [](const std::string& text) {
      std::istringstream in(text);
      std::string line, out;
      while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
      return out;
    };
    const std::string a = slurp(s1.data_path), b = slurp(s2.data_path);
    CHECK(a.rfind("experiment,config_hash,seed,n,rho,T,epoch,q,p_flip,beta,value_name,value,flag,wall_ms\n", 0) == 0);
    CHECK(strip_wall(a) == strip_wall(b));
    CHECK(a.find("\"z_eff[z_t=") != std::string::npos);  // qualifiers contain commas and get quoted

    const nlohmann::json m = nlohmann::json::parse(slurp(s1.manifest_path));
    CHECK(m["status"] == "complete");
    CHECK(m["config_hash"] == config_hash(c));
    CHECK(m["library"]["version"] == library_version());
    CHECK(m["rows"] == s1.rows);

    const RunSummary sj = run(c, d1, OutputFormat::json);
    CHECK(nlohmann::json::parse(slurp(sj.data_path)).size() == s1.rows);
  }

  TEST_CASE("a failing unit keeps the other rows") {
    // a huge teacher scale overflows the correction logit in every replicate
    ExperimentConfig c = default_config(ExperimentKind::hard_label_effect);
    c.replicates = 1;
    c.n_grid = {8};
    c.student.m = 64;
    c.teacher->train.epochs = 2;
    c.teacher->r = 1e6;
    c.oracle.train.epochs = 2;
    const RunSummary s = run(c, scratch_dir("fail"), OutputFormat::csv);
    CHECK(s.exit_code == 2);
    REQUIRE(s.failures.size() == 1);
    const nlohmann::json m = nlohmann::json::parse(slurp(s.manifest_path));
    CHECK(m["status"] == "incomplete");
    CHECK(m["failures"].size() == 1);
  }

  TEST_CASE("unit seeds do not depend on the replicate count") {
    ExperimentConfig c = default_config(ExperimentKind::ntk_check);
    c.ntk_check.widths = {16, 32};
    c.ntk_check.diag_samples = 10;
    c.replicates = 2;
    const ExperimentResult two = run_experiment(c);
    c.replicates = 3;
    const ExperimentResult three = run_experiment(c);
    REQUIRE(three.unit_seeds.size() > two.unit_seeds.size());
    for (std::size_t i = 0; i < two.unit_seeds.size(); ++i)
      if (two.unit_seeds[i].unit.find("replicate") != std::string::npos) {
        bool found = false;
        for (const UnitSeed& u : three.unit_seeds) found = found || (u.unit == two.unit_seeds[i].unit && u.seed == two.unit_seeds[i].seed);
        CHECK(found);
      }
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("binary round trip") {
    Checkpoint ck{{2, 2, 8, 1.0, 0.5}, 42, 128, init_params({2, 2, 8, 1.0, 0.5}, 42)};
    std::stringstream buf;
    write_checkpoint(buf, ck);
    CHECK(buf.str().size() == 64 + 8 * static_cast<std::size_t>(param_count(ck.cfg)));
    CHECK(buf.str().substr(0, 8) == "NTKDCKPT");
    const Checkpoint back = read_checkpoint(buf);
    CHECK(back.cfg == ck.cfg);
    CHECK(back.epoch == 128);
    CHECK(back.seed == 42);
    CHECK(back.params.values == ck.params.values);

    std::string bytes = buf.str();
    bytes[0] = 'X';
    std::istringstream bad(bytes);
    CHECK_THROWS(read_checkpoint(bad));
  }
}
