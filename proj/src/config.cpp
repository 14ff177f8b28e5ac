#include "ntkd/config.hpp"

#include "ntkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace ntkd {

using nlohmann::json;

namespace {

const char* type_name(const json& j) { return j.type_name(); }

std::string join_path(const std::string& base, const std::string& key) { return base + "/" + key; }

// Field access with JSON-pointer paths in every error.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", std::string("expected an object, got ") + type_name(j_));
  }

  const std::string& path() const noexcept { return path_; }
  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const std::string where = key.empty() ? (path_.empty() ? "/" : path_) : join_path(path_, key);
    throw ConfigError(where + ": " + msg);
  }

  void reject_unknown(std::initializer_list<const char*> known) const {
    std::set<std::string> names(known.begin(), known.end());
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!names.count(it.key())) fail(it.key(), "unknown field");
    }
  }

  Reader child(const char* key) const { return Reader(j_.at(key), join_path(path_, key)); }
  const json& raw(const char* key) const { return j_.at(key); }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(key, std::string("expected a number, got ") + type_name(v));
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }

  std::uint64_t unsigned_int(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    return as_unsigned(j_.at(key), key);
  }

  int integer(const char* key, int def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, std::string("expected an integer, got ") + type_name(v));
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail(key, "out of range");
    return static_cast<int>(x);
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(key, std::string("expected true or false, got ") + type_name(v));
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(key, std::string("expected a string, got ") + type_name(v));
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key, const std::vector<double>& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    // {"min": a, "max": b, "count": k} expands to a uniform grid
    if (v.is_object()) {
      Reader r(v, join_path(path_, key));
      r.reject_unknown({"min", "max", "count"});
      const double lo = r.number("min", 0.0);
      const double hi = r.number("max", 0.0);
      const auto k = static_cast<std::size_t>(r.unsigned_int("count", 0));
      if (k == 0) r.fail("count", "must be >= 1");
      if (k > 1 && !(hi > lo)) r.fail("max", "must exceed min");
      std::vector<double> out(k);
      for (std::size_t i = 0; i < k; ++i) out[i] = k == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (k - 1);
      return out;
    }
    if (!v.is_array()) fail(key, std::string("expected an array, got ") + type_name(v));
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(std::string(key) + "/" + std::to_string(i), "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<std::size_t> sizes(const char* key, const std::vector<std::size_t>& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(key, std::string("expected an array, got ") + type_name(v));
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(static_cast<std::size_t>(as_unsigned(v[i], std::string(key) + "/" + std::to_string(i))));
    return out;
  }

 private:
  std::uint64_t as_unsigned(const json& v, const std::string& key) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) fail(key, "must be non-negative");
    fail(key, std::string("expected a non-negative integer, got ") + type_name(v));
  }

  const json& j_;
  std::string path_;
};

// --- readers ----------------------------------------------------------------

NetConfig read_net(const Reader& r, NetConfig c) {
  r.reject_unknown({"d", "L", "m", "sigma_w", "sigma_b"});
  c.d = r.integer("d", c.d);
  c.L = r.integer("L", c.L);
  c.m = r.integer("m", c.m);
  c.sigma_w = r.number("sigma_w", c.sigma_w);
  c.sigma_b = r.number("sigma_b", c.sigma_b);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    r.fail("", e.what());
  }
  return c;
}

TrainConfig read_train(const Reader& r, TrainConfig c) {
  r.reject_unknown({"learning_rate", "batch_size", "epochs", "optimizer", "beta1", "beta2", "adam_eps",
                    "online_batch", "steps_per_epoch", "grad_tol"});
  c.learning_rate = r.number("learning_rate", c.learning_rate);
  c.batch_size = r.unsigned_int("batch_size", c.batch_size);
  c.epochs = r.unsigned_int("epochs", c.epochs);
  const std::string opt = r.string("optimizer", c.optimizer == Optimizer::adam ? "adam" : "sgd");
  if (opt == "adam")
    c.optimizer = Optimizer::adam;
  else if (opt == "sgd")
    c.optimizer = Optimizer::sgd;
  else
    r.fail("optimizer", "expected \"adam\" or \"sgd\", got \"" + opt + "\"");
  c.beta1 = r.number("beta1", c.beta1);
  c.beta2 = r.number("beta2", c.beta2);
  c.adam_eps = r.number("adam_eps", c.adam_eps);
  c.online_batch = r.boolean("online_batch", c.online_batch);
  c.steps_per_epoch = r.unsigned_int("steps_per_epoch", c.steps_per_epoch);
  c.grad_tol = r.number("grad_tol", c.grad_tol);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    r.fail("", e.what());
  }
  return c;
}

MixtureParams read_mixture(const Reader& r, MixtureParams p) {
  r.reject_unknown({"q", "d", "amplitude", "center_spread", "amplitude_jitter", "width_jitter", "exponent"});
  p.q = r.integer("q", p.q);
  p.d = r.integer("d", p.d);
  p.amplitude = r.number("amplitude", p.amplitude);
  p.center_spread = r.number("center_spread", p.center_spread);
  p.amplitude_jitter = r.number("amplitude_jitter", p.amplitude_jitter);
  p.width_jitter = r.number("width_jitter", p.width_jitter);
  const std::string e = r.string("exponent", p.exponent == MixtureExponent::sigma ? "sigma" : "sigma_squared");
  if (e == "sigma")
    p.exponent = MixtureExponent::sigma;
  else if (e == "sigma_squared")
    p.exponent = MixtureExponent::sigma_squared;
  else
    r.fail("exponent", "expected \"sigma\" or \"sigma_squared\"");
  try {
    p.validate();
  } catch (const InvalidArgument& ex) {
    r.fail("", ex.what());
  }
  return p;
}

TaskSpec read_task(const Reader& r, TaskSpec s) {
  r.reject_unknown({"d", "input_sigma", "kind", "mixture", "p_flip", "r", "T", "seed"});
  s.d = r.integer("d", s.d);
  s.input_sigma = r.number("input_sigma", s.input_sigma);
  if (r.has("kind")) {
    try {
      s.kind = target_kind_from_string(r.string("kind", ""));
    } catch (const InvalidArgument& e) {
      r.fail("kind", e.what());
    }
  }
  // the mixture dimension follows the task unless given explicitly
  s.mixture.d = s.d;
  if (r.has("mixture")) s.mixture = read_mixture(r.child("mixture"), s.mixture);
  s.p_flip = r.number("p_flip", s.p_flip);
  s.r = r.number("r", s.r);
  s.T = r.number("T", s.T);
  s.seed = r.unsigned_int("seed", s.seed);
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    r.fail("", e.what());
  }
  return s;
}

DistillParams read_distill(const Reader& r) {
  r.reject_unknown({"rho", "T"});
  DistillParams p{r.number("rho", 1.0), r.number("T", 1.0)};
  if (!(p.rho >= 0.0 && p.rho <= 1.0)) {
    std::ostringstream os;
    os << "rho=" << p.rho << " outside [0, 1]";
    r.fail("rho", os.str());
  }
  if (!(p.T > 0.0)) r.fail("T", "temperature must be positive");
  return p;
}

GroundTruthConfig read_ground_truth(const Reader& r, GroundTruthConfig g) {
  r.reject_unknown({"kind", "mixture", "net", "center", "center_samples", "scale"});
  const std::string kind = r.string("kind", g.kind == GroundTruthConfig::Kind::network ? "network" : "mixture");
  if (kind == "network")
    g.kind = GroundTruthConfig::Kind::network;
  else if (kind == "mixture")
    g.kind = GroundTruthConfig::Kind::mixture;
  else
    r.fail("kind", "expected \"network\" or \"mixture\"");
  if (r.has("mixture")) g.mixture = read_mixture(r.child("mixture"), g.mixture);
  if (r.has("net")) g.net = read_net(r.child("net"), g.net);
  g.center = r.boolean("center", g.center);
  g.center_samples = r.unsigned_int("center_samples", g.center_samples);
  g.scale = r.number("scale", g.scale);
  if (!(g.scale > 0.0)) r.fail("scale", "must be positive");
  if (g.center && g.center_samples == 0) r.fail("center_samples", "must be >= 1 when centering");
  return g;
}

TeacherConfig read_teacher(const Reader& r, TeacherConfig t) {
  r.reject_unknown({"net", "train", "extra_epochs", "use_epoch", "r", "perfect"});
  if (r.has("net")) t.net = read_net(r.child("net"), t.net);
  if (r.has("train")) t.train = read_train(r.child("train"), t.train);
  t.extra_epochs = r.sizes("extra_epochs", t.extra_epochs);
  if (r.has("use_epoch")) t.use_epoch = r.unsigned_int("use_epoch", 0);
  t.r = r.number("r", t.r);
  if (!(t.r > 0.0)) r.fail("r", "must be positive");
  t.perfect = r.boolean("perfect", t.perfect);
  return t;
}

std::string estimator_name(InefficiencyEstimator e) {
  return e == InefficiencyEstimator::leave_one_out ? "leave-one-out" : "last-point";
}

std::string angle_mode_name(RiskOptions::AngleMode m) {
  return m == RiskOptions::AngleMode::eq7 ? "logit-ratio" : "features";
}

std::string kernel_name(KernelSource k) { return k == KernelSource::analytic ? "analytic" : "empirical"; }

}  // namespace

// --- kinds ------------------------------------------------------------------

const std::vector<ExperimentKind>& all_experiment_kinds() {
  static const std::vector<ExperimentKind> kinds{
      ExperimentKind::effective_logits, ExperimentKind::ntk_check,         ExperimentKind::inefficiency,
      ExperimentKind::risk,             ExperimentKind::angle_dist,        ExperimentKind::hard_label_effect,
      ExperimentKind::zero_norm};
  return kinds;
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::effective_logits: return "effective-logits";
    case ExperimentKind::ntk_check: return "ntk-check";
    case ExperimentKind::inefficiency: return "inefficiency";
    case ExperimentKind::risk: return "risk";
    case ExperimentKind::angle_dist: return "angle-dist";
    case ExperimentKind::hard_label_effect: return "hard-label-effect";
    case ExperimentKind::zero_norm: return "zero-norm";
  }
  return "unknown";
}

std::optional<ExperimentKind> experiment_kind_from_string(const std::string& s) {
  for (ExperimentKind k : all_experiment_kinds())
    if (to_string(k) == s) return k;
  return std::nullopt;
}

// --- defaults ---------------------------------------------------------------

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;

  // shared pieces: online SGD oracles, the sign-flip teacher and the
  // perfect teacher trained on mixture labels
  c.oracle.m = 128;
  c.oracle.train.optimizer = Optimizer::sgd;
  c.oracle.train.learning_rate = 0.05;
  c.oracle.train.batch_size = 256;
  c.oracle.train.epochs = 2000;
  c.oracle.train.online_batch = true;

  TeacherConfig teacher;
  teacher.train.learning_rate = 1e-3;
  teacher.train.batch_size = 256;
  teacher.train.epochs = 4096;
  teacher.train.online_batch = true;

  TeacherConfig perfect = teacher;
  perfect.train.learning_rate = 1e-2;
  perfect.perfect = true;
  GroundTruthConfig mixture_truth;
  mixture_truth.kind = GroundTruthConfig::Kind::mixture;
  mixture_truth.mixture.d = 2;
  mixture_truth.scale = 1.0;

  switch (kind) {
    case ExperimentKind::effective_logits: {
      c.distill.clear();
      for (double T : {1.0, 5.0})
        for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0}) c.distill.push_back({rho, T});
      std::vector<double> z(101);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = -5.0 + 0.1 * static_cast<double>(i);
      c.effective_logits.z_t = z;
      c.effective_logits.label_smoothing_eps = {0.05, 0.1, 0.2, 0.5, 1.0};
      break;
    }
    case ExperimentKind::ntk_check:
      c.student = {2, 3, 1024, 1.0, 1.0};
      c.replicates = 5;
      break;
    case ExperimentKind::inefficiency: {
      c.student = {1, 5, 1024, 1.0, 1.0};
      c.n_grid = {8, 16, 32, 64, 128, 256};
      c.repeats = 20;
      for (int q : {10, 50, 250}) {
        TaskSpec t;
        t.d = 1;
        t.kind = TargetKind::mixture;
        t.mixture.q = q;
        t.mixture.d = 1;
        c.tasks.push_back(t);
      }
      TaskSpec zero;
      zero.d = 1;
      zero.kind = TargetKind::zero;
      c.tasks.push_back(zero);
      break;
    }
    case ExperimentKind::risk:
      c.student = {2, 3, 128, 1.0, 1.0};
      c.kernel = KernelSource::empirical;
      c.distill = {{1.0, 10.0}, {0.5, 10.0}};
      c.n_grid = {8, 32, 128};
      c.replicates = 10;
      c.ground_truth = mixture_truth;
      c.teacher = perfect;
      break;
    case ExperimentKind::angle_dist:
      c.student = {2, 3, 128, 1.0, 1.0};
      c.kernel = KernelSource::empirical;
      c.distill = {{1.0, 10.0}, {0.5, 10.0}, {0.0, 10.0}};
      c.replicates = 1;
      c.ground_truth = mixture_truth;
      c.teacher = perfect;
      break;
    case ExperimentKind::hard_label_effect:
      c.student = {2, 3, 1024, 1.0, 1.0};
      c.distill = {{1.0, 10.0}};
      c.n_grid = {256};
      c.replicates = 5;
      c.oracle.m = 64;
      c.teacher = teacher;
      break;
    case ExperimentKind::zero_norm:
      c.student = {2, 3, 128, 1.0, 1.0};
      c.distill = {{1.0, 10.0}};
      c.replicates = 3;
      c.ground_truth = mixture_truth;
      c.teacher = perfect;
      break;
  }
  return c;
}

// --- parsing ----------------------------------------------------------------

ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> expected) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // convert the byte offset to line and column
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    // drop the library prefix "[json.exception.parse_error.101] parse error at ..."
    if (const auto pos = msg.find(": "); pos != std::string::npos) msg = msg.substr(pos + 2);
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
  }

  Reader r(root, "");
  r.reject_unknown({"experiment", "seed", "threads", "output", "replicates", "student", "kernel", "distill", "task",
                    "tasks", "ground_truth", "teacher", "oracle", "n_grid", "repeats", "effective_logits",
                    "ntk_check", "inefficiency", "risk", "hard_label", "cost_budget"});

  std::optional<ExperimentKind> kind = expected;
  if (r.has("experiment")) {
    const std::string name = r.string("experiment", "");
    auto parsed = experiment_kind_from_string(name);
    if (!parsed) r.fail("experiment", "unknown experiment kind \"" + name + "\"");
    if (expected && *expected != *parsed)
      r.fail("experiment", "config is for \"" + name + "\" but \"" + to_string(*expected) + "\" was requested");
    kind = parsed;
  }
  if (!kind) r.fail("experiment", "missing experiment kind");

  ExperimentConfig c = default_config(*kind);
  c.seed = r.unsigned_int("seed", c.seed);
  c.threads = static_cast<unsigned>(r.unsigned_int("threads", c.threads));
  c.output = r.string("output", c.output);
  c.replicates = r.unsigned_int("replicates", c.replicates);
  if (r.has("student")) c.student = read_net(r.child("student"), c.student);

  if (r.has("kernel")) {
    Reader k = r.child("kernel");
    k.reject_unknown({"source", "jitter"});
    const std::string src = k.string("source", kernel_name(c.kernel));
    if (src == "analytic")
      c.kernel = KernelSource::analytic;
    else if (src == "empirical")
      c.kernel = KernelSource::empirical;
    else
      k.fail("source", "expected \"analytic\" or \"empirical\"");
    if (k.has("jitter")) {
      c.jitter = k.number("jitter", 0.0);
      if (*c.jitter < 0.0) k.fail("jitter", "must be non-negative");
    }
  }

  if (r.has("distill")) {
    const json& d = r.raw("distill");
    if (!d.is_array()) r.fail("distill", "expected an array of {rho, T}");
    c.distill.clear();
    for (std::size_t i = 0; i < d.size(); ++i) c.distill.push_back(read_distill(Reader(d[i], "/distill/" + std::to_string(i))));
  }

  if (r.has("task") && r.has("tasks")) r.fail("task", "give either task or tasks, not both");
  if (r.has("task")) c.tasks = {read_task(r.child("task"), TaskSpec{})};
  if (r.has("tasks")) {
    const json& t = r.raw("tasks");
    if (!t.is_array()) r.fail("tasks", "expected an array");
    c.tasks.clear();
    for (std::size_t i = 0; i < t.size(); ++i) c.tasks.push_back(read_task(Reader(t[i], "/tasks/" + std::to_string(i)), TaskSpec{}));
  }

  if (r.has("ground_truth")) c.ground_truth = read_ground_truth(r.child("ground_truth"), c.ground_truth);
  if (r.has("teacher")) c.teacher = read_teacher(r.child("teacher"), c.teacher.value_or(TeacherConfig{}));
  if (r.has("oracle")) {
    Reader o = r.child("oracle");
    o.reject_unknown({"m", "train"});
    c.oracle.m = o.integer("m", c.oracle.m);
    if (c.oracle.m < 1) o.fail("m", "must be >= 1");
    if (o.has("train")) c.oracle.train = read_train(o.child("train"), c.oracle.train);
  }

  c.n_grid = r.sizes("n_grid", c.n_grid);
  c.repeats = r.unsigned_int("repeats", c.repeats);

  if (r.has("effective_logits")) {
    Reader e = r.child("effective_logits");
    e.reject_unknown({"z_t", "label_smoothing_eps"});
    c.effective_logits.z_t = e.numbers("z_t", c.effective_logits.z_t);
    c.effective_logits.label_smoothing_eps = e.numbers("label_smoothing_eps", c.effective_logits.label_smoothing_eps);
  }
  if (r.has("ntk_check")) {
    Reader e = r.child("ntk_check");
    e.reject_unknown({"widths", "n", "diag_scales", "diag_samples"});
    if (e.has("widths")) {
      c.ntk_check.widths.clear();
      for (std::size_t w : e.sizes("widths", {})) c.ntk_check.widths.push_back(static_cast<int>(w));
    }
    c.ntk_check.n = e.unsigned_int("n", c.ntk_check.n);
    c.ntk_check.diag_scales = e.numbers("diag_scales", c.ntk_check.diag_scales);
    c.ntk_check.diag_samples = e.unsigned_int("diag_samples", c.ntk_check.diag_samples);
  }
  if (r.has("inefficiency")) {
    Reader e = r.child("inefficiency");
    e.reject_unknown({"estimator", "unreliable_fraction", "distill_targets"});
    const std::string est = e.string("estimator", estimator_name(c.inefficiency.estimator));
    if (est == "leave-one-out")
      c.inefficiency.estimator = InefficiencyEstimator::leave_one_out;
    else if (est == "last-point")
      c.inefficiency.estimator = InefficiencyEstimator::last_point;
    else
      e.fail("estimator", "expected \"leave-one-out\" or \"last-point\"");
    c.inefficiency.unreliable_fraction = e.number("unreliable_fraction", c.inefficiency.unreliable_fraction);
    c.inefficiency.distill_targets = e.boolean("distill_targets", c.inefficiency.distill_targets);
  }
  if (r.has("risk")) {
    Reader e = r.child("risk");
    e.reject_unknown({"test_samples", "angle_samples", "angle_grid", "angle_mode", "bound"});
    c.risk.test_samples = e.unsigned_int("test_samples", c.risk.test_samples);
    c.risk.angle_samples = e.unsigned_int("angle_samples", c.risk.angle_samples);
    c.risk.angle_grid = e.unsigned_int("angle_grid", c.risk.angle_grid);
    const std::string mode = e.string("angle_mode", angle_mode_name(c.risk.angle_mode));
    if (mode == "logit-ratio")
      c.risk.angle_mode = RiskOptions::AngleMode::eq7;
    else if (mode == "features")
      c.risk.angle_mode = RiskOptions::AngleMode::features;
    else
      e.fail("angle_mode", "expected \"logit-ratio\" or \"features\"");
    c.risk.bound = e.boolean("bound", c.risk.bound);
  }
  if (r.has("hard_label")) {
    Reader e = r.child("hard_label");
    e.reject_unknown({"test_samples", "online_norm"});
    c.hard_label.test_samples = e.unsigned_int("test_samples", c.hard_label.test_samples);
    c.hard_label.online_norm = e.boolean("online_norm", c.hard_label.online_norm);
  }
  c.cost_budget = r.number("cost_budget", c.cost_budget);

  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<ExperimentKind> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), expected);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& field, const std::string& msg) { throw ConfigError(field + ": " + msg); };
  auto check_net = [&](const NetConfig& n, const std::string& field) {
    try {
      n.validate();
    } catch (const InvalidArgument& e) {
      fail(field, e.what());
    }
  };

  if (c.replicates == 0) fail("/replicates", "must be >= 1");
  check_net(c.student, "/student");
  for (std::size_t i = 0; i < c.distill.size(); ++i) {
    try {
      c.distill[i].validate();
    } catch (const InvalidArgument& e) {
      fail("/distill/" + std::to_string(i), e.what());
    }
  }
  for (std::size_t i = 0; i < c.n_grid.size(); ++i)
    if (c.n_grid[i] == 0) fail("/n_grid/" + std::to_string(i), "must be >= 1");
  if (!std::is_sorted(c.n_grid.begin(), c.n_grid.end())) fail("/n_grid", "must be sorted ascending");
  for (std::size_t i = 0; i < c.tasks.size(); ++i) {
    try {
      c.tasks[i].validate();
    } catch (const InvalidArgument& e) {
      fail("/tasks/" + std::to_string(i), e.what());
    }
  }
  if (!(c.cost_budget > 0.0)) fail("/cost_budget", "must be positive");

  const auto needs_distill = [&](const char* what) {
    if (c.distill.empty()) fail("/distill", std::string(what) + " needs at least one {rho, T}");
  };
  const auto needs_grid = [&](const char* what) {
    if (c.n_grid.empty()) fail("/n_grid", std::string(what) + " needs a non-empty n grid");
  };

  switch (c.kind) {
    case ExperimentKind::effective_logits:
      needs_distill("effective-logits");
      if (c.effective_logits.z_t.empty()) fail("/effective_logits/z_t", "must not be empty");
      for (std::size_t i = 0; i < c.effective_logits.label_smoothing_eps.size(); ++i) {
        const double e = c.effective_logits.label_smoothing_eps[i];
        if (!(e > 0.0 && e <= 1.0)) fail("/effective_logits/label_smoothing_eps/" + std::to_string(i), "outside (0, 1]");
      }
      break;
    case ExperimentKind::ntk_check:
      if (c.ntk_check.widths.empty()) fail("/ntk_check/widths", "must not be empty");
      for (std::size_t i = 0; i < c.ntk_check.widths.size(); ++i)
        if (c.ntk_check.widths[i] < 1) fail("/ntk_check/widths/" + std::to_string(i), "must be >= 1");
      if (c.ntk_check.n < 2) fail("/ntk_check/n", "must be >= 2");
      for (double s : c.ntk_check.diag_scales)
        if (!(s > 0.0)) fail("/ntk_check/diag_scales", "scales must be positive");
      break;
    case ExperimentKind::inefficiency:
      needs_grid("inefficiency");
      if (c.tasks.empty()) fail("/tasks", "inefficiency needs at least one task");
      if (c.repeats == 0) fail("/repeats", "must be >= 1");
      if (c.inefficiency.distill_targets) needs_distill("distill_targets");
      for (std::size_t i = 0; i < c.tasks.size(); ++i) {
        if (c.tasks[i].d != c.student.d)
          fail("/tasks/" + std::to_string(i) + "/d", "must match the student input dimension " + std::to_string(c.student.d));
        if (c.tasks[i].kind == TargetKind::teacher_net) {
          if (c.ground_truth.kind == GroundTruthConfig::Kind::network && c.ground_truth.net.d != c.student.d)
            fail("/ground_truth/net/d", "must match the student input dimension");
        }
      }
      if (!(c.inefficiency.unreliable_fraction >= 0.0 && c.inefficiency.unreliable_fraction <= 1.0))
        fail("/inefficiency/unreliable_fraction", "outside [0, 1]");
      break;
    case ExperimentKind::risk:
    case ExperimentKind::angle_dist:
    case ExperimentKind::zero_norm:
      needs_distill(to_string(c.kind).c_str());
      if (c.kind == ExperimentKind::risk) needs_grid("risk");
      if (c.ground_truth.kind == GroundTruthConfig::Kind::network && c.ground_truth.net.d != c.student.d)
        fail("/ground_truth/net/d", "must match the student input dimension");
      if (c.ground_truth.kind == GroundTruthConfig::Kind::mixture && c.ground_truth.mixture.d != c.student.d)
        fail("/ground_truth/mixture/d", "must match the student input dimension");
      if (c.kind == ExperimentKind::risk && c.risk.bound && c.kernel != KernelSource::empirical)
        fail("/kernel/source", "the risk bound needs the empirical kernel (set risk.bound=false for analytic)");
      if (c.risk.test_samples == 0) fail("/risk/test_samples", "must be >= 1");
      if (c.risk.angle_grid < 2) fail("/risk/angle_grid", "must be >= 2");
      break;
    case ExperimentKind::hard_label_effect:
      if (!c.teacher) fail("/teacher", "hard-label-effect needs a teacher section");
      needs_grid("hard-label-effect");
      needs_distill("hard-label-effect");
      if (c.teacher->net.d != c.student.d) fail("/teacher/net/d", "must match the student input dimension");
      if (c.ground_truth.kind == GroundTruthConfig::Kind::network && c.ground_truth.net.d != c.student.d)
        fail("/ground_truth/net/d", "must match the student input dimension");
      if (c.hard_label.test_samples == 0) fail("/hard_label/test_samples", "must be >= 1");
      break;
  }
  if (c.teacher && c.teacher->use_epoch && *c.teacher->use_epoch > c.teacher->train.epochs)
    fail("/teacher/use_epoch", "beyond the last training epoch");
}

// --- serialization ----------------------------------------------------------

json to_json(const NetConfig& c) {
  return {{"d", c.d}, {"L", c.L}, {"m", c.m}, {"sigma_w", c.sigma_w}, {"sigma_b", c.sigma_b}};
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "sgd"},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"online_batch", c.online_batch},
          {"steps_per_epoch", c.steps_per_epoch},
          {"grad_tol", c.grad_tol}};
}

json to_json(const MixtureParams& p) {
  return {{"q", p.q},
          {"d", p.d},
          {"amplitude", p.amplitude},
          {"center_spread", p.center_spread},
          {"amplitude_jitter", p.amplitude_jitter},
          {"width_jitter", p.width_jitter},
          {"exponent", p.exponent == MixtureExponent::sigma ? "sigma" : "sigma_squared"}};
}

json to_json(const MixtureSpec& s) {
  json j = {{"params", to_json(s.params)}, {"seed", s.seed}};
  json modes = json::array();
  for (const MixtureMode& m : s.modes) {
    std::vector<double> c(m.center.data(), m.center.data() + m.center.size());
    modes.push_back({{"amplitude", m.amplitude}, {"center", c}, {"width", m.width}});
  }
  j["modes"] = std::move(modes);
  return j;
}

json to_json(const TaskSpec& s) {
  return {{"d", s.d},
          {"input_sigma", s.input_sigma},
          {"kind", to_string(s.kind)},
          {"mixture", to_json(s.mixture)},
          {"p_flip", s.p_flip},
          {"r", s.r},
          {"T", s.T},
          {"seed", s.seed}};
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.kind);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = c.output;
  j["replicates"] = c.replicates;
  j["student"] = to_json(c.student);
  j["kernel"] = {{"source", kernel_name(c.kernel)}, {"jitter", c.jitter ? json(*c.jitter) : json(nullptr)}};
  json distill = json::array();
  for (const DistillParams& d : c.distill) distill.push_back({{"rho", d.rho}, {"T", d.T}});
  j["distill"] = std::move(distill);
  json tasks = json::array();
  for (const TaskSpec& t : c.tasks) tasks.push_back(to_json(t));
  j["tasks"] = std::move(tasks);
  j["ground_truth"] = {{"kind", c.ground_truth.kind == GroundTruthConfig::Kind::network ? "network" : "mixture"},
                       {"mixture", to_json(c.ground_truth.mixture)},
                       {"net", to_json(c.ground_truth.net)},
                       {"center", c.ground_truth.center},
                       {"center_samples", c.ground_truth.center_samples},
                       {"scale", c.ground_truth.scale}};
  if (c.teacher) {
    j["teacher"] = {{"net", to_json(c.teacher->net)},
                    {"train", to_json(c.teacher->train)},
                    {"extra_epochs", c.teacher->extra_epochs},
                    {"use_epoch", c.teacher->use_epoch ? json(*c.teacher->use_epoch) : json(nullptr)},
                    {"r", c.teacher->r},
                    {"perfect", c.teacher->perfect}};
  } else {
    j["teacher"] = nullptr;
  }
  j["oracle"] = {{"m", c.oracle.m}, {"train", to_json(c.oracle.train)}};
  j["n_grid"] = c.n_grid;
  j["repeats"] = c.repeats;
  j["effective_logits"] = {{"z_t", c.effective_logits.z_t},
                           {"label_smoothing_eps", c.effective_logits.label_smoothing_eps}};
  j["ntk_check"] = {{"widths", c.ntk_check.widths},
                    {"n", c.ntk_check.n},
                    {"diag_scales", c.ntk_check.diag_scales},
                    {"diag_samples", c.ntk_check.diag_samples}};
  j["inefficiency"] = {{"estimator", estimator_name(c.inefficiency.estimator)},
                       {"unreliable_fraction", c.inefficiency.unreliable_fraction},
                       {"distill_targets", c.inefficiency.distill_targets}};
  j["risk"] = {{"test_samples", c.risk.test_samples},
               {"angle_samples", c.risk.angle_samples},
               {"angle_grid", c.risk.angle_grid},
               {"angle_mode", angle_mode_name(c.risk.angle_mode)},
               {"bound", c.risk.bound}};
  j["hard_label"] = {{"test_samples", c.hard_label.test_samples}, {"online_norm", c.hard_label.online_norm}};
  j["cost_budget"] = c.cost_budget;
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("threads");
  j.erase("output");
  // nlohmann objects keep keys sorted, so the dump is canonical
  const std::string canon = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double estimated_cost(const ExperimentConfig& c) {
  double per_grid = 0.0;
  for (std::size_t n : c.n_grid) {
    const double m = static_cast<double>(n) + 1.0;
    per_grid += m * m * m;
  }
  double mult = static_cast<double>(std::max<std::size_t>(c.replicates, 1));
  switch (c.kind) {
    case ExperimentKind::inefficiency: {
      mult *= static_cast<double>(c.repeats) * static_cast<double>(std::max<std::size_t>(c.tasks.size(), 1));
      if (c.inefficiency.distill_targets) mult *= static_cast<double>(c.distill.size());
      break;
    }
    case ExperimentKind::risk: mult *= static_cast<double>(c.distill.size()); break;
    default: break;
  }
  return per_grid * mult;
}

}  // namespace ntkd
