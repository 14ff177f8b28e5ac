#include "ntkd/experiments.hpp"

#include "ntkd/errors.hpp"
#include "ntkd/hardlabel.hpp"
#include "ntkd/parallel.hpp"
#include "ntkd/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>

namespace ntkd {

namespace {

using rng::derive;
using rng::hash_label;

constexpr double kInputSigma = 5.0;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::uint64_t sub_seed(std::uint64_t seed, const char* label) { return derive(seed, {hash_label(label)}); }

struct Unit {
  std::string label;
  std::uint64_t seed = 0;
  std::function<std::vector<RunRecord>(std::uint64_t)> body;
};

struct UnitOutcome {
  std::vector<RunRecord> rows;
  std::optional<std::string> error;
};

std::vector<UnitOutcome> execute(const std::vector<Unit>& units, unsigned threads) {
  std::vector<UnitOutcome> out(units.size());
  parallel_for(units.size(), resolve_threads(threads), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out[i].rows = units[i].body(units[i].seed);
    } catch (const std::exception& e) {
      out[i].rows.clear();
      out[i].error = e.what();
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    for (RunRecord& r : out[i].rows) {
      r.wall_ms = ms;
      r.seed = units[i].seed;
    }
  });
  return out;
}

void collect(ExperimentResult& result, const std::vector<Unit>& units, std::vector<UnitOutcome>& outcomes) {
  for (std::size_t i = 0; i < units.size(); ++i) {
    result.unit_seeds.push_back({units[i].label, units[i].seed});
    if (outcomes[i].error) {
      result.failures.push_back({units[i].label, *outcomes[i].error});
      continue;
    }
    for (RunRecord& r : outcomes[i].rows) result.rows.push_back(std::move(r));
  }
}

RunRecord row(const std::string& name, double value, const std::string& flag = "") {
  RunRecord r;
  r.value_name = name;
  r.value = value;
  r.flag = flag;
  return r;
}

std::uint64_t unit_seed(const ExperimentConfig& c, const char* family, std::uint64_t index) {
  return derive(c.seed, {hash_label(to_string(c.kind)), hash_label(family), index});
}

/// Teacher logits and hard labels used by the risk, angle and zero-norm runs.
/// Without a trained teacher the ground truth itself is the teacher; a
/// perfect teacher also supplies the hard labels.
struct TeacherView {
  std::shared_ptr<GroundTruth> truth;
  std::optional<NetConfig> net;
  ParamVector params;
  double r = 1.0;
  bool perfect = false;

  Vec z_t(const Mat& X) const {
    if (!net) return (*truth)(X);
    return r * forward_batch(*net, params, X);
  }
  Vec z_g(const Mat& X) const { return perfect ? z_t(X) : (*truth)(X); }
};

TeacherView make_teacher_view(const ExperimentConfig& c, std::uint64_t seed) {
  TeacherView v;
  v.truth = std::make_shared<GroundTruth>(c.ground_truth, c.student.d, sub_seed(seed, "ground-truth"));
  if (c.teacher) {
    const auto checkpoints = train_hard_teacher(*c.teacher, *v.truth, sub_seed(seed, "teacher"));
    const std::size_t want = c.teacher->use_epoch.value_or(c.teacher->train.epochs);
    auto it = std::find_if(checkpoints.begin(), checkpoints.end(),
                           [&](const TeacherCheckpoint& ck) { return ck.epoch == want; });
    if (it == checkpoints.end()) throw InvalidArgument("teacher checkpoint for epoch " + std::to_string(want) + " missing");
    v.net = c.teacher->net;
    v.params = it->params;
    v.r = c.teacher->r;
    v.perfect = c.teacher->perfect;
  }
  return v;
}

Mat slice_gram(const Mat& full, std::size_t n) {
  const auto k = static_cast<Eigen::Index>(n);
  return full.topLeftCorner(k, k);
}

double accuracy(const Vec& z, const Vec& y) {
  return ((z.array() > 0.0).cast<double>() == y.array()).cast<double>().mean();
}

// --- effective-logits ---------------------------------------------------------

ExperimentResult run_effective_logits(const ExperimentConfig& c) {
  std::vector<Unit> units;
  for (std::size_t k = 0; k < c.distill.size(); ++k) {
    const DistillParams p = c.distill[k];
    units.push_back({"distill/" + std::to_string(k), unit_seed(c, "distill", k), [&c, p](std::uint64_t) {
                       std::vector<RunRecord> rows;
                       for (double z : c.effective_logits.z_t) {
                         const int y = z > 0.0 ? 1 : 0;
                         const SaturatedLogit s = effective_logit_or_saturate(z, y, p);
                         RunRecord r = row("z_eff[z_t=" + num(z) + ",y_g=" + std::to_string(y) + "]", s.value,
                                           s.saturated ? "saturated" : "");
                         r.rho = p.rho;
                         r.T = p.T;
                         rows.push_back(r);
                       }
                       // jump of the effective logit across the decision boundary
                       const SaturatedLogit up = effective_logit_or_saturate(0.0, 1, p);
                       const SaturatedLogit down = effective_logit_or_saturate(0.0, 0, p);
                       RunRecord r = row("z_eff_jump_at_0", up.value - down.value, up.saturated ? "saturated" : "");
                       r.rho = p.rho;
                       r.T = p.T;
                       rows.push_back(r);
                       return rows;
                     }});
  }
  if (!c.effective_logits.label_smoothing_eps.empty()) {
    units.push_back({"label-smoothing", unit_seed(c, "label-smoothing", 0), [&c](std::uint64_t) {
                       std::vector<RunRecord> rows;
                       for (double eps : c.effective_logits.label_smoothing_eps)
                         for (int y : {1, 0})
                           rows.push_back(row("z_ls[eps=" + num(eps) + ",y_g=" + std::to_string(y) + "]",
                                              label_smoothing_logit(y, eps)));
                       return rows;
                     }});
  }
  auto outcomes = execute(units, c.threads);
  ExperimentResult result;
  collect(result, units, outcomes);
  return result;
}

// --- ntk-check ----------------------------------------------------------------

ExperimentResult run_ntk_check(const ExperimentConfig& c) {
  std::vector<Unit> units;
  for (std::size_t rep = 0; rep < c.replicates; ++rep) {
    units.push_back({"replicate/" + std::to_string(rep), unit_seed(c, "replicate", rep), [&c](std::uint64_t seed) {
                       const Mat X = sample_inputs(c.student.d, c.ntk_check.n, sub_seed(seed, "inputs"), kInputSigma);
                       const Mat exact = analytic_ntk_entries(c.student, X);
                       std::vector<RunRecord> rows;
                       for (int m : c.ntk_check.widths) {
                         NetConfig cfg = c.student;
                         cfg.m = m;
                         const ParamVector p0 =
                             init_params(cfg, derive(seed, {hash_label("init"), static_cast<std::uint64_t>(m)}));
                         const Mat emp = empirical_ntk_entries(cfg, p0, X);
                         rows.push_back(row("frob_rel_error[m=" + std::to_string(m) + "]",
                                            relative_frobenius_error(emp, exact)));
                       }
                       return rows;
                     }});
  }
  for (std::size_t k = 0; k < c.ntk_check.diag_scales.size(); ++k) {
    const double scale = c.ntk_check.diag_scales[k];
    units.push_back({"diag/" + std::to_string(k), unit_seed(c, "diag", k), [&c, scale](std::uint64_t seed) {
                       const Mat X = sample_inputs(c.student.d, c.ntk_check.diag_samples, seed, scale);
                       const Vec theta = analytic_ntk_diag(c.student, X);
                       const Vec sq = X.colwise().squaredNorm().transpose();
                       double lo = std::numeric_limits<double>::infinity(), sum = 0.0;
                       std::size_t used = 0;
                       for (Eigen::Index i = 0; i < X.cols(); ++i) {
                         if (!(sq[i] > 0.0)) continue;
                         const double ratio = theta[i] / sq[i];
                         lo = std::min(lo, ratio);
                         sum += ratio;
                         ++used;
                       }
                       return std::vector<RunRecord>{
                           row("diag_ratio_min[scale=" + num(scale) + "]", lo),
                           row("diag_ratio_mean[scale=" + num(scale) + "]", sum / static_cast<double>(used))};
                     }});
  }
  auto outcomes = execute(units, c.threads);
  ExperimentResult result;
  collect(result, units, outcomes);

  // average over the replicates that finished
  std::vector<double> means;
  for (int m : c.ntk_check.widths) {
    const std::string name = "frob_rel_error[m=" + std::to_string(m) + "]";
    double s = 0.0;
    std::size_t k = 0;
    for (const RunRecord& r : result.rows)
      if (r.value_name == name) {
        s += r.value;
        ++k;
      }
    if (k == 0) continue;
    means.push_back(s / static_cast<double>(k));
    RunRecord r = row("frob_rel_error_mean[m=" + std::to_string(m) + "]", means.back());
    r.seed = c.seed;
    result.rows.push_back(r);
  }
  if (means.size() == c.ntk_check.widths.size()) {
    bool decreasing = true;
    for (std::size_t i = 1; i < means.size(); ++i) decreasing = decreasing && means[i] < means[i - 1];
    RunRecord r = row("frob_rel_error_decreasing", decreasing ? 1.0 : 0.0, decreasing ? "" : "nonmonotone");
    r.seed = c.seed;
    result.rows.push_back(r);
  }
  return result;
}

// --- inefficiency -------------------------------------------------------------

struct RepeatData {
  Mat gram;   // (n_max + 1)^2
  Vec logit;  // task target (logit, or delta for random labels)
  Vec z0;
  Vec z_g;    // drives y_g for distillation targets
};

std::vector<RunRecord> inefficiency_unit(const ExperimentConfig& c, const TaskSpec& spec, std::uint64_t seed) {
  const std::size_t n_max = c.n_grid.back() + 1;
  const bool deltas = spec.kind == TargetKind::random_labels;

  // teacher-net tasks share one trained teacher across repeats
  std::shared_ptr<const TeacherLabels> teacher;
  if (spec.kind == TargetKind::teacher_net) {
    if (!c.teacher) throw InvalidArgument("teacher-net task needs a teacher section");
    auto truth = std::make_shared<GroundTruth>(c.ground_truth, spec.d, sub_seed(seed, "ground-truth"), spec.input_sigma);
    const auto checkpoints = train_hard_teacher(*c.teacher, *truth, sub_seed(seed, "teacher"), spec.input_sigma);
    const std::size_t want = c.teacher->use_epoch.value_or(c.teacher->train.epochs);
    auto it = std::find_if(checkpoints.begin(), checkpoints.end(),
                           [&](const TeacherCheckpoint& ck) { return ck.epoch == want; });
    if (it == checkpoints.end()) throw InvalidArgument("teacher checkpoint for epoch " + std::to_string(want) + " missing");
    TargetFn gt = [truth](const Vec& x, std::uint64_t) { return (*truth)(Mat(x))[0]; };
    teacher = std::make_shared<const TeacherLabels>(c.teacher->net, it->params, spec.T, spec.r, gt);
  }

  std::vector<RepeatData> data(c.repeats);
  for (std::size_t rep = 0; rep < c.repeats; ++rep) {
    const std::uint64_t rep_seed = derive(seed, {hash_label("repeat"), rep});
    TaskSpec s = spec;
    s.seed = sub_seed(rep_seed, "task");
    const Task task = teacher ? Task(s, teacher) : Task(s);
    const Mat X = task.inputs(n_max);
    RepeatData& r = data[rep];
    r.logit = task.targets(X);
    if (teacher && !c.teacher->perfect) {
      r.z_g.resize(X.cols());
      for (Eigen::Index i = 0; i < X.cols(); ++i) r.z_g[i] = teacher->y_g(X.col(i)) == 1 ? 1.0 : -1.0;
    } else {
      r.z_g = r.logit;
    }
    ParamVector p0;
    if (!deltas || c.kernel == KernelSource::empirical) p0 = init_params(c.student, sub_seed(rep_seed, "student-init"));
    r.z0 = deltas ? Vec::Zero(X.cols()) : forward_batch(c.student, p0, X);
    r.gram = c.kernel == KernelSource::analytic ? analytic_ntk_entries(c.student, X)
                                                : empirical_ntk_entries(c.student, p0, X);
  }

  InefficiencyOptions opts;
  opts.repeats = c.repeats;
  opts.estimator = c.inefficiency.estimator;
  opts.unreliable_fraction = c.inefficiency.unreliable_fraction;
  opts.threads = 1;

  std::vector<std::optional<DistillParams>> variants;
  if (c.inefficiency.distill_targets && !deltas)
    for (const DistillParams& p : c.distill) variants.emplace_back(p);
  else
    variants.emplace_back(std::nullopt);

  std::vector<RunRecord> rows;
  for (const auto& variant : variants) {
    std::vector<Vec> dz(c.repeats);
    bool saturated = false;
    for (std::size_t rep = 0; rep < c.repeats; ++rep) {
      const RepeatData& r = data[rep];
      if (!variant) {
        dz[rep] = deltas ? r.logit : Vec(r.logit - r.z0);
        continue;
      }
      std::size_t sat = 0;
      dz[rep] = effective_logits(r.logit, r.z_g, *variant, &sat) - r.z0;
      saturated = saturated || sat > 0;
    }
    KernelSampler sampler = [&](std::size_t n, std::size_t rep) {
      return KernelSample{KernelMatrix(slice_gram(data[rep].gram, n + 1), c.jitter),
                          dz[rep].head(static_cast<Eigen::Index>(n + 1))};
    };
    const InefficiencyCurve curve = data_inefficiency(sampler, c.n_grid, opts);
    const std::string tag = "[task=" + to_string(spec.kind) + "]";
    for (const InefficiencyPoint& pt : curve.points) {
      std::string flag = pt.unreliable ? "unreliable" : "";
      if (saturated) flag += flag.empty() ? "saturated" : ";saturated";
      std::vector<RunRecord> point_rows{row("I" + tag, pt.value, flag), row("mean_norm" + tag, pt.mean_norm_n),
                                        row("mean_norm_next" + tag, pt.mean_norm_n1)};
      if (pt.skipped > 0) point_rows.push_back(row("skipped" + tag, static_cast<double>(pt.skipped), "skip"));
      for (RunRecord& r : point_rows) {
        r.n = pt.n;
        if (spec.kind == TargetKind::mixture || spec.kind == TargetKind::flipped_mixture) r.q = spec.mixture.q;
        if (spec.kind == TargetKind::flipped_mixture) r.p_flip = spec.p_flip;
        if (variant) {
          r.rho = variant->rho;
          r.T = variant->T;
        }
        rows.push_back(std::move(r));
      }
    }
  }
  return rows;
}

ExperimentResult run_inefficiency(const ExperimentConfig& c) {
  std::vector<Unit> units;
  for (std::size_t k = 0; k < c.tasks.size(); ++k) {
    const TaskSpec spec = c.tasks[k];
    units.push_back({"task/" + std::to_string(k), unit_seed(c, "task", k),
                     [&c, spec](std::uint64_t seed) { return inefficiency_unit(c, spec, seed); }});
  }
  auto outcomes = execute(units, c.threads);
  ExperimentResult result;
  collect(result, units, outcomes);
  return result;
}

// --- risk ---------------------------------------------------------------------

Vec angle_abs_cosines(const ExperimentConfig& c, const ParamVector& p0, const Mat& X, const Vec& direction,
                      const Vec& z_eff_minus_zero) {
  if (c.risk.angle_mode == RiskOptions::AngleMode::features) return feature_abs_cosines(c.student, p0, X, direction);
  const Vec diag = c.kernel == KernelSource::analytic ? analytic_ntk_diag(c.student, X)
                                                      : trace_sqnorms(c.student, backprop(c.student, p0, X));
  return eq7_abs_cosines(z_eff_minus_zero, diag, direction.norm());
}

std::vector<RunRecord> risk_unit(const ExperimentConfig& c, std::uint64_t seed) {
  const TeacherView teacher = make_teacher_view(c, seed);
  const ParamVector p0 = init_params(c.student, sub_seed(seed, "student-init"));
  const std::size_t n_max = c.n_grid.back();
  const Mat X = sample_inputs(c.student.d, n_max, sub_seed(seed, "train"), kInputSigma);
  const Mat Xte = sample_inputs(c.student.d, c.risk.test_samples, sub_seed(seed, "test"), kInputSigma);
  const Vec z_t = teacher.z_t(X), z_g = teacher.z_g(X);
  const Vec z_t_te = teacher.z_t(Xte);
  const Vec z0 = forward_batch(c.student, p0, X);
  const Vec z0_te = forward_batch(c.student, p0, Xte);
  const bool analytic = c.kernel == KernelSource::analytic;
  const Mat gram = analytic ? analytic_ntk_entries(c.student, X) : empirical_ntk_entries(c.student, p0, X);
  const Mat cross = analytic ? analytic_ntk_cross(c.student, Xte, X) : empirical_ntk_cross(c.student, p0, Xte, X);

  // oracle pieces for the bound
  std::optional<WeightDelta> zero_delta;
  std::optional<BackpropTrace> train_trace;
  Mat Xang;
  if (c.risk.bound) {
    zero_delta = train_online_oracle(c.student, p0, [](const Mat& B) { return Vec(Vec::Zero(B.cols())); },
                                     c.oracle.train, sub_seed(seed, "zero-oracle"), DeltaRole::zero)
                     .delta;
    train_trace = backprop(c.student, p0, X);
    Xang = sample_inputs(c.student.d, c.risk.angle_samples, sub_seed(seed, "angles"), kInputSigma);
  }

  std::vector<RunRecord> rows;
  for (std::size_t k = 0; k < c.distill.size(); ++k) {
    const DistillParams p = c.distill[k];
    std::size_t sat = 0;
    const Vec z_eff = effective_logits(z_t, z_g, p, &sat);
    const std::string sat_flag = sat > 0 ? "saturated" : "";

    std::optional<WeightDelta> oracle;
    AngleCurve curve;
    if (c.risk.bound) {
      BatchLogits target = [&](const Mat& B) { return effective_logits(teacher.z_t(B), teacher.z_g(B), p); };
      oracle = train_online_oracle(c.student, p0, target, c.oracle.train,
                                   derive(seed, {hash_label("oracle"), k}), DeltaRole::oracle)
                   .delta;
      const Vec direction = oracle->values - zero_delta->values;
      const Vec z_eff_ang = effective_logits(teacher.z_t(Xang), teacher.z_g(Xang), p);
      curve = angle_distribution(angle_abs_cosines(c, p0, Xang, direction, z_eff_ang), c.risk.angle_grid);
    }

    std::vector<double> ns, risks;
    for (std::size_t n : c.n_grid) {
      const auto m = static_cast<Eigen::Index>(n);
      const KernelMatrix K(slice_gram(gram, n), c.jitter);
      const Vec v = spd_solve(K, Vec(z_eff.head(m) - z0.head(m)));
      const Vec z_s_te = z0_te + cross.leftCols(m) * v;
      const RiskEstimate est = empirical_risk(z_s_te, z_t_te);
      std::vector<RunRecord> point{row("risk", est.risk, sat_flag), row("risk_se", est.std_error)};
      if (est.ties > 0) point.push_back(row("risk_ties", static_cast<double>(est.ties)));
      if (c.risk.bound) {
        // student weights sum_i v_i phi(x_i) over the first n training points
        BackpropTrace sub = *train_trace;
        sub.output = sub.output.head(m).eval();
        for (LayerTrace& l : sub.layers) {
          l.input = l.input.leftCols(m).eval();
          l.delta = l.delta.leftCols(m).eval();
        }
        const WeightDelta student{trace_accumulate(c.student, sub, v), DeltaRole::student};
        const double alpha = alpha_n(student, *oracle, *zero_delta);
        const double bound = risk_bound(curve, alpha);
        const bool violated = est.risk > bound + 2.0 * est.std_error;
        point.push_back(row("alpha_n", alpha));
        point.push_back(row("risk_bound", bound, violated ? "violated" : ""));
        // small initial logits: dw_z dropped, angle from the norm ratio alone
        const double alpha0 = alpha_n_neglect_zero(student.values.norm(), oracle->values.norm());
        point.push_back(row("alpha_n_neglect_zero", alpha0, "approximation"));
        point.push_back(row("risk_bound_neglect_zero", risk_bound(curve, alpha0), "approximation"));
      }
      for (RunRecord& r : point) {
        r.n = n;
        r.rho = p.rho;
        r.T = p.T;
        rows.push_back(std::move(r));
      }
      ns.push_back(static_cast<double>(n));
      risks.push_back(std::max(est.risk, 1.0 / static_cast<double>(c.risk.test_samples)));
    }
    if (ns.size() >= 2) {
      const PowerLawFit fit = fit_power_law(ns, risks);
      RunRecord r = row("risk_slope", fit.exponent, sat_flag);
      r.rho = p.rho;
      r.T = p.T;
      rows.push_back(r);
    }
  }
  return rows;
}

ExperimentResult run_risk(const ExperimentConfig& c) {
  std::vector<Unit> units;
  for (std::size_t rep = 0; rep < c.replicates; ++rep)
    units.push_back({"replicate/" + std::to_string(rep), unit_seed(c, "replicate", rep),
                     [&c](std::uint64_t seed) { return risk_unit(c, seed); }});
  auto outcomes = execute(units, c.threads);
  ExperimentResult result;
  collect(result, units, outcomes);
  return result;
}

// --- angle-dist -----------------------------------------------------------------

std::vector<RunRecord> angle_unit(const ExperimentConfig& c, std::uint64_t seed) {
  const TeacherView teacher = make_teacher_view(c, seed);
  const ParamVector p0 = init_params(c.student, sub_seed(seed, "student-init"));
  const Mat X = sample_inputs(c.student.d, c.risk.angle_samples, sub_seed(seed, "angles"), kInputSigma);
  const Vec z_t = teacher.z_t(X), z_g = teacher.z_g(X);
  const WeightDelta zero = train_online_oracle(c.student, p0, [](const Mat& B) { return Vec(Vec::Zero(B.cols())); },
                                               c.oracle.train, sub_seed(seed, "zero-oracle"), DeltaRole::zero)
                               .delta;
  std::vector<RunRecord> rows;
  for (std::size_t k = 0; k < c.distill.size(); ++k) {
    const DistillParams p = c.distill[k];
    std::size_t sat = 0;
    const Vec z_eff = effective_logits(z_t, z_g, p, &sat);
    BatchLogits target = [&](const Mat& B) { return effective_logits(teacher.z_t(B), teacher.z_g(B), p); };
    const WeightDelta oracle = train_online_oracle(c.student, p0, target, c.oracle.train,
                                                   derive(seed, {hash_label("oracle"), k}), DeltaRole::oracle)
                                   .delta;
    const Vec direction = oracle.values - zero.values;
    const AngleCurve curve = angle_distribution(angle_abs_cosines(c, p0, X, direction, z_eff), c.risk.angle_grid);
    const std::string flag = sat > 0 ? "saturated" : "";
    double beta_full = 0.0;
    for (Eigen::Index i = 0; i < curve.beta.size(); ++i) {
      if (curve.p[i] >= 1.0) beta_full = curve.beta[i];
      RunRecord a = row("p_angle", curve.p[i], flag);
      RunRecord b = row("p_angle_halfwidth", curve.half_width[i]);
      for (RunRecord* r : {&a, &b}) {
        r->beta = curve.beta[i];
        r->rho = p.rho;
        r->T = p.T;
        rows.push_back(*r);
      }
    }
    for (RunRecord r : {row("beta_all_above", beta_full, flag), row("oracle_distance", direction.norm())}) {
      r.rho = p.rho;
      r.T = p.T;
      rows.push_back(r);
    }
  }
  return rows;
}

ExperimentResult run_angle_dist(const ExperimentConfig& c) {
  std::vector<Unit> units;
  for (std::size_t rep = 0; rep < c.replicates; ++rep)
    units.push_back({"replicate/" + std::to_string(rep), unit_seed(c, "replicate", rep),
                     [&c](std::uint64_t seed) { return angle_unit(c, seed); }});
  auto outcomes = execute(units, c.threads);
  ExperimentResult result;
  collect(result, units, outcomes);
  return result;
}

// --- hard-label-effect ------------------------------------------------------------

std::vector<RunRecord> hard_label_unit(const ExperimentConfig& c, std::uint64_t seed) {
  const GroundTruth truth(c.ground_truth, c.student.d, sub_seed(seed, "ground-truth"));
  const TeacherConfig& tc = *c.teacher;
  const auto checkpoints = train_hard_teacher(tc, truth, sub_seed(seed, "teacher"));
  const double T = c.distill.front().T;

  const ParamVector p0 = init_params(c.student, sub_seed(seed, "student-init"));
  const std::size_t n_max = c.n_grid.back();
  const Mat X = sample_inputs(c.student.d, n_max, sub_seed(seed, "train"), kInputSigma);
  const Mat Xte = sample_inputs(c.student.d, c.hard_label.test_samples, sub_seed(seed, "test"), kInputSigma);
  const Vec z_g = truth(X);
  const Vec y_te = (truth(Xte).array() > 0.0).cast<double>();
  const Vec z0 = forward_batch(c.student, p0, X);
  const Vec z0_te = forward_batch(c.student, p0, Xte);
  const bool analytic = c.kernel == KernelSource::analytic;
  const Mat gram = analytic ? analytic_ntk_entries(c.student, X) : empirical_ntk_entries(c.student, p0, X);
  const Mat cross = analytic ? analytic_ntk_cross(c.student, Xte, X) : empirical_ntk_cross(c.student, p0, Xte, X);

  // teacher logits on the training and test points for every checkpoint
  std::vector<Vec> zt_train;
  std::vector<double> teacher_acc;
  for (const TeacherCheckpoint& ck : checkpoints) {
    zt_train.push_back(tc.r * forward_batch(tc.net, ck.params, X));
    teacher_acc.push_back(accuracy(forward_batch(tc.net, ck.params, Xte), y_te));
  }

  std::optional<double> online_norm;
  if (c.hard_label.online_norm) {
    NetConfig ocfg = c.student;
    ocfg.m = c.oracle.m;
    const ParamVector q0 = init_params(ocfg, sub_seed(seed, "oracle-init"));
    online_norm = train_online_oracle(ocfg, q0, [&truth](const Mat& B) { return truth(B); }, c.oracle.train,
                                      sub_seed(seed, "ground-truth-oracle"), DeltaRole::ground_truth)
                      .delta.values.norm();
  }

  std::vector<RunRecord> rows;
  for (std::size_t n : c.n_grid) {
    const auto m = static_cast<Eigen::Index>(n);
    const KernelMatrix K(slice_gram(gram, n), c.jitter);
    const SpdSolver S(K);
    const Vec dz_g = z_g.head(m) - z0.head(m);

    Vec hard(m);
    for (Eigen::Index i = 0; i < m; ++i) hard[i] = z_g[i] > 0.0 ? z_max(T) : -z_max(T);
    const double acc_hard = accuracy(z0_te + cross.leftCols(m) * S.solve(Vec(hard - z0.head(m))), y_te);
    const double norm_wg = online_norm ? *online_norm : std::sqrt(S.inner(dz_g, dz_g));

    std::vector<RunRecord> unit_rows{row("hard_student_accuracy", acc_hard),
                                     row("norm_wg", norm_wg, online_norm ? "online" : "kernel")};
    std::size_t above = 0, above_negative = 0;
    double first_projection = 0.0;
    for (std::size_t e = 0; e < checkpoints.size(); ++e) {
      const Vec z_t = zt_train[e].head(m);
      Vec dz_h(m);
      for (Eigen::Index i = 0; i < m; ++i) dz_h[i] = correction_logit(z_t[i], z_g[i] > 0.0 ? 1 : 0, T);
      const Vec dz_t = z_t - z0.head(m);
      const double proj = correction_projection(S, dz_g, dz_t, dz_h);
      const bool better = teacher_acc[e] >= acc_hard;
      if (e == 0) first_projection = proj;
      if (better) {
        ++above;
        if (proj < 0.0) ++above_negative;
      }
      const std::string flag = better ? "teacher_above_hard_student" : "";
      std::vector<RunRecord> ck_rows{row("projection", proj, flag),
                                     row("derivative", hard_label_derivative(S, dz_g, dz_t, dz_h, norm_wg), flag),
                                     row("normalized_projection", normalized_correction_projection(S, dz_g, dz_t, dz_h), flag),
                                     row("teacher_accuracy", teacher_acc[e], flag)};
      for (RunRecord& r : ck_rows) r.epoch = checkpoints[e].epoch;
      unit_rows.insert(unit_rows.end(), ck_rows.begin(), ck_rows.end());
    }
    // positive at the first checkpoint, negative for most teachers beating the hard student
    const bool flip = first_projection > 0.0 && above > 0 && 2 * above_negative > above;
    unit_rows.push_back(row("sign_flip", flip ? 1.0 : 0.0, above == 0 ? "no_teacher_above_hard_student" : ""));
    for (RunRecord& r : unit_rows) {
      r.n = n;
      r.rho = 1.0;
      r.T = T;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

ExperimentResult run_hard_label_effect(const ExperimentConfig& c) {
  std::vector<Unit> units;
  for (std::size_t rep = 0; rep < c.replicates; ++rep)
    units.push_back({"replicate/" + std::to_string(rep), unit_seed(c, "replicate", rep),
                     [&c](std::uint64_t seed) { return hard_label_unit(c, seed); }});
  auto outcomes = execute(units, c.threads);
  ExperimentResult result;
  collect(result, units, outcomes);
  return result;
}

// --- zero-norm --------------------------------------------------------------------

std::vector<RunRecord> zero_norm_unit(const ExperimentConfig& c, std::uint64_t seed) {
  const TeacherView teacher = make_teacher_view(c, seed);
  const ParamVector p0 = init_params(c.student, sub_seed(seed, "student-init"));
  const DistillParams p = c.distill.front();
  const LinearTrainResult zero =
      train_online_oracle(c.student, p0, [](const Mat& B) { return Vec(Vec::Zero(B.cols())); }, c.oracle.train,
                          sub_seed(seed, "zero-oracle"), DeltaRole::zero, true);
  const LinearTrainResult oracle = train_online_oracle(
      c.student, p0, [&](const Mat& B) { return effective_logits(teacher.z_t(B), teacher.z_g(B), p); },
      c.oracle.train, sub_seed(seed, "oracle"), DeltaRole::oracle, true);

  std::vector<RunRecord> rows;
  for (std::size_t e : power_of_two_epochs(c.oracle.train.epochs)) {
    if (e == 0) continue;
    for (RunRecord r : {row("norm_zero", zero.norm_history[e - 1]), row("norm_oracle", oracle.norm_history[e - 1])}) {
      r.epoch = e;
      r.rho = p.rho;
      r.T = p.T;
      rows.push_back(r);
    }
  }
  const double ratio = zero.delta.values.norm() / oracle.delta.values.norm();
  RunRecord r = row("zero_norm_ratio", ratio, zero.converged ? "" : "not_converged");
  r.epoch = c.oracle.train.epochs;
  r.rho = p.rho;
  r.T = p.T;
  rows.push_back(r);
  return rows;
}

ExperimentResult run_zero_norm(const ExperimentConfig& c) {
  std::vector<Unit> units;
  for (std::size_t rep = 0; rep < c.replicates; ++rep)
    units.push_back({"replicate/" + std::to_string(rep), unit_seed(c, "replicate", rep),
                     [&c](std::uint64_t seed) { return zero_norm_unit(c, seed); }});
  auto outcomes = execute(units, c.threads);
  ExperimentResult result;
  collect(result, units, outcomes);
  return result;
}

}  // namespace

// --- shared building blocks ---------------------------------------------------------

GroundTruth::GroundTruth(const GroundTruthConfig& cfg, int d, std::uint64_t seed, double input_sigma) : cfg_(cfg) {
  if (cfg_.kind == GroundTruthConfig::Kind::mixture) {
    MixtureParams mp = cfg_.mixture;
    mp.d = d;
    mixture_ = realize_mixture(mp, sub_seed(seed, "mixture"));
    return;
  }
  cfg_.net.d = d;
  params_ = init_params(cfg_.net, sub_seed(seed, "network"));
  if (cfg_.center) {
    Vec ref = forward_batch(cfg_.net, params_, sample_inputs(d, cfg_.center_samples, sub_seed(seed, "center"), input_sigma));
    const auto mid = ref.size() / 2;
    std::nth_element(ref.data(), ref.data() + mid, ref.data() + ref.size());
    offset_ = ref[mid];
    if (ref.size() % 2 == 0) offset_ = 0.5 * (offset_ + *std::max_element(ref.data(), ref.data() + mid));
  }
}

Vec GroundTruth::operator()(const Mat& X) const {
  if (cfg_.kind == GroundTruthConfig::Kind::mixture) return cfg_.scale * mixture_values(mixture_, X);
  Vec f = forward_batch(cfg_.net, params_, X);
  f.array() -= offset_;
  return cfg_.scale * f;
}

std::vector<TeacherCheckpoint> train_hard_teacher(const TeacherConfig& teacher, const GroundTruth& truth,
                                                  std::uint64_t seed, double input_sigma) {
  TrainConfig train = teacher.train;
  train.checkpoint_epochs = power_of_two_epochs(train.epochs, teacher.extra_epochs);
  if (teacher.use_epoch) {
    train.checkpoint_epochs.push_back(*teacher.use_epoch);
    std::sort(train.checkpoint_epochs.begin(), train.checkpoint_epochs.end());
    train.checkpoint_epochs.erase(std::unique(train.checkpoint_epochs.begin(), train.checkpoint_epochs.end()),
                                  train.checkpoint_epochs.end());
  }
  const std::uint64_t data_seed = sub_seed(seed, "data");
  const int d = teacher.net.d;
  BatchSource source = [&](std::uint64_t step, std::size_t B) {
    LabeledBatch b;
    b.x = sample_inputs(d, B, data_seed, input_sigma, static_cast<std::size_t>(step) * B);
    b.target = (truth(b.x).array() > 0.0).cast<double>();
    return b;
  };
  return train_teacher(teacher.net, source, train, sub_seed(seed, "init"));
}

LinearTrainResult train_online_oracle(const NetConfig& cfg, const ParamVector& params0, const BatchLogits& target,
                                      const TrainConfig& train, std::uint64_t seed, DeltaRole role, bool record_norms,
                                      double input_sigma) {
  BatchSource source = [&](std::uint64_t step, std::size_t B) {
    LabeledBatch b;
    b.x = sample_inputs(cfg.d, B, seed, input_sigma, static_cast<std::size_t>(step) * B);
    b.target = target(b.x);
    return b;
  };
  return train_linearized_online(cfg, params0, source, LinearLoss{}, train, role, record_norms);
}

Vec effective_logits(const Vec& z_t, const Vec& z_g, const DistillParams& params, std::size_t* saturated) {
  Vec out(z_t.size());
  std::size_t sat = 0;
  for (Eigen::Index i = 0; i < z_t.size(); ++i) {
    const SaturatedLogit s = effective_logit_or_saturate(z_t[i], z_g[i] > 0.0 ? 1 : 0, params);
    out[i] = s.value;
    sat += s.saturated ? 1 : 0;
  }
  if (saturated) *saturated = sat;
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  switch (cfg.kind) {
    case ExperimentKind::effective_logits: return run_effective_logits(cfg);
    case ExperimentKind::ntk_check: return run_ntk_check(cfg);
    case ExperimentKind::inefficiency: return run_inefficiency(cfg);
    case ExperimentKind::risk: return run_risk(cfg);
    case ExperimentKind::angle_dist: return run_angle_dist(cfg);
    case ExperimentKind::hard_label_effect: return run_hard_label_effect(cfg);
    case ExperimentKind::zero_norm: return run_zero_norm(cfg);
  }
  throw InvalidArgument("unknown experiment kind");
}

}  // namespace ntkd
