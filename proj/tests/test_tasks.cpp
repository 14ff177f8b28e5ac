#include "ntkd/errors.hpp"
#include "ntkd/tasks.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <memory>

using namespace ntkd;

TEST_SUITE("tasks") {
  TEST_CASE("sample_inputs") {
    CHECK(sample_inputs(3, 0, 1).cols() == 0);
    CHECK(sample_inputs(2, 50, 9) == sample_inputs(2, 50, 9));
    CHECK(sample_inputs(2, 50, 9) != sample_inputs(2, 50, 10));
    // nested: a longer request extends a shorter one
    const Mat big = sample_inputs(2, 40, 4);
    CHECK(big.leftCols(25) == sample_inputs(2, 25, 4));
    CHECK(big.rightCols(15) == sample_inputs(2, 15, 4, 5.0, 25));

    const Mat X = sample_inputs(1, 100000, 17);
    const double mean = X.mean();
    const double var = (X.array() - mean).square().sum() / (X.size() - 1);
    CHECK(var == doctest::Approx(25.0).epsilon(0.02));
  }

  TEST_CASE("mixture_value") {
    MixtureParams one;
    one.q = 1;
    one.d = 2;
    const MixtureSpec s1 = realize_mixture(one, 3);
    REQUIRE(s1.modes.size() == 1);
    CHECK(mixture_value(s1, s1.modes[0].center) == s1.modes[0].amplitude);
    CHECK(std::abs(s1.modes[0].amplitude) >= 0.8);
    CHECK(std::abs(s1.modes[0].amplitude) <= 1.2);

    MixtureParams many;
    many.q = 7;
    many.d = 2;
    const MixtureSpec s = realize_mixture(many, 5);
    double total_amp = 0.0;
    double max_width = 0.0;
    for (const MixtureMode& m : s.modes) {
      total_amp += std::abs(m.amplitude);
      max_width = std::max(max_width, m.width);
      CHECK(m.width >= many.base_width() * 0.8 - 1e-15);
      CHECK(m.width <= many.base_width() * 1.2 + 1e-15);
    }
    // ten widths past the farthest center
    double reach = 0.0;
    for (const MixtureMode& m : s.modes) reach = std::max(reach, m.center.norm());
    Vec far(2);
    far << reach + 10 * max_width, 0;
    CHECK(std::abs(mixture_value(s, far)) < 1e-8 * total_amp);

    const Mat X = sample_inputs(2, 20, 6);
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      double direct = 0.0;
      for (const MixtureMode& m : s.modes) {
        double r2 = 0.0;
        for (int k = 0; k < 2; ++k) r2 += (X(k, i) - m.center[k]) * (X(k, i) - m.center[k]);
        direct += m.amplitude * std::exp(-r2 / m.width);
      }
      CHECK(std::abs(mixture_value(s, X.col(i)) - direct) <= 1e-12 * std::max(1.0, std::abs(direct)));
    }

    MixtureParams sq = many;
    sq.exponent = MixtureExponent::sigma_squared;
    const MixtureSpec s2 = realize_mixture(sq, 5);
    const Vec x0 = X.col(0);
    double direct = 0.0;
    for (const MixtureMode& m : s2.modes) direct += m.amplitude * std::exp(-(x0 - m.center).squaredNorm() / (m.width * m.width));
    CHECK(mixture_value(s2, x0) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(realize_mixture(many, 5).modes[3].center == s.modes[3].center);
  }

  TEST_CASE("flip_labels") {
    TargetFn base = [](const Vec& x, std::uint64_t) { return x[0]; };
    const Mat X = sample_inputs(1, 10000, 8);
    TargetFn same = flip_labels(base, 0.0, 1);
    TargetFn half = flip_labels(base, 0.5, 2);
    TargetFn twice = flip_labels(half, 0.5, 2);
    double corr = 0.0;
    int flipped = 0;
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      const Vec x = X.col(i);
      const auto idx = static_cast<std::uint64_t>(i);
      CHECK(same(x, idx) == base(x, idx));
      CHECK(twice(x, idx) == base(x, idx));
      const double sb = base(x, idx) > 0 ? 1.0 : -1.0, sh = half(x, idx) > 0 ? 1.0 : -1.0;
      corr += sb * sh;
      flipped += sb != sh;
    }
    CHECK(std::abs(corr / 10000.0) < 0.02);
    CHECK(flipped == doctest::Approx(5000).epsilon(0.05));
    CHECK_THROWS_AS(flip_labels(base, 0.6, 1), InvalidArgument);
  }

  TEST_CASE("teacher_labels") {
    const NetConfig c{2, 2, 16, 1, 1};
    const ParamVector w = init_params(c, 4);
    TargetFn gt = [](const Vec& x, std::uint64_t) { return x[1]; };
    const TeacherLabels unit = teacher_labels(c, w, 2.0, 1.0, gt);
    const TeacherLabels twice = teacher_labels(c, w, 2.0, 2.0, gt);
    const Mat X = sample_inputs(2, 30, 5);
    CHECK((unit.z_t(X) - forward_batch(c, w, X)).norm() == 0.0);
    CHECK((twice.z_t(X) - 2.0 * unit.z_t(X)).norm() <= 1e-14 * unit.z_t(X).norm());
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      CHECK(unit.soft_label(X.col(i)) == doctest::Approx(oracle::sigmoid(unit.z_t(Vec(X.col(i))) / 2.0)));
      CHECK(unit.y_g(X.col(i)) == (X(1, i) > 0 ? 1 : 0));
    }

    // zero output weights and bias: the soft label is exactly one half
    ParamVector flat = w;
    const ParamLayout layout(c);
    const LayerShape& out = layout.layers().back();
    flat.values.segment(out.w_offset, out.in + 1).setZero();
    for (double T : {0.5, 1.0, 7.0}) CHECK(teacher_labels(c, flat, T, 0.3, gt).soft_label(X.col(0)) == 0.5);
  }

  TEST_CASE("task kinds") {
    TaskSpec spec;
    spec.d = 1;
    spec.seed = 12;
    spec.mixture.q = 50;
    const Task t(spec);
    const Mat X = t.inputs(64);
    CHECK(X == t.inputs(64));
    CHECK(t.targets(X) == mixture_values(*t.mixture(), X));
    CHECK(t.hard_labels(X) == (t.targets(X).array() > 0).cast<double>().matrix());

    spec.kind = TargetKind::zero;
    CHECK(Task(spec).targets(X).norm() == 0.0);

    spec.kind = TargetKind::random_labels;
    const Task r(spec);
    CHECK(r.targets_are_deltas());
    CHECK(r.targets(X).head(10) == r.targets(X.leftCols(10)));
    CHECK(std::abs(r.targets(t.inputs(4000)).mean()) < 0.05);

    spec.kind = TargetKind::teacher_net;
    CHECK_THROWS_AS(Task{spec}, InvalidArgument);
    spec.kind = TargetKind::mixture;
    spec.mixture.d = 2;
    CHECK_THROWS_AS(Task{spec}, InvalidArgument);
    CHECK(target_kind_from_string("flipped-mixture") == TargetKind::flipped_mixture);
    CHECK_THROWS_AS(target_kind_from_string("bogus"), InvalidArgument);
  }
}
