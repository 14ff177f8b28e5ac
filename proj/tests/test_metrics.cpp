#include "ntkd/errors.hpp"
#include "ntkd/kernel.hpp"
#include "ntkd/metrics.hpp"
#include "ntkd/tasks.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <numbers>

using namespace ntkd;

namespace {

// ||dw|| of the interpolant on the points kept by `keep`, through an explicit inverse.
double explicit_norm(const Mat& K, const Vec& dz, const std::vector<Eigen::Index>& keep) {
  const Mat sub = K(keep, keep);
  const Vec d = dz(keep);
  return std::sqrt(d.dot(sub.inverse() * d));
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("weight_change_norm") {
    Vec dz(2);
    dz << 3, 4;
    CHECK(weight_change_norm(KernelMatrix(Mat::Identity(2, 2)), dz) == doctest::Approx(5.0).epsilon(1e-7));
    CHECK(weight_change_norm(KernelMatrix(Mat::Identity(2, 2)), Vec::Zero(2)) == 0.0);

    // explicit feature-space solution phi(X) Theta^{-1} dz
    const NetConfig c{8, 2, 64, 1, 1};
    const ParamVector w = init_params(c, 3);
    const Mat X = sample_inputs(8, 24, 4);
    const Mat F = features(c, w, X);
    const Mat K = F.transpose() * F;
    std::mt19937_64 gen(5);
    const Vec d = oracle::random_vec(24, gen, 2.0);
    const Vec dw = F * (K.inverse() * d);
    CHECK(std::abs(weight_change_norm(empirical_ntk_gram(c, w, X), d) - dw.norm()) <= 1e-6 * dw.norm());
  }

  TEST_CASE("inefficiency of injected norm laws") {
    const InefficiencyCurve sq = inefficiency_from_law([](double n) { return 3.0 * std::sqrt(n); }, {10, 100, 1000});
    CHECK(std::abs(sq.I[1] - 0.5 * 100 * std::log(1.01)) <= 1e-12);
    CHECK(sq.I[2] < 0.5);
    CHECK(sq.I[2] > sq.I[1]);
    const InefficiencyCurve flat = inefficiency_from_law([](double) { return 2.0; }, {4, 8, 16});
    for (double v : flat.I) CHECK(v == 0.0);
  }

  TEST_CASE("leave-one-out estimator matches brute-force subsets") {
    std::mt19937_64 gen(7);
    const std::vector<std::size_t> ns{4, 6, 9};
    const std::size_t R = 3;
    std::vector<std::vector<KernelSample>> samples(ns.size());
    for (std::size_t g = 0; g < ns.size(); ++g)
      for (std::size_t r = 0; r < R; ++r) {
        const int n1 = static_cast<int>(ns[g]) + 1;
        samples[g].push_back({KernelMatrix(oracle::random_spd(n1, gen), 0.0), oracle::random_vec(n1, gen)});
      }
    KernelSampler sampler = [&](std::size_t n, std::size_t rep) {
      const auto g = static_cast<std::size_t>(std::find(ns.begin(), ns.end(), n) - ns.begin());
      return samples[g][rep];
    };
    InefficiencyOptions opt;
    opt.repeats = R;
    const InefficiencyCurve loo = data_inefficiency(sampler, ns, opt);
    opt.estimator = InefficiencyEstimator::last_point;
    const InefficiencyCurve last = data_inefficiency(sampler, ns, opt);

    for (std::size_t g = 0; g < ns.size(); ++g) {
      const auto n1 = static_cast<Eigen::Index>(ns[g] + 1);
      double full = 0.0, subsets = 0.0, first = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const Mat& K = samples[g][r].K.entries();
        const Vec& dz = samples[g][r].dz;
        std::vector<Eigen::Index> all(static_cast<std::size_t>(n1));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        full += explicit_norm(K, dz, all);
        for (Eigen::Index i = 0; i < n1; ++i) {
          std::vector<Eigen::Index> keep;
          for (Eigen::Index j = 0; j < n1; ++j)
            if (j != i) keep.push_back(j);
          subsets += explicit_norm(K, dz, keep);
          if (i == n1 - 1) first += explicit_norm(K, dz, keep);
        }
      }
      const double mean_n1 = full / R;
      const double mean_loo = subsets / (R * static_cast<double>(n1));
      CHECK(loo.points[g].mean_norm_n1 == doctest::Approx(mean_n1).epsilon(1e-9));
      CHECK(loo.points[g].mean_norm_n == doctest::Approx(mean_loo).epsilon(1e-9));
      CHECK(loo.I[g] == doctest::Approx(ns[g] * std::log(mean_n1 / mean_loo)).epsilon(1e-8));
      CHECK(last.points[g].mean_norm_n == doctest::Approx(first / R).epsilon(1e-9));
    }
  }

  TEST_CASE("singular repeats are skipped and flagged") {
    Mat bad = -Mat::Identity(3, 3);
    KernelSampler sampler = [&](std::size_t, std::size_t rep) {
      return KernelSample{rep < 2 ? KernelMatrix(bad) : KernelMatrix(Mat::Identity(3, 3)), Vec::Ones(3)};
    };
    InefficiencyOptions opt;
    opt.repeats = 5;
    const InefficiencyCurve c = data_inefficiency(sampler, {2}, opt);
    CHECK(c.points[0].skipped == 2);
    CHECK(c.points[0].used == 3);
    CHECK(c.points[0].unreliable);
    CHECK_THROWS_AS(data_inefficiency(sampler, {4, 3}, opt), InvalidArgument);
  }

  TEST_CASE("alpha_n") {
    std::mt19937_64 gen(3);
    const Vec a = oracle::random_vec(10, gen);
    const WeightDelta zero{Vec::Zero(10)};
    CHECK(alpha_n({a}, {a}, zero) == doctest::Approx(0.0));
    Vec e1 = Vec::Zero(10), e2 = Vec::Zero(10);
    e1[0] = 2;
    e2[3] = -1;
    CHECK(alpha_n({e1}, {e2}, zero) == doctest::Approx(std::numbers::pi / 2));
    CHECK(alpha_n_neglect_zero(0.0, 1.0) == doctest::Approx(std::numbers::pi / 2));
    CHECK(alpha_n_neglect_zero(1.0, 1.0) == 0.0);
  }

  TEST_CASE("neglecting the zero-function change when it is small") {
    // Teacher logits lie in the feature span, so the minimum-norm least-squares
    // fit over many points reproduces them exactly and the student interpolant
    // is its projection onto the span of the training features.
    const NetConfig c{2, 2, 24, 1, 1};
    const ParamVector w = init_params(c, 8);
    const Eigen::Index p = param_count(c);
    const Mat Xbig = sample_inputs(2, static_cast<std::size_t>(2 * p), 9);
    const Mat Fbig = features(c, w, Xbig);
    const Vec f0 = forward_batch(c, w, Xbig);
    std::mt19937_64 gen(10);
    const Vec w_star = oracle::random_vec(static_cast<int>(p), gen, 2.0);
    const Vec z_t = f0 + Fbig.transpose() * w_star;

    const Eigen::CompleteOrthogonalDecomposition<Mat> ls(Fbig.transpose());
    const Vec oracle_dw = ls.solve(Vec(z_t - f0));
    const Vec zero_dw = ls.solve(Vec(-f0));
    CHECK((Fbig.transpose() * oracle_dw - (z_t - f0)).norm() <= 1e-8 * z_t.norm());

    for (Eigen::Index n : {16, 64, 160}) {
      const Mat F = Fbig.leftCols(n);
      const Vec dz = (z_t - f0).head(n);
      const Vec student = F * (F.transpose() * F).ldlt().solve(dz);
      const double ratio = zero_dw.norm() / oracle_dw.norm();
      REQUIRE(ratio < 0.1);
      const double exact = std::cos(alpha_n({student}, {oracle_dw}, {zero_dw}));
      const double approx = std::cos(alpha_n_neglect_zero(student.norm(), oracle_dw.norm()));
      CHECK(std::abs(exact - approx) <= 0.05 * exact);
    }
  }

  TEST_CASE("angle distribution") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0, 1);
    Vec cosines(5000);
    for (Eigen::Index i = 0; i < cosines.size(); ++i) cosines[i] = u(gen);
    const AngleCurve c = angle_distribution(cosines, 64);
    CHECK(c.p[0] == 1.0);
    CHECK(c.p[63] == 0.0);
    for (Eigen::Index g = 1; g < 64; ++g) CHECK(c.p[g] <= c.p[g - 1]);
    for (Eigen::Index g : {5, 20, 40}) {
      int above = 0;
      for (Eigen::Index i = 0; i < cosines.size(); ++i) above += std::acos(cosines[i]) > c.beta[g];
      CHECK(c.p[g] == above / 5000.0);
    }
    CHECK(risk_bound(c, 0.0) == c.p[63]);
    CHECK(risk_bound(c, std::numbers::pi / 2) == 1.0);
    // between nodes the bound reads the node below pi/2 - alpha
    const double alpha = std::numbers::pi / 2 - 0.5 * (c.beta[10] + c.beta[11]);
    CHECK(risk_bound(c, alpha) == c.p[10]);

    // identical feature directions: every angle is zero
    const NetConfig net{2, 2, 16, 1, 1};
    const ParamVector w = init_params(net, 1);
    const Mat X = sample_inputs(2, 1, 2);
    const Vec cos_self = feature_abs_cosines(net, w, X, feature(net, w, X.col(0)));
    CHECK(cos_self[0] == doctest::Approx(1.0).epsilon(1e-12));
    const Vec via_logits = eq7_abs_cosines(Vec::Constant(1, 2.0), Vec::Constant(1, 4.0), 1.0);
    CHECK(via_logits[0] == 1.0);
  }

  TEST_CASE("empirical risk") {
    std::mt19937_64 gen(6);
    const Vec z = oracle::random_vec(1000, gen);
    CHECK(empirical_risk(z, z).risk == 0.0);
    CHECK(empirical_risk(-z, z).risk == 1.0);
    Vec tie = z;
    tie[0] = 0.0;
    CHECK(empirical_risk(tie, z).ties == 1);

    for (double gamma : {0.3, 1.0, 2.5}) {
      Vec a(2), b(2);
      a << 1, 0;
      b << std::cos(gamma), std::sin(gamma);
      LogitFn s = [&](const Mat& X) { return Vec(X.transpose() * a); };
      LogitFn t = [&](const Mat& X) { return Vec(X.transpose() * b); };
      InputSampler draw = [](std::size_t n) { return sample_inputs(2, n, 77); };
      const RiskEstimate r = empirical_risk(s, t, draw, 100000);
      CHECK(std::abs(r.risk - gamma / std::numbers::pi) < 0.01);
      const Mat X = draw(100000);
      std::size_t dis = 0;
      for (Eigen::Index i = 0; i < X.cols(); ++i) dis += (X.col(i).dot(a) > 0) != (X.col(i).dot(b) > 0);
      CHECK(r.disagreements == dis);
    }
  }

  TEST_CASE("fit_power_law") {
    std::vector<double> ns{8, 16, 32, 64, 128}, ys, flat(5, 3.0);
    for (double n : ns) ys.push_back(4.0 * std::pow(n, -0.7));
    const PowerLawFit f = fit_power_law(ns, ys);
    CHECK(f.exponent == doctest::Approx(-0.7).epsilon(1e-12));
    CHECK(std::exp(f.intercept) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(f.residual < 1e-12);
    CHECK(fit_power_law(ns, flat).exponent == doctest::Approx(0.0));
  }

  TEST_CASE("smooth_curve") {
    const std::vector<double> s = smooth_curve({1, 2, 3, 10}, 3);
    CHECK(s[0] == 1.5);
    CHECK(s[1] == 2.0);
    CHECK(s[3] == 6.5);
    CHECK_THROWS_AS(smooth_curve({1, 2}, 2), InvalidArgument);
  }
}
