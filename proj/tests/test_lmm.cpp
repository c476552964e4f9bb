#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "mams/lmm.hpp"
#include "mams/stats.hpp"

using namespace mams;

namespace {

InterimSnapshot empty_snapshot(int n_arms) {
  InterimSnapshot snap;
  snap.interim_week = 0;
  snap.n_arms = n_arms;
  snap.unfavorable.assign(n_arms, 0);
  snap.enrolled.assign(n_arms, 0);
  return snap;
}

struct SmallTrial {
  DesignSpec design;
  InterimSnapshot snapshot;
};

// Two-arm dataset with configurable parameters; interim covers everything.
SmallTrial make_trial(const LmmParams& params, int n_per_arm, int ttp_weeks,
                      double censor_limit, std::uint64_t seed) {
  SmallTrial t;
  t.design.n_arms = 2;
  t.design.n_per_arm = n_per_arm;
  t.design.duration_weeks = {26, 16};
  t.design.ttp_weeks = ttp_weeks;
  t.design.censor_limit_days = censor_limit;
  RngStream enroll(derive_stream(seed, 1)), ttp(derive_stream(seed, 2));
  const Enrollment plan = assign_enrollment(t.design, enroll);
  TrialDataset data;
  simulate_ttp(params, t.design, plan, ttp, &data);
  for (Patient& p : data.patients) {
    p.event_time = 52.0 - t.design.duration_weeks[p.arm];
    p.event_observed = false;
  }
  t.snapshot = take_interim_snapshot(data, t.design);
  return t;
}

LmmParams small_params() {
  LmmParams p;
  p.beta0 = 0.9;
  p.beta1 = 0.06;
  p.beta_arm = {0.012};
  return p;
}

double column_mean(const std::vector<double>& v) { return mean(v); }

}  // namespace

TEST_CASE("prior recovery: with no data the posterior is the prior") {
  PriorSpec priors;
  SamplerConfig cfg;
  cfg.n_chains = 4;
  cfg.n_iterations = 2000;
  cfg.n_warmup = 500;
  cfg.seed = 11;

  const FitResult res = fit(empty_snapshot(3), priors, cfg);
  CHECK(res.flags.empty_likelihood);
  const int n = res.draws.n_draws();
  REQUIRE(n == 4 * 1500);

  // draws of beta are iid prior draws: mean 0, SD 10
  const double se = 10.0 / std::sqrt(static_cast<double>(n));
  for (const auto* col : {&res.draws.beta0, &res.draws.beta1,
                          &res.draws.beta_arm[0], &res.draws.beta_arm[1]}) {
    CHECK(std::fabs(column_mean(*col)) < 3.0 * se);
    const double sd = std::sqrt(sample_variance(*col));
    CHECK(sd == doctest::Approx(10.0).epsilon(0.05));
  }

  // residual SD draws follow the inverse-gamma prior; check the median
  std::vector<double> se2;
  for (double s : res.draws.sigma_e) se2.push_back(s * s);
  std::sort(se2.begin(), se2.end());
  // median of IG(2, 0.1) = 0.1 / median(Gamma(2,1)) = 0.1 / 1.67835
  CHECK(quantile_type7(se2, 0.5) == doctest::Approx(0.1 / 1.67835).epsilon(0.05));
}

TEST_CASE("conjugate oracle: fixed-variance no-RE fit matches the closed form") {
  LmmParams params = small_params();
  params.sigma_g1 = params.sigma_g2 = params.rho = 0.0;
  const SmallTrial t = make_trial(params, 6, 4, 1e9, 21);

  const double sigma_e = 0.15;
  PriorSpec priors;
  SamplerConfig cfg;
  cfg.n_chains = 4;
  cfg.n_iterations = 2000;
  cfg.n_warmup = 500;
  cfg.seed = 22;
  cfg.sample_random_effects = false;
  cfg.fixed_sigma_e = sigma_e;

  const FitResult res = fit(t.snapshot, priors, cfg);
  const int n = res.draws.n_draws();

  // independent route: assemble the design matrix directly and solve the
  // normal-posterior equations
  std::vector<double> ys;
  std::vector<std::array<double, 3>> xs;
  for (std::size_t i = 0; i < t.snapshot.visits.size(); ++i) {
    for (const Visit& v : t.snapshot.visits[i]) {
      const double w = v.week;
      xs.push_back({1.0, w, t.snapshot.arm_of[i] == 1 ? w : 0.0});
      ys.push_back(v.log10_ttp);
    }
  }
  Eigen::MatrixXd x(xs.size(), 3);
  Eigen::VectorXd y(ys.size());
  for (std::size_t r = 0; r < xs.size(); ++r) {
    for (int c = 0; c < 3; ++c) x(r, c) = xs[r][c];
    y(r) = ys[r];
  }
  const double inv_se2 = 1.0 / (sigma_e * sigma_e);
  Eigen::MatrixXd a = x.transpose() * x * inv_se2;
  a.diagonal().array() += 1.0 / 100.0;  // prior precision, N(0, 10^2)
  const Eigen::VectorXd m = a.ldlt().solve(x.transpose() * y * inv_se2);
  const Eigen::MatrixXd cov = a.inverse();

  const std::vector<const std::vector<double>*> cols{
      &res.draws.beta0, &res.draws.beta1, &res.draws.beta_arm[0]};
  for (int j = 0; j < 3; ++j) {
    const double post_sd = std::sqrt(cov(j, j));
    const double mcse = post_sd / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(column_mean(*cols[j]) - m(j)) < 3.0 * mcse);
    CHECK(std::sqrt(sample_variance(*cols[j])) ==
          doctest::Approx(post_sd).epsilon(0.05));
  }
  // sanity: the posterior concentrates near the generating values
  CHECK(std::fabs(m(0) - 0.9) < 0.15);
  CHECK(std::fabs(m(1) - 0.06) < 0.02);
}

TEST_CASE("censoring machinery is inert on uncensored data") {
  const SmallTrial t = make_trial(small_params(), 8, 6, 1e9, 31);
  for (const auto& visits : t.snapshot.visits)
    for (const Visit& v : visits) REQUIRE_FALSE(v.censored);

  PriorSpec priors;
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iterations = 600;
  cfg.n_warmup = 200;
  cfg.seed = 41;

  cfg.censoring_enabled = true;
  const FitResult on = fit(t.snapshot, priors, cfg);
  cfg.censoring_enabled = false;
  const FitResult off = fit(t.snapshot, priors, cfg);

  REQUIRE(on.draws.n_draws() == off.draws.n_draws());
  for (int i = 0; i < on.draws.n_draws(); ++i) {
    CHECK(on.draws.beta1[i] == off.draws.beta1[i]);
    CHECK(on.draws.sigma_e[i] == off.draws.sigma_e[i]);
    CHECK(on.draws.sigma_g1[i] == off.draws.sigma_g1[i]);
  }
  CHECK(std::isinf(on.flags.min_imputed_latent));
}

TEST_CASE("imputed latent responses stay above the censor limit") {
  LmmParams params = small_params();
  params.beta0 = 1.45;  // substantial censoring at log10(42)
  const SmallTrial t = make_trial(params, 10, 8, 42.0, 51);
  int censored = 0;
  for (const auto& visits : t.snapshot.visits)
    for (const Visit& v : visits) censored += v.censored ? 1 : 0;
  REQUIRE(censored > 10);

  PriorSpec priors;
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iterations = 800;
  cfg.n_warmup = 200;
  cfg.seed = 52;
  const FitResult res = fit(t.snapshot, priors, cfg);
  CHECK(res.flags.min_imputed_latent > std::log10(42.0));
  CHECK(std::isfinite(res.flags.min_imputed_latent));
}

TEST_CASE("fit proceeds when an arm is fully censored, with a flag") {
  const double limit = std::log10(42.0);
  InterimSnapshot snap = empty_snapshot(2);
  snap.interim_week = 20;
  for (int i = 0; i < 6; ++i) {
    const int arm = i % 2;
    snap.arm_of.push_back(arm);
    std::vector<Visit> visits;
    for (int w = 0; w <= 4; ++w) {
      if (arm == 1)
        visits.push_back({w, limit, true});
      else
        visits.push_back({w, 0.9 + 0.05 * w, false});
    }
    snap.visits.push_back(visits);
    snap.enrolled[arm] += 1;
  }

  PriorSpec priors;
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iterations = 400;
  cfg.n_warmup = 100;
  cfg.seed = 61;
  const FitResult res = fit(snap, priors, cfg);
  CHECK(res.flags.arm_all_censored[1] == 1);
  CHECK(res.flags.arm_all_censored[0] == 0);
  for (double b : res.draws.beta1) CHECK(std::isfinite(b));
}

TEST_CASE("bit-identical draws for identical seeds") {
  const SmallTrial t = make_trial(small_params(), 6, 4, 42.0, 71);
  PriorSpec priors;
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iterations = 500;
  cfg.n_warmup = 100;
  cfg.seed = 99;
  const FitResult a = fit(t.snapshot, priors, cfg);
  const FitResult b = fit(t.snapshot, priors, cfg);
  REQUIRE(a.draws.n_draws() == b.draws.n_draws());
  for (int i = 0; i < a.draws.n_draws(); ++i) {
    CHECK(a.draws.beta0[i] == b.draws.beta0[i]);
    CHECK(a.draws.sigma_g2[i] == b.draws.sigma_g2[i]);
    CHECK(a.draws.rho[i] == b.draws.rho[i]);
  }
  cfg.seed = 100;
  const FitResult c = fit(t.snapshot, priors, cfg);
  CHECK(c.draws.beta0[0] != a.draws.beta0[0]);
}

TEST_CASE("theta identity holds row-wise on real fits") {
  const SmallTrial t = make_trial(small_params(), 6, 4, 42.0, 81);
  PriorSpec priors;
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iterations = 400;
  cfg.n_warmup = 200;
  cfg.seed = 7;
  FitResult res = fit(t.snapshot, priors, cfg);
  derive_theta(&res.draws);
  for (int i = 0; i < res.draws.n_draws(); ++i)
    CHECK(res.draws.theta[0][i] ==
          100.0 * res.draws.beta_arm[0][i] / res.draws.beta1[i]);
}

TEST_CASE("posterior SD of the control slope contracts with sample size") {
  std::vector<double> sds;
  for (int n_per_arm : {20, 30, 40, 50}) {
    double acc = 0.0;
    for (std::uint64_t rep = 0; rep < 3; ++rep) {
      const SmallTrial t =
          make_trial(small_params(), n_per_arm, 8, 42.0, 900 + 10 * rep);
      PriorSpec priors;
      SamplerConfig cfg;
      cfg.n_chains = 2;
      cfg.n_iterations = 700;
      cfg.n_warmup = 300;
      cfg.seed = derive_stream(1000, n_per_arm, rep);
      const FitResult res = fit(t.snapshot, priors, cfg);
      acc += std::sqrt(sample_variance(res.draws.beta1));
    }
    sds.push_back(acc / 3.0);
  }
  CHECK(sds[1] < sds[0]);
  CHECK(sds[2] < sds[1]);
  CHECK(sds[3] < sds[2]);
}

TEST_CASE("diagnostics integrate with fit and flag single chains") {
  LmmParams params;
  params.beta_arm = {0.006, 0.012, 0.018, 0.024};
  DesignSpec design;  // 5 arms, defaults
  design.n_per_arm = 20;
  RngStream enroll(1), ttp(2);
  const Enrollment plan = assign_enrollment(design, enroll);
  TrialDataset data;
  simulate_ttp(params, design, plan, ttp, &data);
  for (Patient& p : data.patients) {
    p.event_time = 1.0;
    p.event_observed = false;
  }
  const InterimSnapshot snap = take_interim_snapshot(data, design);

  PriorSpec priors;
  SamplerConfig cfg;
  cfg.n_chains = 4;
  cfg.n_iterations = 1200;
  cfg.n_warmup = 400;
  cfg.seed = 3;
  const FitResult res = fit(snap, priors, cfg);
  CHECK(res.diagnostics.param_names.size() == 2 + 4 + 3 + 1);
  CHECK(res.diagnostics.converged);
  for (double r : res.diagnostics.rhat) CHECK(r < 1.01);
  for (double e : res.diagnostics.ess) CHECK(e >= 400.0);

  SamplerConfig one = cfg;
  one.n_chains = 1;
  const FitResult res1 = fit(snap, priors, one);
  CHECK_FALSE(res1.diagnostics.converged);
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  cfg.n_warmup = cfg.n_iterations;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SamplerConfig{};
  cfg.thinning = 7;  // does not divide 1500
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SamplerConfig{};
  cfg.n_chains = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(SamplerConfig{}.validate());

  PriorSpec priors;
  priors.beta_sd = {-1.0};
  CHECK_THROWS_AS(priors.validate(), std::invalid_argument);
  priors = PriorSpec{};
  priors.re_df = 0.5;
  CHECK_THROWS_AS(priors.validate(), std::invalid_argument);
}

TEST_CASE("summarize rejects missing theta and empty input") {
  PosteriorDraws d;
  d.n_arms = 2;
  CHECK_THROWS(summarize(d, 0.05));
}
