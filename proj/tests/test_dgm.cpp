#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mams/dgm.hpp"
#include "mams/stats.hpp"

using namespace mams;

namespace {

DesignSpec two_arm_design(int n_per_arm, double censor_limit = 42.0) {
  DesignSpec d;
  d.n_arms = 2;
  d.n_per_arm = n_per_arm;
  d.duration_weeks = {26, 16};
  d.censor_limit_days = censor_limit;
  return d;
}

LmmParams noise_free_params() {
  LmmParams p;
  p.beta0 = 0.9;
  p.beta1 = 0.06;
  p.beta_arm = {0.0};
  p.sigma_g1 = p.sigma_g2 = p.sigma_e = 0.0;
  p.rho = 0.0;
  return p;
}

}  // namespace

TEST_CASE("noise-free trajectories follow the affine formula") {
  const DesignSpec design = two_arm_design(2);
  LmmParams params = noise_free_params();
  RngStream eng(1), ttp(2);
  const Enrollment plan = assign_enrollment(design, eng);
  TrialDataset data;
  simulate_ttp(params, design, plan, ttp, &data);
  for (const Patient& p : data.patients) {
    CHECK(p.visits.size() == 9);
    CHECK(p.visits[8].log10_ttp == doctest::Approx(1.38).epsilon(1e-14));
    CHECK(p.visits[0].log10_ttp == doctest::Approx(0.9).epsilon(1e-14));
    CHECK_FALSE(p.visits[8].censored);
  }
}

TEST_CASE("values above the limit are stored at log10(42) and flagged") {
  const DesignSpec design = two_arm_design(2);
  LmmParams params = noise_free_params();
  params.beta0 = 1.70;  // every visit above the limit
  params.beta1 = 0.0;
  RngStream eng(1), ttp(2);
  const Enrollment plan = assign_enrollment(design, eng);
  TrialDataset data;
  simulate_ttp(params, design, plan, ttp, &data);
  const double limit = std::log10(42.0);
  CHECK(limit == doctest::Approx(1.6232492903979006).epsilon(1e-15));
  for (const Patient& p : data.patients)
    for (const Visit& v : p.visits) {
      CHECK(v.censored);
      CHECK(v.log10_ttp == limit);
    }
}

TEST_CASE("censoring consistency holds on noisy data") {
  DesignSpec design = two_arm_design(400);
  LmmParams params;
  params.beta_arm = {0.02};
  RngStream eng(11), ttp(12);
  const Enrollment plan = assign_enrollment(design, eng);
  TrialDataset data;
  simulate_ttp(params, design, plan, ttp, &data);
  const double limit = std::log10(design.censor_limit_days);
  int censored = 0;
  for (const Patient& p : data.patients)
    for (const Visit& v : p.visits) {
      if (v.censored) {
        CHECK(v.log10_ttp == limit);
        ++censored;
      } else {
        CHECK(v.log10_ttp <= limit);
      }
    }
  CHECK(censored > 0);
}

TEST_CASE("week-0 dispersion matches sqrt(sigma_g1^2 + sigma_e^2)") {
  DesignSpec design = two_arm_design(10000, 1e9);
  LmmParams params;
  params.beta_arm = {0.0};
  RngStream eng(21), ttp(22);
  const Enrollment plan = assign_enrollment(design, eng);
  TrialDataset data;
  simulate_ttp(params, design, plan, ttp, &data);
  std::vector<double> week0;
  for (const Patient& p : data.patients) week0.push_back(p.visits[0].log10_ttp);
  const double sd = std::sqrt(sample_variance(week0));
  const double expected = std::sqrt(0.2 * 0.2 + 0.15 * 0.15);
  CHECK(sd == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("weibull calibration closed form and round trip") {
  const double gamma = calibrate_weibull(0.425, 0.05, 36.0);
  CHECK(gamma == doctest::Approx(-4.4932).epsilon(1e-4));
  CHECK(weibull_survival(36.0, gamma, 0.425) == doctest::Approx(0.95).epsilon(1e-6));

  // round trip S(h) = 1 - r to 1e-9 over a grid
  for (double p : {0.2, 0.425, 1.0, 2.0})
    for (double r : {0.025, 0.05, 0.10, 0.5, 0.9})
      for (double h : {13.0, 26.0, 36.0, 52.0}) {
        const double g = calibrate_weibull(p, r, h);
        CHECK(weibull_survival(h, g, p) == doctest::Approx(1.0 - r).epsilon(1e-9));
      }

  // monotone in the target rate
  CHECK(calibrate_weibull(0.425, 0.01, 36.0) < calibrate_weibull(0.425, 0.05, 36.0));

  // shape claim: for small rates ~75% of events fall in the first half of
  // a 26-week horizon
  const double g26 = calibrate_weibull(0.425, 1e-4, 26.0);
  const double f13 = 1.0 - weibull_survival(13.0, g26, 0.425);
  const double f26 = 1.0 - weibull_survival(26.0, g26, 0.425);
  CHECK(f13 / f26 == doctest::Approx(std::pow(0.5, 0.425)).epsilon(1e-3));
  CHECK(f13 / f26 == doctest::Approx(0.745).epsilon(2e-3));

  CHECK_THROWS(calibrate_weibull(0.425, 0.0, 36.0));
  CHECK_THROWS(calibrate_weibull(0.425, 1.0, 36.0));
  CHECK_THROWS(calibrate_weibull(-1.0, 0.05, 36.0));
}

TEST_CASE("weibull inverse CDF boundary and monotonicity") {
  const double gamma = -4.4934;
  CHECK(weibull_inverse_cdf(1.0, gamma, 0.425) == 0.0);
  double prev = 0.0;
  for (double u : {0.9999, 0.9, 0.5, 0.1, 1e-6}) {
    const double t = weibull_inverse_cdf(u, gamma, 0.425);
    CHECK(t > prev);
    prev = t;
  }
}

TEST_CASE("event simulation matches the calibrated distribution") {
  DesignSpec design = two_arm_design(50000);
  design.enrollment_rate = 100000;  // irrelevant here
  WeibullSpec spec;
  spec.shape = 0.425;
  spec.gamma = {-4.4934, -4.4934};
  spec.horizon = {36.0, 36.0};
  RngStream eng(31), ev(32);
  const Enrollment plan = assign_enrollment(design, eng);
  TrialDataset data;
  data.patients.resize(design.total_patients());
  simulate_events(spec, design, plan, ev, &data);

  int observed = 0, by13 = 0;
  for (const Patient& p : data.patients) {
    if (p.event_observed) {
      ++observed;
      CHECK(p.event_time > 0.0);
      CHECK(p.event_time <= 36.0);
      if (p.event_time <= 13.0) ++by13;
    } else {
      CHECK(p.event_time == 36.0);
    }
  }
  const double n = static_cast<double>(design.total_patients());
  CHECK(observed / n == doctest::Approx(0.05).epsilon(0.06));
  CHECK(std::fabs(observed / n - 0.05) < 0.003);
  const double ratio = static_cast<double>(by13) / observed;
  CHECK(std::fabs(ratio - std::pow(13.0 / 36.0, 0.425)) < 0.01);
}

TEST_CASE("enrollment calendar and permuted blocks") {
  DesignSpec design;  // 5 arms, 30/arm, 10/week
  RngStream eng(41);
  const Enrollment plan = assign_enrollment(design, eng);
  CHECK(plan.rand_week.front() == 1);
  CHECK(plan.rand_week.back() == 15);

  std::vector<int> counts(5, 0);
  for (int a : plan.arm) counts[a] += 1;
  for (int c : counts) CHECK(c == 30);

  // every aligned block of 10 holds each arm exactly twice
  for (int b = 0; b < 15; ++b) {
    std::vector<int> block_counts(5, 0);
    for (int i = 0; i < 10; ++i) block_counts[plan.arm[10 * b + i]] += 1;
    for (int c : block_counts) CHECK(c == 2);
  }
}

TEST_CASE("interim trigger and event counting") {
  DesignSpec design;  // defaults: 5 arms, 30 per arm, 8 ttp weeks
  LmmParams params;
  params.beta_arm = {0.0, 0.0, 0.0, 0.0};
  const auto rates = std::vector<double>{0.05, 0.1, 0.1, 0.1, 0.1};
  const WeibullSpec spec = calibrate_event_model(0.425, rates, design);
  const TrialDataset data = simulate_trial(params, spec, design,
                                           replicate_streams(derive_stream(7, 0)));
  CHECK(interim_trigger_week(data, design) == 24);
  const InterimSnapshot snap = take_interim_snapshot(data, design);
  CHECK(snap.interim_week == 24);
  for (int k = 0; k < 5; ++k) CHECK(snap.enrolled[k] == 30);
  // complete TTP data at the trigger week
  std::size_t rows = 0;
  for (const auto& v : snap.visits) rows += v.size();
  CHECK(rows == 150 * 9);
}

TEST_CASE("event dating at week granularity") {
  DesignSpec design = two_arm_design(1);
  TrialDataset data;
  Patient p;
  p.id = 0;
  p.arm = 1;
  p.rand_week = 1;
  p.visits = {{0, 0.9, false}};
  p.event_time = 8.0;  // calendar week 1 + 16 + 8 = 25
  p.event_observed = true;
  data.patients.push_back(p);
  Patient q = p;
  q.id = 1;
  q.arm = 0;
  q.event_observed = false;
  data.patients.push_back(q);

  CHECK(take_snapshot_at(data, design, 24).unfavorable[1] == 0);
  CHECK(take_snapshot_at(data, design, 25).unfavorable[1] == 1);
  // an event later in a week counts with the week it falls in
  data.patients[0].event_time = 7.9;  // floor -> 23
  CHECK(take_snapshot_at(data, design, 24).unfavorable[1] == 1);
  // censored-at-horizon patients never count
  CHECK(take_snapshot_at(data, design, 100).unfavorable[0] == 0);
}

TEST_CASE("snapshot with no events has zero counts") {
  DesignSpec design;
  LmmParams params;
  params.beta_arm = {0.0, 0.0, 0.0, 0.0};
  WeibullSpec spec = calibrate_event_model(
      0.425, {1e-12, 1e-12, 1e-12, 1e-12, 1e-12}, design);
  const TrialDataset data = simulate_trial(params, spec, design,
                                           replicate_streams(derive_stream(9, 1)));
  const InterimSnapshot snap = take_interim_snapshot(data, design);
  for (int c : snap.unfavorable) CHECK(c == 0);
}

TEST_CASE("snapshot monotonicity in the interim week") {
  DesignSpec design;
  design.n_per_arm = 10;
  LmmParams params;
  params.beta_arm = {0.0, 0.05, -0.01, 0.02};
  const WeibullSpec spec = calibrate_event_model(
      0.425, {0.05, 0.10, 0.10, 0.10, 0.10}, design);
  const TrialDataset data = simulate_trial(params, spec, design,
                                           replicate_streams(derive_stream(3, 2)));
  std::size_t prev_rows = 0;
  std::vector<int> prev_counts(5, 0);
  for (int week = 0; week <= 60; week += 3) {
    const InterimSnapshot snap = take_snapshot_at(data, design, week);
    std::size_t rows = 0;
    for (const auto& v : snap.visits) rows += v.size();
    CHECK(rows >= prev_rows);
    for (int k = 0; k < 5; ++k) {
      CHECK(snap.unfavorable[k] >= prev_counts[k]);
      CHECK(snap.unfavorable[k] <= snap.enrolled[k]);
    }
    prev_rows = rows;
    prev_counts = snap.unfavorable;
  }
}

TEST_CASE("identical streams give bit-identical datasets") {
  DesignSpec design;
  LmmParams params;
  params.beta_arm = {0.006, 0.012, 0.018, 0.024};
  const WeibullSpec spec = calibrate_event_model(
      0.425, {0.05, 0.10, 0.05, 0.05, 0.025}, design);
  const TrialStreams streams = replicate_streams(derive_stream(77, 3));
  const TrialDataset a = simulate_trial(params, spec, design, streams);
  const TrialDataset b = simulate_trial(params, spec, design, streams);
  REQUIRE(a.patients.size() == b.patients.size());
  for (std::size_t i = 0; i < a.patients.size(); ++i) {
    CHECK(a.patients[i].arm == b.patients[i].arm);
    CHECK(a.patients[i].rand_week == b.patients[i].rand_week);
    CHECK(a.patients[i].event_time == b.patients[i].event_time);
    CHECK(a.patients[i].event_observed == b.patients[i].event_observed);
    for (std::size_t j = 0; j < a.patients[i].visits.size(); ++j) {
      CHECK(a.patients[i].visits[j].log10_ttp ==
            b.patients[i].visits[j].log10_ttp);
      CHECK(a.patients[i].visits[j].censored == b.patients[i].visits[j].censored);
    }
  }
}

TEST_CASE("slope deviations are independent of event indicators within arm") {
  DesignSpec design = two_arm_design(20000, 1e9);
  LmmParams params;
  params.sigma_e = 0.0;  // slopes recoverable exactly
  params.beta_arm = {0.02};
  const WeibullSpec spec =
      calibrate_event_model(0.425, {0.3, 0.3}, design);
  const TrialDataset data = simulate_trial(params, spec, design,
                                           replicate_streams(derive_stream(5, 4)));
  std::vector<double> slope_dev, event;
  for (const Patient& p : data.patients) {
    if (p.arm != 1) continue;
    const double slope = (p.visits[8].log10_ttp - p.visits[0].log10_ttp) / 8.0;
    slope_dev.push_back(slope - (params.beta1 + params.beta_arm[0]));
    event.push_back(p.event_observed ? 1.0 : 0.0);
  }
  const double n = static_cast<double>(slope_dev.size());
  const double mx = mean(slope_dev), my = mean(event);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < slope_dev.size(); ++i) {
    sxy += (slope_dev[i] - mx) * (event[i] - my);
    sxx += (slope_dev[i] - mx) * (slope_dev[i] - mx);
    syy += (event[i] - my) * (event[i] - my);
  }
  const double r = sxy / std::sqrt(sxx * syy);
  CHECK(std::fabs(r) < 3.0 / std::sqrt(n));
}

TEST_CASE("lognormal frailty widens individual event-time dispersion") {
  DesignSpec design = two_arm_design(20000);
  WeibullSpec base = calibrate_event_model(0.425, {0.3, 0.3}, design);
  WeibullSpec frail = base;
  frail.frailty_sd = 1.5;

  RngStream eng(61);
  const Enrollment plan = assign_enrollment(design, eng);
  TrialDataset a, b;
  a.patients.resize(design.total_patients());
  b.patients.resize(design.total_patients());
  RngStream ev_a(62), ev_b(62);
  simulate_events(base, design, plan, ev_a, &a);
  simulate_events(frail, design, plan, ev_b, &b);

  // same stream, different model -> different draws
  bool any_diff = false;
  std::vector<double> la, lb;
  int events_a = 0, events_b = 0;
  for (int i = 0; i < design.total_patients(); ++i) {
    any_diff |= a.patients[i].event_time != b.patients[i].event_time;
    if (a.patients[i].event_observed) {
      ++events_a;
      la.push_back(std::log(a.patients[i].event_time));
    }
    if (b.patients[i].event_observed) {
      ++events_b;
      lb.push_back(std::log(b.patients[i].event_time));
    }
  }
  CHECK(any_diff);
  // frailty spreads log event times beyond the baseline Weibull
  CHECK(sample_variance(lb) > sample_variance(la));
}

TEST_CASE("parameter validation") {
  DesignSpec design;
  LmmParams params;
  params.beta_arm = {0, 0, 0, 0};
  params.sigma_e = -0.1;
  CHECK_THROWS_AS(params.validate(design.n_arms), std::invalid_argument);
  params.sigma_e = 0.15;
  params.rho = 1.5;
  CHECK_THROWS_AS(params.validate(design.n_arms), std::invalid_argument);
  params.rho = 0.3;
  CHECK_NOTHROW(params.validate(design.n_arms));

  DesignSpec bad = design;
  bad.n_arms = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = design;
  bad.duration_weeks = {26, 16, 16, 16, 60};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
