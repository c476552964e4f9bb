#pragma once

#include <cstdint>
#include <vector>

#include "mams/rng.hpp"

namespace mams {

// Linear mixed model generating the weekly log10(TTP) series. Individual
// intercepts and slopes are bivariate normal around (beta0, beta1); novel
// arms add beta_arm[k] to the slope.
struct LmmParams {
  double beta0 = 0.9;    // mean intercept, log10 days
  double beta1 = 0.06;   // mean control slope, log10 days per week
  std::vector<double> beta_arm;  // additive slope effect, novel arms only
  double sigma_g1 = 0.2;   // SD of random intercepts
  double sigma_g2 = 0.02;  // SD of random slopes
  double rho = 0.3;        // corr(random intercept, random slope)
  double sigma_e = 0.15;   // residual SD

  // sigma_e == 0 is allowed (deterministic trajectories, used in tests).
  void validate(int n_arms) const;
};

// Weibull proportional hazards model for time to unfavorable outcome,
// measured in weeks from end of treatment. log-hazard intercepts are stored
// fully resolved per arm (the control intercept is absorbed).
struct WeibullSpec {
  double shape = 0.425;
  std::vector<double> gamma;    // per arm, resolved log-hazard intercept
  std::vector<double> horizon;  // per arm, post-treatment follow-up, weeks
  double frailty_sd = 0.0;      // SD of a lognormal individual frailty; 0 = off

  void validate(int n_arms) const;
};

struct DesignSpec {
  int n_arms = 5;      // including control (arm index 0)
  int n_per_arm = 30;  // interim sample size per arm
  std::vector<int> duration_weeks = {26, 16, 16, 16, 16};
  int enrollment_rate = 10;  // patients randomized per calendar week
  int ttp_weeks = 8;         // weekly visits after randomization (plus week 0)
  double censor_limit_days = 42.0;

  int total_patients() const { return n_arms * n_per_arm; }
  void validate() const;
};

struct Visit {
  int week;          // weeks since randomization, 0..ttp_weeks
  double log10_ttp;  // stored at log10(censor_limit_days) when censored
  bool censored;
};

struct Patient {
  int id;
  int arm;        // 0-based, 0 = control
  int rand_week;  // 1-based calendar week of randomization
  std::vector<Visit> visits;
  double event_time;    // weeks from end of treatment; horizon when censored
  bool event_observed;  // false = censored at horizon, no unfavorable outcome
};

struct TrialDataset {
  std::vector<Patient> patients;
};

// Randomization calendar: patient i enters in week rand_week[i] and is
// allocated to arm[i] by permuted blocks of size n_arms.
struct Enrollment {
  std::vector<int> arm;
  std::vector<int> rand_week;
};

// Calendar-filtered view of a dataset at a given interim week.
struct InterimSnapshot {
  int interim_week = 0;
  int n_arms = 0;
  std::vector<int> arm_of;                 // per visible patient
  std::vector<std::vector<Visit>> visits;  // per visible patient
  std::vector<int> unfavorable;  // per arm, events counted by interim
  std::vector<int> enrolled;     // per arm, randomized by interim
  double censor_limit_days = 42.0;
};

// --- Weibull survival machinery -------------------------------------------

// Closed-form log-hazard intercept such that S(horizon) = 1 - target_rate,
// with S(t) = exp(-exp(gamma) * t^shape).
double calibrate_weibull(double shape, double target_rate, double horizon);

double weibull_survival(double t, double gamma, double shape);

// Inverse-CDF transform: u in (0,1] is a survival probability.
double weibull_inverse_cdf(double u, double gamma, double shape);

// Builds a calibrated WeibullSpec from per-arm target event rates
// (rates[0] = control) and per-arm horizons 52 - duration.
WeibullSpec calibrate_event_model(double shape, const std::vector<double>& rates,
                                  const DesignSpec& design,
                                  double frailty_sd = 0.0);

// --- Trial generation ------------------------------------------------------

Enrollment assign_enrollment(const DesignSpec& design, RngStream& rng);

// Fills per-patient TTP series for the given enrollment. Values above
// log10(censor_limit_days) are stored at the limit with the censored flag.
void simulate_ttp(const LmmParams& params, const DesignSpec& design,
                  const Enrollment& enrollment, RngStream& rng,
                  TrialDataset* out);

// Fills per-patient event fields for the given enrollment.
void simulate_events(const WeibullSpec& spec, const DesignSpec& design,
                     const Enrollment& enrollment, RngStream& rng,
                     TrialDataset* out);

struct TrialStreams {
  std::uint64_t enrollment;
  std::uint64_t ttp;
  std::uint64_t events;
};

TrialStreams replicate_streams(std::uint64_t replicate_key);

TrialDataset simulate_trial(const LmmParams& params, const WeibullSpec& spec,
                            const DesignSpec& design, const TrialStreams& streams);

// Interim trigger: one calendar week after the last of the first
// n_per_arm * n_arms patients completes ttp_weeks of visits.
int interim_trigger_week(const TrialDataset& dataset, const DesignSpec& design);

// Snapshot at an explicit calendar week. Visits are visible when
// rand_week + week <= interim_week; an observed event is counted when the
// calendar week it falls in, rand_week + duration + floor(event_time), is
// <= interim_week.
InterimSnapshot take_snapshot_at(const TrialDataset& dataset,
                                 const DesignSpec& design, int interim_week);

InterimSnapshot take_interim_snapshot(const TrialDataset& dataset,
                                      const DesignSpec& design);

}  // namespace mams
