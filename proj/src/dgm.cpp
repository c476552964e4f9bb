#include "mams/dgm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mams {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void LmmParams::validate(int n_arms) const {
  require(std::isfinite(beta0) && std::isfinite(beta1),
          "dgm.beta0/beta1: must be finite");
  require(sigma_g1 >= 0.0, "dgm.sigma_g1: must be >= 0");
  require(sigma_g2 >= 0.0, "dgm.sigma_g2: must be >= 0");
  require(sigma_e >= 0.0, "dgm.sigma_e: must be >= 0");
  require(std::fabs(rho) <= 1.0, "dgm.rho: must be in [-1,1]");
  require(static_cast<int>(beta_arm.size()) == n_arms - 1,
          "dgm.beta_arm: need one entry per novel arm");
}

void WeibullSpec::validate(int n_arms) const {
  require(shape > 0.0, "weibull.shape: must be > 0");
  require(static_cast<int>(gamma.size()) == n_arms,
          "weibull.gamma: need one entry per arm");
  require(static_cast<int>(horizon.size()) == n_arms,
          "weibull.horizon: need one entry per arm");
  for (double h : horizon) require(h > 0.0, "weibull.horizon: must be > 0");
  require(frailty_sd >= 0.0, "weibull.frailty_sd: must be >= 0");
}

void DesignSpec::validate() const {
  require(n_arms >= 2, "design.n_arms: must be >= 2");
  require(n_per_arm >= 1, "design.n_per_arm: must be >= 1");
  require(static_cast<int>(duration_weeks.size()) == n_arms,
          "design.duration_weeks: need one entry per arm");
  for (int d : duration_weeks)
    require(d > 0 && d < 52, "design.duration_weeks: must be in (0,52)");
  require(enrollment_rate >= 1, "design.enrollment_rate: must be >= 1");
  require(ttp_weeks >= 1, "design.ttp_weeks: must be >= 1");
  require(censor_limit_days > 0.0, "design.censor_limit_days: must be > 0");
}

double calibrate_weibull(double shape, double target_rate, double horizon) {
  require(shape > 0.0, "calibrate_weibull: shape must be > 0");
  require(target_rate > 0.0 && target_rate < 1.0,
          "calibrate_weibull: target_rate must be in (0,1)");
  require(horizon > 0.0, "calibrate_weibull: horizon must be > 0");
  return std::log(-std::log(1.0 - target_rate)) - shape * std::log(horizon);
}

double weibull_survival(double t, double gamma, double shape) {
  if (t <= 0.0) return 1.0;
  return std::exp(-std::exp(gamma) * std::pow(t, shape));
}

double weibull_inverse_cdf(double u, double gamma, double shape) {
  // u is a survival probability: S(t) = u  =>  t = (-ln u / e^gamma)^(1/shape)
  return std::pow(-std::log(u) * std::exp(-gamma), 1.0 / shape);
}

WeibullSpec calibrate_event_model(double shape, const std::vector<double>& rates,
                                  const DesignSpec& design, double frailty_sd) {
  require(static_cast<int>(rates.size()) == design.n_arms,
          "rates: need one entry per arm");
  WeibullSpec spec;
  spec.shape = shape;
  spec.frailty_sd = frailty_sd;
  spec.gamma.resize(design.n_arms);
  spec.horizon.resize(design.n_arms);
  for (int k = 0; k < design.n_arms; ++k) {
    spec.horizon[k] = 52.0 - design.duration_weeks[k];
    spec.gamma[k] = calibrate_weibull(shape, rates[k], spec.horizon[k]);
  }
  spec.validate(design.n_arms);
  return spec;
}

Enrollment assign_enrollment(const DesignSpec& design, RngStream& rng) {
  design.validate();
  const int n = design.total_patients();
  Enrollment plan;
  plan.arm.reserve(n);
  plan.rand_week.resize(n);

  // Permuted blocks of size n_arms keep allocation exactly balanced.
  std::vector<int> block(design.n_arms);
  while (static_cast<int>(plan.arm.size()) < n) {
    std::iota(block.begin(), block.end(), 0);
    rng.shuffle(block);
    for (int a : block) {
      if (static_cast<int>(plan.arm.size()) < n) plan.arm.push_back(a);
    }
  }
  for (int i = 0; i < n; ++i)
    plan.rand_week[i] = i / design.enrollment_rate + 1;
  return plan;
}

void simulate_ttp(const LmmParams& params, const DesignSpec& design,
                  const Enrollment& enrollment, RngStream& rng,
                  TrialDataset* out) {
  design.validate();
  params.validate(design.n_arms);
  const int n = design.total_patients();
  require(static_cast<int>(enrollment.arm.size()) == n,
          "simulate_ttp: enrollment size mismatch");

  const double limit = std::log10(design.censor_limit_days);
  // Cholesky factor of the 2x2 random-effects covariance.
  const double slope_orth = params.sigma_g2 *
      std::sqrt(std::max(0.0, 1.0 - params.rho * params.rho));

  out->patients.resize(n);
  for (int i = 0; i < n; ++i) {
    Patient& p = out->patients[i];
    p.id = i;
    p.arm = enrollment.arm[i];
    p.rand_week = enrollment.rand_week[i];

    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double intercept = params.beta0 + params.sigma_g1 * z1;
    double slope = params.beta1 + params.sigma_g2 * params.rho * z1 +
                   slope_orth * z2;
    if (p.arm > 0) slope += params.beta_arm[p.arm - 1];

    p.visits.resize(design.ttp_weeks + 1);
    for (int w = 0; w <= design.ttp_weeks; ++w) {
      const double noise = (params.sigma_e > 0.0)
                               ? params.sigma_e * rng.normal()
                               : 0.0;
      const double value = intercept + slope * w + noise;
      Visit& v = p.visits[w];
      v.week = w;
      v.censored = value > limit;
      v.log10_ttp = v.censored ? limit : value;
    }
  }
}

void simulate_events(const WeibullSpec& spec, const DesignSpec& design,
                     const Enrollment& enrollment, RngStream& rng,
                     TrialDataset* out) {
  design.validate();
  spec.validate(design.n_arms);
  const int n = design.total_patients();
  require(static_cast<int>(enrollment.arm.size()) == n,
          "simulate_events: enrollment size mismatch");
  require(static_cast<int>(out->patients.size()) == n,
          "simulate_events: dataset not initialized");

  for (int i = 0; i < n; ++i) {
    Patient& p = out->patients[i];
    const int k = enrollment.arm[i];
    double gamma = spec.gamma[k];
    if (spec.frailty_sd > 0.0) gamma += spec.frailty_sd * rng.normal();
    const double t = weibull_inverse_cdf(rng.uniform_pos(), gamma, spec.shape);
    if (t > spec.horizon[k]) {
      p.event_time = spec.horizon[k];
      p.event_observed = false;
    } else {
      p.event_time = t;
      p.event_observed = true;
    }
  }
}

TrialStreams replicate_streams(std::uint64_t replicate_key) {
  return TrialStreams{
      derive_stream(replicate_key, kStreamEnrollment),
      derive_stream(replicate_key, kStreamTtp),
      derive_stream(replicate_key, kStreamEvents),
  };
}

TrialDataset simulate_trial(const LmmParams& params, const WeibullSpec& spec,
                            const DesignSpec& design,
                            const TrialStreams& streams) {
  RngStream enroll_rng(streams.enrollment);
  RngStream ttp_rng(streams.ttp);
  RngStream event_rng(streams.events);
  const Enrollment plan = assign_enrollment(design, enroll_rng);
  TrialDataset data;
  simulate_ttp(params, design, plan, ttp_rng, &data);
  simulate_events(spec, design, plan, event_rng, &data);
  return data;
}

int interim_trigger_week(const TrialDataset& dataset, const DesignSpec& design) {
  const int n = design.total_patients();
  require(static_cast<int>(dataset.patients.size()) >= n,
          "interim_trigger_week: insufficient enrollment");
  int last_week = 0;
  for (int i = 0; i < n; ++i)
    last_week = std::max(last_week, dataset.patients[i].rand_week);
  return last_week + design.ttp_weeks + 1;
}

InterimSnapshot take_snapshot_at(const TrialDataset& dataset,
                                 const DesignSpec& design, int interim_week) {
  InterimSnapshot snap;
  snap.interim_week = interim_week;
  snap.n_arms = design.n_arms;
  snap.censor_limit_days = design.censor_limit_days;
  snap.unfavorable.assign(design.n_arms, 0);
  snap.enrolled.assign(design.n_arms, 0);

  for (const Patient& p : dataset.patients) {
    if (p.rand_week > interim_week) continue;
    snap.enrolled[p.arm] += 1;

    std::vector<Visit> visible;
    for (const Visit& v : p.visits) {
      if (p.rand_week + v.week <= interim_week) visible.push_back(v);
    }
    if (!visible.empty()) {
      snap.arm_of.push_back(p.arm);
      snap.visits.push_back(std::move(visible));
    }

    if (p.event_observed) {
      // Events are dated by the calendar week they fall in.
      const int event_week = p.rand_week + design.duration_weeks[p.arm] +
                             static_cast<int>(std::floor(p.event_time));
      if (event_week <= interim_week) snap.unfavorable[p.arm] += 1;
    }
  }
  return snap;
}

InterimSnapshot take_interim_snapshot(const TrialDataset& dataset,
                                      const DesignSpec& design) {
  return take_snapshot_at(dataset, design,
                          interim_trigger_week(dataset, design));
}

}  // namespace mams
