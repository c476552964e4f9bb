#include "mams/study.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mams/stats.hpp"

namespace mams {

namespace {

constexpr std::uint64_t kReplicateTag = 0x5245504cULL;   // "REPL"
constexpr std::uint64_t kScenarioTag = 0x5343454eULL;    // "SCEN"
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TtpSetting builtin_ttp_setting(const std::string& name) {
  if (name == "no_winners") return {name, {0.0, 0.0, 0.0, 0.0}};
  if (name == "one_winner") return {name, {10.0, 20.0, 30.0, 40.0}};
  if (name == "two_winners") return {name, {-10.0, 10.0, 35.0, 40.0}};
  if (name == "four_winners") return {name, {35.0, 37.0, 39.0, 41.0}};
  throw std::invalid_argument("unknown TTP setting: " + name);
}

RateSetting builtin_rate_setting(const std::string& name) {
  if (name == "all_minimal") return {name, {0.05, 0.05, 0.05, 0.05}};
  if (name == "all_desirable") return {name, {0.025, 0.025, 0.025, 0.025}};
  if (name == "all_suboptimal") return {name, {0.10, 0.10, 0.10, 0.10}};
  if (name == "mixed") return {name, {0.10, 0.05, 0.05, 0.025}};
  throw std::invalid_argument("unknown rate setting: " + name);
}

void StudySpec::validate() const {
  if (ttp_settings.empty()) throw std::invalid_argument("ttp_settings: empty");
  if (rate_settings.empty()) throw std::invalid_argument("rate_settings: empty");
  if (n_per_arm_grid.empty()) throw std::invalid_argument("n_per_arm: empty");
  if (replicates < 1) throw std::invalid_argument("replicates: must be >= 1");
  if (!(control_rate > 0.0 && control_rate < 1.0))
    throw std::invalid_argument("control_rate: must be in (0,1)");
  if (!(weibull_shape > 0.0)) throw std::invalid_argument("weibull.shape: must be > 0");
  if (!(ci_alpha > 0.0 && ci_alpha < 1.0))
    throw std::invalid_argument("ci_alpha: must be in (0,1)");
  const int novel = design.n_arms - 1;
  for (const auto& s : ttp_settings)
    if (static_cast<int>(s.theta_pct.size()) != novel)
      throw std::invalid_argument("ttp setting '" + s.name +
                                  "': need one theta per novel arm");
  for (const auto& s : rate_settings)
    for (double r : s.rates)
      if (!(r > 0.0 && r < 1.0))
        throw std::invalid_argument("rate setting '" + s.name +
                                    "': rates must be in (0,1)");
  for (const auto& s : rate_settings)
    if (static_cast<int>(s.rates.size()) != novel)
      throw std::invalid_argument("rate setting '" + s.name +
                                  "': need one rate per novel arm");
  design.validate();
  {
    LmmParams probe = lmm;
    probe.beta_arm.assign(design.n_arms - 1, 0.0);
    probe.validate(design.n_arms);
  }
  if (frailty_sd < 0.0)
    throw std::invalid_argument("dgm.frailty_sd: must be >= 0");
  tpp.validate();
  policy.validate();
  sampler.validate();
  priors.validate();
}

std::vector<double> ScenarioConfig::true_theta() const {
  std::vector<double> t{0.0};
  t.insert(t.end(), ttp.theta_pct.begin(), ttp.theta_pct.end());
  return t;
}

std::vector<double> ScenarioConfig::true_rates() const {
  std::vector<double> r{control_rate};
  r.insert(r.end(), rates.rates.begin(), rates.rates.end());
  return r;
}

std::vector<ScenarioConfig> expand_grid(const StudySpec& spec) {
  spec.validate();
  std::vector<ScenarioConfig> out;
  for (std::size_t ti = 0; ti < spec.ttp_settings.size(); ++ti) {
    for (std::size_t ri = 0; ri < spec.rate_settings.size(); ++ri) {
      for (std::size_t ni = 0; ni < spec.n_per_arm_grid.size(); ++ni) {
        ScenarioConfig sc;
        sc.ttp = spec.ttp_settings[ti];
        sc.rates = spec.rate_settings[ri];
        sc.control_rate = spec.control_rate;
        sc.n_per_arm = spec.n_per_arm_grid[ni];
        sc.replicates = spec.replicates;
        sc.id = sc.ttp.name + "__" + sc.rates.name + "__n" +
                std::to_string(sc.n_per_arm);
        sc.seed = derive_stream(spec.seed, ti, ri, kScenarioTag + ni);
        sc.design = spec.design;
        sc.design.n_per_arm = sc.n_per_arm;
        sc.lmm = spec.lmm;
        sc.lmm.beta_arm.resize(sc.design.n_arms - 1);
        for (int k = 0; k < sc.design.n_arms - 1; ++k)
          sc.lmm.beta_arm[k] = sc.ttp.theta_pct[k] / 100.0 * sc.lmm.beta1;
        sc.weibull = calibrate_event_model(spec.weibull_shape, sc.true_rates(),
                                           sc.design, spec.frailty_sd);
        sc.priors = spec.priors;
        sc.tpp = spec.tpp;
        sc.policy = spec.policy;
        sc.sampler = spec.sampler;
        sc.ci_alpha = spec.ci_alpha;
        sc.lmm.validate(sc.design.n_arms);
        out.push_back(std::move(sc));
      }
    }
  }
  return out;
}

SnapshotDecision decide_snapshot(const ScenarioConfig& config,
                                 const InterimSnapshot& snapshot,
                                 std::uint64_t sampler_seed, bool keep_draws) {
  SamplerConfig sampler = config.sampler;
  sampler.seed = sampler_seed;
  FitResult fitres = fit(snapshot, config.priors, sampler);
  derive_theta(&fitres.draws, sampler.max_beta1_nonpos_frac);

  const auto probs = compute_probabilities(fitres.draws, config.tpp);
  const RankingMetrics ranking = ranking_probs(fitres.draws);
  const auto summaries = summarize(fitres.draws, config.ci_alpha);

  const int k_arms = config.design.n_arms;
  std::vector<TppDecision> tpp(k_arms - 1);
  for (int k = 0; k < k_arms - 1; ++k)
    tpp[k] = tpp_decision(probs[k].p_mav, probs[k].p_tv, config.tpp);
  const DecisionOutcome outcome =
      sequential_decision(snapshot.unfavorable, tpp, ranking, config.policy);

  SnapshotDecision out;
  out.diagnostics = std::move(fitres.diagnostics);
  out.flags = std::move(fitres.flags);
  if (keep_draws) out.draws = fitres.draws;

  ReplicateRecord& rec = out.record;
  rec.interim_week = snapshot.interim_week;
  rec.converged = out.diagnostics.converged;
  rec.theta_degenerate = fitres.draws.theta_degenerate;
  rec.ranking_gate_applied = outcome.ranking_gate_applied;
  rec.arms.resize(k_arms);
  for (int k = 0; k < k_arms; ++k) {
    ArmReplicateStats& a = rec.arms[k];
    a.unfavorable = snapshot.unfavorable[k];
    a.psi1 = ranking.psi1[k];
    a.psi2 = ranking.psi2[k];
    a.psi3 = ranking.psi3[k];
    a.final_decision = outcome.arms[k].final_decision;
    a.reason = outcome.arms[k].reason;
    a.lack_of_benefit =
        lack_of_benefit(snapshot.unfavorable[k], config.policy.max_unfavorable);
    if (k == 0) {
      a.theta_median = a.ci_low = a.ci_high = kNaN;
      a.p_mav = a.p_tv = kNaN;
    } else {
      a.theta_median = summaries[k - 1].median;
      a.ci_low = summaries[k - 1].ci_low;
      a.ci_high = summaries[k - 1].ci_high;
      a.p_mav = probs[k - 1].p_mav;
      a.p_tv = probs[k - 1].p_tv;
      a.tpp = tpp[k - 1];
    }
  }
  return out;
}

ReplicateRecord run_replicate(const ScenarioConfig& config,
                              int replicate_index) {
  const std::uint64_t rep_key =
      derive_stream(config.seed, static_cast<std::uint64_t>(replicate_index),
                    kReplicateTag);

  const TrialDataset dataset = simulate_trial(
      config.lmm, config.weibull, config.design, replicate_streams(rep_key));
  const InterimSnapshot snapshot =
      take_interim_snapshot(dataset, config.design);

  ReplicateRecord rec =
      decide_snapshot(config, snapshot, derive_stream(rep_key, kStreamSampler))
          .record;
  rec.replicate = replicate_index;
  return rec;
}

std::vector<ReplicateRecord> run_scenario_serial(const ScenarioConfig& config) {
  std::vector<ReplicateRecord> records(config.replicates);
  for (int r = 0; r < config.replicates; ++r)
    records[r] = run_replicate(config, r);
  return records;
}

std::vector<ReplicateRecord> run_scenario_parallel(const ScenarioConfig& config,
                                                   int workers) {
  if (workers <= 0) workers = omp_get_max_threads();
  std::vector<ReplicateRecord> records(config.replicates);
  bool failed = false;
  std::string error;
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int r = 0; r < config.replicates; ++r) {
    bool skip;
#pragma omp atomic read
    skip = failed;
    if (skip) continue;
    try {
      records[r] = run_replicate(config, r);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        error = e.what();
      }
    }
  }
  if (failed) throw std::runtime_error("replicate failed: " + error);
  return records;
}

std::vector<ReplicateRecord> run_scenario(const ScenarioConfig& config,
                                          int workers) {
  if (workers == 1) return run_scenario_serial(config);
  return run_scenario_parallel(config, workers);
}

std::string to_string(TruthClass c) {
  switch (c) {
    case TruthClass::kDesirable: return "desirable";
    case TruthClass::kMinimal: return "minimal";
    case TruthClass::kSuboptimal: return "suboptimal";
  }
  return "?";
}

double binomial_mcse(double p, int n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

namespace {

double sorted_mean(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sorted_median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  return quantile_type7(v, 0.5);
}

}  // namespace

OperatingCharacteristics aggregate(const ScenarioConfig& config,
                                   const std::vector<ReplicateRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  const int k_arms = config.design.n_arms;
  const int n = static_cast<int>(records.size());
  const auto truth = config.true_theta();
  const auto rates = config.true_rates();

  OperatingCharacteristics oc;
  oc.scenario_id = config.id;
  oc.ttp_setting = config.ttp.name;
  oc.rate_setting = config.rates.name;
  oc.n_per_arm = config.n_per_arm;
  oc.n_replicates = n;
  for (const auto& r : records) {
    if (r.converged) oc.n_converged += 1;
    if (r.theta_degenerate) oc.n_theta_degenerate += 1;
    if (static_cast<int>(r.arms.size()) != k_arms)
      throw std::invalid_argument("aggregate: record arm count mismatch");
  }

  oc.arms.resize(k_arms);
  for (int k = 0; k < k_arms; ++k) {
    ArmOperatingCharacteristics& a = oc.arms[k];
    a.arm = k;
    a.true_theta = truth[k];
    a.true_rate = rates[k];
    a.truth_class = rates[k] < config.control_rate  ? TruthClass::kDesirable
                    : rates[k] > config.control_rate ? TruthClass::kSuboptimal
                                                     : TruthClass::kMinimal;

    int c_go = 0, c_stop = 0, c_cont = 0;
    int c_tgo = 0, c_tnogo = 0, c_tcont = 0;
    int c_lob = 0;
    long long sum_unf = 0;
    std::vector<double> theta_medians, psi2s, psi3s;
    theta_medians.reserve(n);
    psi2s.reserve(n);
    psi3s.reserve(n);
    for (const auto& r : records) {
      const ArmReplicateStats& s = r.arms[k];
      if (s.lack_of_benefit) ++c_lob;
      sum_unf += s.unfavorable;
      psi2s.push_back(s.psi2);
      psi3s.push_back(s.psi3);
      if (k == 0) continue;
      theta_medians.push_back(s.theta_median);
      switch (s.final_decision) {
        case FinalDecision::kGo: ++c_go; break;
        case FinalDecision::kStop: ++c_stop; break;
        case FinalDecision::kContinue: ++c_cont; break;
      }
      switch (s.tpp) {
        case TppDecision::kGo: ++c_tgo; break;
        case TppDecision::kNoGo: ++c_tnogo; break;
        case TppDecision::kContinue: ++c_tcont; break;
      }
    }

    a.lob_flag_rate = static_cast<double>(c_lob) / n;
    a.lob_flag_mcse = binomial_mcse(a.lob_flag_rate, n);
    a.mean_unfavorable = static_cast<double>(sum_unf) / n;
    a.median_psi2 = sorted_median(psi2s);
    a.mean_psi2 = sorted_mean(psi2s);
    a.median_psi3 = sorted_median(psi3s);

    if (k == 0) {
      a.go_rate = a.continue_rate = a.stop_rate = kNaN;
      a.go_mcse = a.continue_mcse = a.stop_mcse = kNaN;
      a.tpp_go_rate = a.tpp_nogo_rate = a.tpp_continue_rate = kNaN;
      a.tpp_go_mcse = a.tpp_nogo_mcse = a.tpp_continue_mcse = kNaN;
      a.false_go_rate = a.false_no_go_rate = kNaN;
      a.mean_theta_median = kNaN;
      continue;
    }

    a.go_rate = static_cast<double>(c_go) / n;
    a.stop_rate = static_cast<double>(c_stop) / n;
    a.continue_rate = static_cast<double>(c_cont) / n;
    a.go_mcse = binomial_mcse(a.go_rate, n);
    a.stop_mcse = binomial_mcse(a.stop_rate, n);
    a.continue_mcse = binomial_mcse(a.continue_rate, n);
    a.tpp_go_rate = static_cast<double>(c_tgo) / n;
    a.tpp_nogo_rate = static_cast<double>(c_tnogo) / n;
    a.tpp_continue_rate = static_cast<double>(c_tcont) / n;
    a.tpp_go_mcse = binomial_mcse(a.tpp_go_rate, n);
    a.tpp_nogo_mcse = binomial_mcse(a.tpp_nogo_rate, n);
    a.tpp_continue_mcse = binomial_mcse(a.tpp_continue_rate, n);
    a.false_go_rate =
        a.truth_class == TruthClass::kSuboptimal ? a.go_rate : kNaN;
    a.false_no_go_rate =
        a.truth_class == TruthClass::kDesirable ? a.stop_rate : kNaN;
    a.mean_theta_median = sorted_mean(theta_medians);
  }

  // True ranking, ties to the lowest index.
  int best = 0;
  for (int k = 1; k < k_arms; ++k)
    if (truth[k] > truth[best]) best = k;
  int second = best == 0 ? 1 : 0;
  for (int k = 0; k < k_arms; ++k) {
    if (k == best) continue;
    if (truth[k] > truth[second]) second = k;
  }
  oc.true_best_arm = best;
  oc.true_second_arm = second;
  oc.median_psi2_true_best = oc.arms[best].median_psi2;
  oc.median_psi2_true_second = oc.arms[second].median_psi2;
  oc.ranking_separation =
      oc.median_psi2_true_best - oc.median_psi2_true_second;
  return oc;
}

}  // namespace mams
