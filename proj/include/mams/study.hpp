#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mams/decision.hpp"
#include "mams/dgm.hpp"
#include "mams/lmm.hpp"

namespace mams {

// A named vector of true relative slope changes (percent, novel arms only).
struct TtpSetting {
  std::string name;
  std::vector<double> theta_pct;
};

// A named vector of true unfavorable-outcome rates (novel arms only).
struct RateSetting {
  std::string name;
  std::vector<double> rates;
};

// Built-in four-novel-arm settings; throws on unknown names.
TtpSetting builtin_ttp_setting(const std::string& name);
RateSetting builtin_rate_setting(const std::string& name);

// Raw study definition: the scenario grid is the Cartesian product of
// TTP settings x rate settings x per-arm sample sizes.
struct StudySpec {
  std::string name = "study";
  std::uint64_t seed = 1;
  int replicates = 1000;
  std::vector<int> n_per_arm_grid = {20, 30, 40};
  std::vector<TtpSetting> ttp_settings;
  std::vector<RateSetting> rate_settings;
  double control_rate = 0.05;
  double weibull_shape = 0.425;
  double frailty_sd = 0.0;
  LmmParams lmm;      // beta_arm resolved per scenario from the TTP setting
  DesignSpec design;  // n_per_arm overridden per scenario
  PriorSpec priors;
  TppSpec tpp;
  DecisionPolicy policy;
  SamplerConfig sampler;
  double ci_alpha = 0.05;
  int workers = 0;  // 0 = all hardware threads

  void validate() const;
};

// Fully resolved scenario: everything needed to run replicates.
struct ScenarioConfig {
  std::string id;
  TtpSetting ttp;
  RateSetting rates;
  double control_rate = 0.05;
  int n_per_arm = 30;
  int replicates = 1000;
  std::uint64_t seed = 0;  // scenario stream key, derived from the study seed
  LmmParams lmm;           // beta_arm[k] = theta_k/100 * beta1
  DesignSpec design;
  WeibullSpec weibull;  // calibrated per-arm intercepts
  PriorSpec priors;
  TppSpec tpp;
  DecisionPolicy policy;
  SamplerConfig sampler;
  double ci_alpha = 0.05;

  std::vector<double> true_theta() const;  // per arm incl. control (0)
  std::vector<double> true_rates() const;  // per arm incl. control
};

std::vector<ScenarioConfig> expand_grid(const StudySpec& spec);

// Per-arm results of one replicate. Control carries only counts and
// ranking metrics; theta fields are NaN there.
struct ArmReplicateStats {
  int unfavorable = 0;
  double theta_median = 0, ci_low = 0, ci_high = 0;
  double p_mav = 0, p_tv = 0;
  double psi1 = 0, psi2 = 0, psi3 = 0;
  TppDecision tpp = TppDecision::kContinue;
  FinalDecision final_decision = FinalDecision::kContinue;
  ReasonCode reason = ReasonCode::kControl;
  bool lack_of_benefit = false;
};

struct ReplicateRecord {
  int replicate = 0;
  int interim_week = 0;
  bool converged = false;
  bool theta_degenerate = false;
  bool ranking_gate_applied = false;
  std::vector<ArmReplicateStats> arms;
};

struct SnapshotDecision {
  ReplicateRecord record;
  ChainDiagnostics diagnostics;
  DataFlags flags;
  PosteriorDraws draws;  // populated only when keep_draws is set
};

// Fits the model on a snapshot and applies the decision framework.
SnapshotDecision decide_snapshot(const ScenarioConfig& config,
                                 const InterimSnapshot& snapshot,
                                 std::uint64_t sampler_seed,
                                 bool keep_draws = false);

// One full pipeline pass: simulate, snapshot, fit, decide. Deterministic in
// (config, replicate_index); independent of worker count and run order.
ReplicateRecord run_replicate(const ScenarioConfig& config, int replicate_index);

// Reference single-threaded loop, kept for equivalence testing and as the
// benchmark baseline.
std::vector<ReplicateRecord> run_scenario_serial(const ScenarioConfig& config);

// OpenMP loop over replicates. Must produce results bit-identical to the
// serial reference for every worker count.
std::vector<ReplicateRecord> run_scenario_parallel(const ScenarioConfig& config,
                                                   int workers);

std::vector<ReplicateRecord> run_scenario(const ScenarioConfig& config,
                                          int workers);

enum class TruthClass { kDesirable, kMinimal, kSuboptimal };
std::string to_string(TruthClass c);

struct ArmOperatingCharacteristics {
  int arm = 0;  // 0-based
  double true_theta = 0;
  double true_rate = 0;
  TruthClass truth_class = TruthClass::kMinimal;
  // final decision proportions (NaN for the control arm)
  double go_rate = 0, continue_rate = 0, stop_rate = 0;
  double go_mcse = 0, continue_mcse = 0, stop_mcse = 0;
  // TPP component proportions
  double tpp_go_rate = 0, tpp_nogo_rate = 0, tpp_continue_rate = 0;
  double tpp_go_mcse = 0, tpp_nogo_mcse = 0, tpp_continue_mcse = 0;
  // lack-of-benefit flag rate (computed for every arm incl. control)
  double lob_flag_rate = 0, lob_flag_mcse = 0;
  // error rates conditioned on the arm's truth class; NaN when undefined
  double false_go_rate = 0;
  double false_no_go_rate = 0;
  double mean_theta_median = 0;  // NaN for control
  double mean_unfavorable = 0;
  double median_psi2 = 0, mean_psi2 = 0, median_psi3 = 0;
};

struct OperatingCharacteristics {
  std::string scenario_id, ttp_setting, rate_setting;
  int n_per_arm = 0;
  int n_replicates = 0;
  int n_converged = 0;
  int n_theta_degenerate = 0;
  std::vector<ArmOperatingCharacteristics> arms;
  int true_best_arm = 0;    // by true theta, ties to lowest index
  int true_second_arm = 0;
  double median_psi2_true_best = 0;
  double median_psi2_true_second = 0;
  double ranking_separation = 0;  // difference of the two medians
};

// Order-invariant fold over replicate records: proportions come from
// integer counts and means/medians are computed over sorted copies, so any
// permutation of records yields bit-identical output.
OperatingCharacteristics aggregate(const ScenarioConfig& config,
                                   const std::vector<ReplicateRecord>& records);

double binomial_mcse(double p, int n);

}  // namespace mams
