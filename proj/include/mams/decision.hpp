#pragma once

#include <string>
#include <vector>

#include "mams/lmm.hpp"

namespace mams {

// Two-level target product profile on the relative slope change theta
// (percent): a target value with risk tau_tv and a minimum acceptable value
// with risk tau_mav.
struct TppSpec {
  double theta_mav = 0.0;
  double theta_tv = 20.0;
  double tau_mav = 0.025;
  double tau_tv = 0.025;

  void validate() const;
};

enum class TppDecision { kGo, kNoGo, kContinue };
enum class FinalDecision { kGo, kStop, kContinue };

enum class RankingMetricKind { kPsi1, kPsi2, kPsi3 };

struct DecisionPolicy {
  int max_unfavorable = 2;  // lack-of-benefit threshold M
  double ranking_cutoff = 0.5;
  RankingMetricKind ranking_metric = RankingMetricKind::kPsi3;

  void validate() const;
};

// Posterior ranking probabilities per arm (control included, theta_1 = 0):
//   psi1 = Pr(theta_k > theta_1), psi2 = Pr(theta_k is the maximum),
//   psi3 = Pr(theta_k is among the top two).
// Ties go to the lowest arm index, so the top1 counts partition the draws
// and the top2 counts cover each draw exactly twice.
struct RankingMetrics {
  int n_draws_used = 0;
  std::vector<int> beat_control_count;
  std::vector<int> top1_count;
  std::vector<int> top2_count;
  std::vector<double> psi1, psi2, psi3;
};

struct ArmProbabilities {
  double p_mav;  // Pr(theta_k >  theta_mav | data)
  double p_tv;   // Pr(theta_k >= theta_tv  | data)
};

enum class ReasonCode {
  kControl,
  kStopLackOfBenefit,
  kStopTppNoGo,
  kStopBoth,
  kContinueTpp,
  kContinueRanking,
  kGoRanked,
  kGoUncontested,  // ranking gate skipped: fewer than two arms reached it
};

std::string to_string(TppDecision d);
std::string to_string(FinalDecision d);
std::string to_string(ReasonCode r);
std::string to_string(RankingMetricKind m);

struct ArmDecision {
  int arm = 0;  // 0-based, 0 = control
  int unfavorable = 0;
  bool lack_of_benefit = false;
  TppDecision tpp = TppDecision::kContinue;
  FinalDecision final_decision = FinalDecision::kContinue;
  ReasonCode reason = ReasonCode::kControl;
};

struct DecisionOutcome {
  std::vector<ArmDecision> arms;  // size n_arms; arms[0] is the control
  bool ranking_gate_applied = false;
};

bool lack_of_benefit(int count, int threshold);

// NO-GO when p_tv <= tau_tv; GO when p_tv > tau_tv and p_mav > 1 - tau_mav;
// CONTINUE otherwise.
TppDecision tpp_decision(double p_mav, double p_tv, const TppSpec& spec);

// Monte Carlo estimates over draws with a positive control slope.
// Returns one entry per novel arm.
std::vector<ArmProbabilities> compute_probabilities(const PosteriorDraws& draws,
                                                    const TppSpec& spec);

RankingMetrics ranking_probs(const PosteriorDraws& draws);

// Sequential gates: lack of benefit, then the TPP, then (when at least two
// arms pass both) the ranking gate. counts has one entry per arm including
// the control; tpp and metric values cover novel arms in arm order.
DecisionOutcome sequential_decision(const std::vector<int>& counts,
                                    const std::vector<TppDecision>& tpp,
                                    const RankingMetrics& ranking,
                                    const DecisionPolicy& policy);

}  // namespace mams
