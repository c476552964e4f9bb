#include "mams/decision.hpp"

#include <stdexcept>

namespace mams {

void TppSpec::validate() const {
  if (!(theta_tv >= theta_mav))
    throw std::invalid_argument("tpp.theta_tv: must be >= theta_mav");
  if (!(tau_mav > 0.0 && tau_mav < 1.0))
    throw std::invalid_argument("tpp.tau_mav: must be in (0,1)");
  if (!(tau_tv > 0.0 && tau_tv < 1.0))
    throw std::invalid_argument("tpp.tau_tv: must be in (0,1)");
}

void DecisionPolicy::validate() const {
  if (max_unfavorable < 1)
    throw std::invalid_argument("policy.max_unfavorable: must be >= 1");
  if (!(ranking_cutoff > 0.0 && ranking_cutoff < 1.0))
    throw std::invalid_argument("policy.ranking_cutoff: must be in (0,1)");
}

std::string to_string(TppDecision d) {
  switch (d) {
    case TppDecision::kGo: return "GO";
    case TppDecision::kNoGo: return "NO-GO";
    case TppDecision::kContinue: return "CONTINUE";
  }
  return "?";
}

std::string to_string(FinalDecision d) {
  switch (d) {
    case FinalDecision::kGo: return "GO";
    case FinalDecision::kStop: return "STOP";
    case FinalDecision::kContinue: return "CONTINUE";
  }
  return "?";
}

std::string to_string(ReasonCode r) {
  switch (r) {
    case ReasonCode::kControl: return "control";
    case ReasonCode::kStopLackOfBenefit: return "stop_lack_of_benefit";
    case ReasonCode::kStopTppNoGo: return "stop_tpp_nogo";
    case ReasonCode::kStopBoth: return "stop_lack_of_benefit+tpp_nogo";
    case ReasonCode::kContinueTpp: return "continue_tpp";
    case ReasonCode::kContinueRanking: return "continue_ranking";
    case ReasonCode::kGoRanked: return "go_ranked";
    case ReasonCode::kGoUncontested: return "go_uncontested";
  }
  return "?";
}

std::string to_string(RankingMetricKind m) {
  switch (m) {
    case RankingMetricKind::kPsi1: return "psi1";
    case RankingMetricKind::kPsi2: return "psi2";
    case RankingMetricKind::kPsi3: return "psi3";
  }
  return "?";
}

bool lack_of_benefit(int count, int threshold) {
  if (count < 0) throw std::invalid_argument("lack_of_benefit: count < 0");
  if (threshold < 1)
    throw std::invalid_argument("lack_of_benefit: threshold < 1");
  return count >= threshold;
}

TppDecision tpp_decision(double p_mav, double p_tv, const TppSpec& spec) {
  spec.validate();
  if (!(p_mav >= 0.0 && p_mav <= 1.0 && p_tv >= 0.0 && p_tv <= 1.0))
    throw std::invalid_argument("tpp_decision: probabilities must be in [0,1]");
  if (p_tv <= spec.tau_tv) return TppDecision::kNoGo;
  if (p_mav > 1.0 - spec.tau_mav) return TppDecision::kGo;
  return TppDecision::kContinue;
}

namespace {

// Draws usable for decision metrics: theta derived and control slope > 0.
std::vector<int> valid_draw_indices(const PosteriorDraws& draws) {
  if (!draws.has_theta)
    throw std::invalid_argument("decision: call derive_theta first");
  std::vector<int> idx;
  idx.reserve(draws.n_draws());
  for (int i = 0; i < draws.n_draws(); ++i)
    if (draws.theta_valid[i]) idx.push_back(i);
  if (idx.empty())
    throw std::runtime_error("decision: no draws with positive control slope");
  return idx;
}

}  // namespace

std::vector<ArmProbabilities> compute_probabilities(const PosteriorDraws& draws,
                                                    const TppSpec& spec) {
  spec.validate();
  const auto idx = valid_draw_indices(draws);
  const double n = static_cast<double>(idx.size());
  const int novel = draws.n_arms - 1;
  std::vector<ArmProbabilities> out(novel);
  for (int k = 0; k < novel; ++k) {
    int c_mav = 0, c_tv = 0;
    for (int i : idx) {
      const double th = draws.theta[k][i];
      if (th > spec.theta_mav) ++c_mav;
      if (th >= spec.theta_tv) ++c_tv;
    }
    out[k].p_mav = c_mav / n;
    out[k].p_tv = c_tv / n;
  }
  return out;
}

RankingMetrics ranking_probs(const PosteriorDraws& draws) {
  const auto idx = valid_draw_indices(draws);
  const int k_arms = draws.n_arms;
  RankingMetrics m;
  m.n_draws_used = static_cast<int>(idx.size());
  m.beat_control_count.assign(k_arms, 0);
  m.top1_count.assign(k_arms, 0);
  m.top2_count.assign(k_arms, 0);

  std::vector<double> v(k_arms);
  for (int i : idx) {
    v[0] = 0.0;  // control
    for (int k = 1; k < k_arms; ++k) v[k] = draws.theta[k - 1][i];

    int best = 0;
    for (int k = 1; k < k_arms; ++k)
      if (v[k] > v[best]) best = k;
    int second = best == 0 ? 1 : 0;
    for (int k = 0; k < k_arms; ++k) {
      if (k == best) continue;
      if (v[k] > v[second]) second = k;
    }
    m.top1_count[best] += 1;
    m.top2_count[best] += 1;
    m.top2_count[second] += 1;
    for (int k = 1; k < k_arms; ++k)
      if (v[k] > 0.0) m.beat_control_count[k] += 1;
  }

  const double n = static_cast<double>(m.n_draws_used);
  m.psi1.resize(k_arms);
  m.psi2.resize(k_arms);
  m.psi3.resize(k_arms);
  for (int k = 0; k < k_arms; ++k) {
    m.psi1[k] = m.beat_control_count[k] / n;
    m.psi2[k] = m.top1_count[k] / n;
    m.psi3[k] = m.top2_count[k] / n;
  }
  return m;
}

DecisionOutcome sequential_decision(const std::vector<int>& counts,
                                    const std::vector<TppDecision>& tpp,
                                    const RankingMetrics& ranking,
                                    const DecisionPolicy& policy) {
  policy.validate();
  const int k_arms = static_cast<int>(counts.size());
  if (static_cast<int>(tpp.size()) != k_arms - 1 ||
      static_cast<int>(ranking.psi3.size()) != k_arms)
    throw std::invalid_argument("sequential_decision: inconsistent arm sets");

  DecisionOutcome out;
  out.arms.resize(k_arms);

  int gate_survivors = 0;
  for (int k = 1; k < k_arms; ++k) {
    if (!lack_of_benefit(counts[k], policy.max_unfavorable) &&
        tpp[k - 1] == TppDecision::kGo)
      ++gate_survivors;
  }
  out.ranking_gate_applied = gate_survivors >= 2;

  const std::vector<double>& metric =
      policy.ranking_metric == RankingMetricKind::kPsi1   ? ranking.psi1
      : policy.ranking_metric == RankingMetricKind::kPsi2 ? ranking.psi2
                                                          : ranking.psi3;

  for (int k = 0; k < k_arms; ++k) {
    ArmDecision& a = out.arms[k];
    a.arm = k;
    a.unfavorable = counts[k];
    if (k == 0) {
      a.reason = ReasonCode::kControl;
      a.final_decision = FinalDecision::kContinue;
      continue;
    }
    a.lack_of_benefit = lack_of_benefit(counts[k], policy.max_unfavorable);
    a.tpp = tpp[k - 1];

    if (a.lack_of_benefit || a.tpp == TppDecision::kNoGo) {
      a.final_decision = FinalDecision::kStop;
      a.reason = a.lack_of_benefit && a.tpp == TppDecision::kNoGo
                     ? ReasonCode::kStopBoth
                 : a.lack_of_benefit ? ReasonCode::kStopLackOfBenefit
                                     : ReasonCode::kStopTppNoGo;
    } else if (a.tpp == TppDecision::kContinue) {
      a.final_decision = FinalDecision::kContinue;
      a.reason = ReasonCode::kContinueTpp;
    } else if (!out.ranking_gate_applied) {
      a.final_decision = FinalDecision::kGo;
      a.reason = ReasonCode::kGoUncontested;
    } else if (metric[k] > policy.ranking_cutoff) {
      a.final_decision = FinalDecision::kGo;
      a.reason = ReasonCode::kGoRanked;
    } else {
      a.final_decision = FinalDecision::kContinue;
      a.reason = ReasonCode::kContinueRanking;
    }
  }
  return out;
}

}  // namespace mams
