#pragma once

#include <vector>

namespace mams {

// Convergence diagnostics on a set of equal-length chains for one scalar
// parameter, following the rank-normalized split formulation:
//
//   * chains are split in half,
//   * draws are replaced by normal scores of their pooled fractional ranks,
//     z = Phi^-1((rank - 3/8) / (S + 1/4)),
//   * R-hat = sqrt(var_plus / W) with W the mean within-chain variance,
//     B the between-chain variance of means, and
//     var_plus = (n-1)/n * W + B/n,
//   * ESS = m*n / tau with tau estimated from chain autocorrelations
//     combined across chains, truncated by Geyer's initial monotone
//     positive-pair rule.
//
// Returns NaN (R-hat) / 0 (ESS) when the draws are constant.

double split_rhat(const std::vector<std::vector<double>>& chains);

double bulk_ess(const std::vector<std::vector<double>>& chains);

// Rank-normalize a pooled sample in place across chains (helper, exposed
// for testing). Ties receive average ranks.
std::vector<std::vector<double>> rank_normalize(
    const std::vector<std::vector<double>>& chains);

}  // namespace mams
