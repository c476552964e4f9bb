#include "mams/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mams/stats.hpp"

namespace mams {

namespace {

std::vector<std::vector<double>> split_halves(
    const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half == 0) continue;
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }
  return out;
}

// Plain split-free R-hat on already-split chains.
double rhat_of(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = chains[0].size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();

  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean(chains[j]);
    w += sample_variance(chains[j]);
  }
  w /= static_cast<double>(m);
  const double b = static_cast<double>(n) * sample_variance(means);
  if (!(w > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double var_plus =
      (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w +
      b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

// Autocovariance at a given lag, 1/n scaling.
double autocov(const std::vector<double>& x, double m, std::size_t lag) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i)
    s += (x[i] - m) * (x[i + lag] - m);
  return s / static_cast<double>(n);
}

double ess_of(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m == 0) return 0.0;
  const std::size_t n = chains[0].size();
  if (n < 4) return 0.0;

  std::vector<double> means(m);
  std::vector<double> c0(m);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean(chains[j]);
    c0[j] = autocov(chains[j], means[j], 0);
    w += c0[j] * static_cast<double>(n) / (static_cast<double>(n) - 1.0);
  }
  w /= static_cast<double>(m);
  double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w;
  if (m > 1)
    var_plus += sample_variance(means);
  if (!(var_plus > 0.0)) return 0.0;

  // rho_t = 1 - (W - mean_j c_{j,t}) / var_plus, combined across chains.
  auto rho_at = [&](std::size_t t) {
    double ct = 0.0;
    for (std::size_t j = 0; j < m; ++j) ct += autocov(chains[j], means[j], t);
    ct /= static_cast<double>(m);
    return 1.0 - (w - ct) / var_plus;
  };

  // Geyer initial monotone positive sequence over lag pairs.
  double tau = 1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t + 1 < n; t += 2) {
    double pair = rho_at(t) + rho_at(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  return static_cast<double>(m) * static_cast<double>(n) / tau;
}

}  // namespace

std::vector<std::vector<double>> rank_normalize(
    const std::vector<std::vector<double>>& chains) {
  std::size_t total = 0;
  for (const auto& c : chains) total += c.size();
  if (total == 0) return {};

  struct Entry {
    double value;
    std::size_t chain, idx;
  };
  std::vector<Entry> pooled;
  pooled.reserve(total);
  for (std::size_t j = 0; j < chains.size(); ++j)
    for (std::size_t i = 0; i < chains[j].size(); ++i)
      pooled.push_back({chains[j][i], j, i});
  std::sort(pooled.begin(), pooled.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });

  std::vector<std::vector<double>> out(chains.size());
  for (std::size_t j = 0; j < chains.size(); ++j)
    out[j].resize(chains[j].size());

  const double denom = static_cast<double>(total) + 0.25;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j + 1 < pooled.size() && pooled[j + 1].value == pooled[i].value) ++j;
    // average rank for the tie group, 1-based
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    const double z = normal_quantile((r - 0.375) / denom);
    for (std::size_t t = i; t <= j; ++t)
      out[pooled[t].chain][pooled[t].idx] = z;
    i = j + 1;
  }
  return out;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  auto halves = split_halves(chains);
  if (halves.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  // Constant input short-circuits: ranks are all ties -> zero variance.
  return rhat_of(rank_normalize(halves));
}

double bulk_ess(const std::vector<std::vector<double>>& chains) {
  auto halves = split_halves(chains);
  if (halves.empty()) return 0.0;
  return ess_of(rank_normalize(halves));
}

}  // namespace mams
