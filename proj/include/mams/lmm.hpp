#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mams/dgm.hpp"

namespace mams {

// Priors chosen for full conjugacy: normal on fixed effects, inverse-gamma
// on the residual variance, inverse-Wishart on the 2x2 random-effects
// covariance (scale matrix = re_scale * I).
struct PriorSpec {
  std::vector<double> beta_mean = {0.0};  // broadcast when size 1
  std::vector<double> beta_sd = {10.0};   // broadcast when size 1
  double sigma_e_shape = 2.0;  // inverse-gamma shape on sigma_e^2
  double sigma_e_scale = 0.1;  // inverse-gamma scale on sigma_e^2
  double re_df = 4.0;          // inverse-Wishart degrees of freedom
  double re_scale = 0.01;      // inverse-Wishart scale matrix diagonal

  void validate() const;
  // Per-coefficient mean/SD for a model with n_coef fixed effects.
  std::vector<double> mean_for(int n_coef) const;
  std::vector<double> sd_for(int n_coef) const;
};

struct SamplerConfig {
  int n_chains = 4;
  int n_iterations = 2500;  // per chain, including warmup
  int n_warmup = 1000;
  int thinning = 1;
  std::uint64_t seed = 0;
  double rhat_threshold = 1.01;
  double min_ess = 400.0;
  // Fraction of draws with beta1 <= 0 above which theta is flagged degenerate.
  double max_beta1_nonpos_frac = 0.01;

  // Oracle/testing switches. Defaults run the full sampler.
  bool sample_random_effects = true;  // false: random effects held at 0
  bool censoring_enabled = true;      // false: censored rows treated as exact
  double fixed_sigma_e = 0.0;         // > 0: residual SD held fixed

  int retained_per_chain() const { return (n_iterations - n_warmup) / thinning; }
  void validate() const;
};

// Post-warmup draws pooled across chains, chain-major order.
struct PosteriorDraws {
  int n_arms = 0;
  int n_chains = 0;
  int per_chain = 0;
  std::vector<double> beta0, beta1, sigma_g1, sigma_g2, rho, sigma_e;
  std::vector<std::vector<double>> beta_arm;  // [novel arm][draw]
  std::vector<std::vector<double>> theta;     // percent; filled by derive_theta
  std::vector<int> chain;

  // Validity mask for theta: beta1 > 0. Filled by derive_theta.
  std::vector<std::uint8_t> theta_valid;
  int n_beta1_nonpos = 0;
  bool theta_degenerate = false;
  bool has_theta = false;

  int n_draws() const { return static_cast<int>(beta0.size()); }
};

struct ChainDiagnostics {
  std::vector<std::string> param_names;
  std::vector<double> rhat;
  std::vector<double> ess;
  bool converged = false;
};

struct DataFlags {
  bool empty_likelihood = false;
  bool thin_data = false;  // fewer than 2 patients with 2+ visits in some arm
  std::vector<std::uint8_t> arm_all_censored;
  // Smallest latent response imputed for a censored row across all sweeps;
  // must stay above log10(censor_limit_days).
  double min_imputed_latent = std::numeric_limits<double>::infinity();
};

struct FitResult {
  PosteriorDraws draws;
  ChainDiagnostics diagnostics;
  DataFlags flags;
};

// Gibbs sampler with truncated-normal data augmentation for censored rows.
// Each sweep cycles: latent censored responses, fixed effects, per-patient
// random effects, random-effects covariance, residual variance.
FitResult fit(const InterimSnapshot& snapshot, const PriorSpec& priors,
              const SamplerConfig& config);

// theta_k = 100 * beta_arm[k] / beta1, per draw. Draws with beta1 <= 0 are
// masked out of downstream summaries and counted.
void derive_theta(PosteriorDraws* draws, double max_nonpos_frac = 0.01);

struct ThetaSummary {
  double median;
  double ci_low;
  double ci_high;
};

// Per novel arm: median and equal-tailed (1-alpha) credible interval of
// theta, type-7 quantile interpolation, over draws with beta1 > 0.
std::vector<ThetaSummary> summarize(const PosteriorDraws& draws, double alpha);

// Split R-hat and bulk ESS (rank-normalized) per parameter.
ChainDiagnostics diagnose(const PosteriorDraws& draws,
                          const SamplerConfig& config);

}  // namespace mams
