#include "mams/lmm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mams/diagnostics.hpp"
#include "mams/stats.hpp"

namespace mams {

void PriorSpec::validate() const {
  if (beta_mean.empty() || beta_sd.empty())
    throw std::invalid_argument("priors.beta: mean/sd must be non-empty");
  for (double s : beta_sd)
    if (!(s > 0.0)) throw std::invalid_argument("priors.beta_sd: must be > 0");
  if (!(sigma_e_shape > 0.0) || !(sigma_e_scale > 0.0))
    throw std::invalid_argument("priors.sigma_e: shape/scale must be > 0");
  if (!(re_df > 1.0))
    throw std::invalid_argument("priors.re_df: must exceed dimension - 1");
  if (!(re_scale > 0.0))
    throw std::invalid_argument("priors.re_scale: must be > 0");
}

std::vector<double> PriorSpec::mean_for(int n_coef) const {
  if (static_cast<int>(beta_mean.size()) == n_coef) return beta_mean;
  if (beta_mean.size() == 1)
    return std::vector<double>(n_coef, beta_mean[0]);
  throw std::invalid_argument("priors.beta_mean: size mismatch");
}

std::vector<double> PriorSpec::sd_for(int n_coef) const {
  if (static_cast<int>(beta_sd.size()) == n_coef) return beta_sd;
  if (beta_sd.size() == 1) return std::vector<double>(n_coef, beta_sd[0]);
  throw std::invalid_argument("priors.beta_sd: size mismatch");
}

void SamplerConfig::validate() const {
  if (n_chains < 1) throw std::invalid_argument("sampler.n_chains: must be >= 1");
  if (n_warmup < 0 || n_warmup >= n_iterations)
    throw std::invalid_argument("sampler.n_warmup: must be in [0, n_iterations)");
  if (thinning < 1) throw std::invalid_argument("sampler.thinning: must be >= 1");
  if ((n_iterations - n_warmup) % thinning != 0)
    throw std::invalid_argument(
        "sampler.thinning: must divide n_iterations - n_warmup");
  if (!(rhat_threshold > 1.0))
    throw std::invalid_argument("sampler.rhat_threshold: must be > 1");
  if (!(min_ess >= 0.0)) throw std::invalid_argument("sampler.min_ess: must be >= 0");
  if (fixed_sigma_e < 0.0)
    throw std::invalid_argument("sampler.fixed_sigma_e: must be >= 0");
  if (!(max_beta1_nonpos_frac >= 0.0 && max_beta1_nonpos_frac <= 1.0))
    throw std::invalid_argument("sampler.max_beta1_nonpos_frac: must be in [0,1]");
}

namespace {

// Flattened likelihood data for one snapshot.
struct FitData {
  int n_arms = 0;
  int n_coef = 0;  // 1 + 1 + (n_arms - 1)
  int n_pat = 0;
  int n_rows = 0;
  double limit = 0.0;  // log10 censor limit

  // row-major arrays
  std::vector<int> row_pat;
  std::vector<int> row_arm;
  std::vector<double> row_t;
  std::vector<double> row_y0;  // observed response (limit where censored)
  std::vector<std::uint8_t> row_cens;

  std::vector<int> pat_begin;  // row range per patient (+1 sentinel)
  std::vector<int> pat_arm;
  // per-patient Z'Z entries: sum 1, sum t, sum t^2
  std::vector<double> zz_n, zz_t, zz_tt;

  Eigen::MatrixXd xtx;
  int n_censored = 0;
};

FitData build_data(const InterimSnapshot& snap) {
  FitData d;
  d.n_arms = snap.n_arms;
  d.n_coef = snap.n_arms + 1;
  d.n_pat = static_cast<int>(snap.visits.size());
  d.limit = std::log10(snap.censor_limit_days);
  d.xtx = Eigen::MatrixXd::Zero(d.n_coef, d.n_coef);

  d.pat_begin.reserve(d.n_pat + 1);
  for (int i = 0; i < d.n_pat; ++i) {
    d.pat_begin.push_back(d.n_rows);
    d.pat_arm.push_back(snap.arm_of[i]);
    double zn = 0.0, zt = 0.0, ztt = 0.0;
    for (const Visit& v : snap.visits[i]) {
      const double t = static_cast<double>(v.week);
      d.row_pat.push_back(i);
      d.row_arm.push_back(snap.arm_of[i]);
      d.row_t.push_back(t);
      d.row_y0.push_back(v.log10_ttp);
      d.row_cens.push_back(v.censored ? 1 : 0);
      if (v.censored) d.n_censored += 1;
      zn += 1.0;
      zt += t;
      ztt += t * t;

      const int a = snap.arm_of[i];
      d.xtx(0, 0) += 1.0;
      d.xtx(0, 1) += t;
      d.xtx(1, 1) += t * t;
      if (a > 0) {
        d.xtx(0, 1 + a) += t;
        d.xtx(1, 1 + a) += t * t;
        d.xtx(1 + a, 1 + a) += t * t;
      }
      d.n_rows += 1;
    }
    d.zz_n.push_back(zn);
    d.zz_t.push_back(zt);
    d.zz_tt.push_back(ztt);
  }
  d.pat_begin.push_back(d.n_rows);
  d.xtx = d.xtx.selfadjointView<Eigen::Upper>();
  return d;
}

// One retained draw of model parameters.
struct ParamDraw {
  Eigen::VectorXd beta;
  double g11, g22, g12;
  double sigma_e;
};

// 2x2 inverse-Wishart draw via Bartlett decomposition of the Wishart.
void draw_inverse_wishart_2x2(double df, const Eigen::Matrix2d& scale,
                              RngStream& rng, Eigen::Matrix2d* out) {
  const Eigen::Matrix2d v = scale.inverse();
  const Eigen::LLT<Eigen::Matrix2d> llt(v);
  const Eigen::Matrix2d lv = llt.matrixL();
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
  a(0, 0) = std::sqrt(rng.chisq(df));
  a(1, 1) = std::sqrt(rng.chisq(df - 1.0));
  a(1, 0) = rng.normal();
  const Eigen::Matrix2d l = lv * a;
  const Eigen::Matrix2d w = l * l.transpose();
  const double det = w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0);
  (*out)(0, 0) = w(1, 1) / det;
  (*out)(1, 1) = w(0, 0) / det;
  (*out)(0, 1) = -w(0, 1) / det;
  (*out)(1, 0) = -w(1, 0) / det;
}

struct ChainOutput {
  std::vector<ParamDraw> draws;
  double min_latent = std::numeric_limits<double>::infinity();
};

ChainOutput run_chain(const FitData& d, const PriorSpec& priors,
                      const SamplerConfig& cfg, std::uint64_t stream_key) {
  RngStream rng(stream_key);
  const int p = d.n_coef;
  const auto m0v = priors.mean_for(p);
  const auto s0v = priors.sd_for(p);
  Eigen::VectorXd prior_prec(p), prior_prec_mean(p);
  for (int j = 0; j < p; ++j) {
    prior_prec(j) = 1.0 / (s0v[j] * s0v[j]);
    prior_prec_mean(j) = m0v[j] * prior_prec(j);
  }

  const bool use_re = cfg.sample_random_effects;
  const bool fixed_se = cfg.fixed_sigma_e > 0.0;
  const bool augment = cfg.censoring_enabled && d.n_censored > 0;

  // --- deterministic initial state ---
  std::vector<double> y(d.row_y0.begin(), d.row_y0.end());
  double var_y = 1.0;
  if (d.n_rows >= 2) {
    double vv = sample_variance(y);
    if (vv > 1e-12) var_y = vv;
  }
  double sigma_e = fixed_se ? cfg.fixed_sigma_e : std::sqrt(var_y);
  double se2 = sigma_e * sigma_e;

  Eigen::VectorXd beta(p);
  {
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
    for (int r = 0; r < d.n_rows; ++r) {
      const double t = d.row_t[r];
      xty(0) += y[r];
      xty(1) += t * y[r];
      if (d.row_arm[r] > 0) xty(1 + d.row_arm[r]) += t * y[r];
    }
    Eigen::MatrixXd a = d.xtx / se2;
    a.diagonal() += prior_prec;
    beta = Eigen::LLT<Eigen::MatrixXd>(a).solve(prior_prec_mean + xty / se2);
  }

  std::vector<double> u0(d.n_pat, 0.0), u1(d.n_pat, 0.0);
  Eigen::Matrix2d g = Eigen::Matrix2d::Identity();
  const double g_init = priors.re_scale / std::max(priors.re_df - 3.0, 1.0);
  g *= g_init;
  const Eigen::Matrix2d s0_re = priors.re_scale * Eigen::Matrix2d::Identity();

  ChainOutput out;
  out.draws.reserve(cfg.retained_per_chain());

  const double ig_shape0 = priors.sigma_e_shape;
  const double ig_scale0 = priors.sigma_e_scale;

  Eigen::VectorXd v(p), z(p);
  std::vector<double> xb(d.n_rows, 0.0);

  for (int sweep = 0; sweep < cfg.n_iterations; ++sweep) {
    // linear predictor X*beta per row (fixed part)
    for (int r = 0; r < d.n_rows; ++r) {
      const double t = d.row_t[r];
      double f = beta(0) + beta(1) * t;
      if (d.row_arm[r] > 0) f += beta(1 + d.row_arm[r]) * t;
      xb[r] = f;
    }

    // (1) latent responses for censored rows, truncated above the limit
    if (augment) {
      for (int r = 0; r < d.n_rows; ++r) {
        if (!d.row_cens[r]) continue;
        const int i = d.row_pat[r];
        const double mu = xb[r] + u0[i] + u1[i] * d.row_t[r];
        const double lat = rng.truncated_normal_lower(mu, sigma_e, d.limit);
        y[r] = lat;
        out.min_latent = std::min(out.min_latent, lat);
      }
    }

    // (2) fixed effects. With random effects active this is the collapsed
    // conditional p(beta | y, G, se2) with u integrated out: per patient,
    // y_i ~ N(X_i beta, V_i), V_i = se2 I + Z_i G Z_i'. By Woodbury,
    //   Z'V^-1 Z = ZtZ/se2 - (ZtZ/se2) W (ZtZ/se2),  W = (G^-1 + ZtZ/se2)^-1
    // and X_i = Z_i C_i with C_i picking the intercept, slope and arm-slope
    // columns, so everything reduces to 2x2 blocks. Drawing u | beta right
    // after makes the pair a joint draw of (beta, u), which mixes far better
    // than alternating the two conditionals.
    if (use_re) {
      const double gdet = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
      const double gi00 = g(1, 1) / gdet;
      const double gi11 = g(0, 0) / gdet;
      const double gi01 = -g(0, 1) / gdet;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
      v.setZero();
      for (int i = 0; i < d.n_pat; ++i) {
        double sy = 0.0, sty = 0.0;
        for (int r = d.pat_begin[i]; r < d.pat_begin[i + 1]; ++r) {
          sy += y[r];
          sty += d.row_t[r] * y[r];
        }
        const double j00 = d.zz_n[i] / se2;   // ZtZ / se2
        const double j01 = d.zz_t[i] / se2;
        const double j11 = d.zz_tt[i] / se2;
        const double p00 = gi00 + j00, p01 = gi01 + j01, p11 = gi11 + j11;
        const double pdet = p00 * p11 - p01 * p01;
        const double w00 = p11 / pdet, w11 = p00 / pdet, w01 = -p01 / pdet;
        // K = J - J W J
        const double jw00 = j00 * w00 + j01 * w01;
        const double jw01 = j00 * w01 + j01 * w11;
        const double jw10 = j01 * w00 + j11 * w01;
        const double jw11 = j01 * w01 + j11 * w11;
        const double k00 = j00 - (jw00 * j00 + jw01 * j01);
        const double k01 = j01 - (jw00 * j01 + jw01 * j11);
        const double k11 = j11 - (jw10 * j01 + jw11 * j11);
        // q = (I - J W) Z'y / se2
        const double zy0 = sy / se2, zy1 = sty / se2;
        const double q0 = zy0 - (jw00 * zy0 + jw01 * zy1);
        const double q1 = zy1 - (jw10 * zy0 + jw11 * zy1);

        const int arm = d.pat_arm[i];
        a(0, 0) += k00;
        a(0, 1) += k01;
        a(1, 1) += k11;
        v(0) += q0;
        v(1) += q1;
        if (arm > 0) {
          a(0, 1 + arm) += k01;
          a(1, 1 + arm) += k11;
          a(1 + arm, 1 + arm) += k11;
          v(1 + arm) += q1;
        }
      }
      a = a.selfadjointView<Eigen::Upper>();
      a.diagonal() += prior_prec;
      const Eigen::LLT<Eigen::MatrixXd> llt(a);
      const Eigen::VectorXd mean = llt.solve(prior_prec_mean + v);
      for (int j = 0; j < p; ++j) z(j) = rng.normal();
      beta = mean + llt.matrixU().solve(z);
    } else {
      v.setZero();
      for (int r = 0; r < d.n_rows; ++r) {
        const double t = d.row_t[r];
        v(0) += y[r];
        v(1) += t * y[r];
        if (d.row_arm[r] > 0) v(1 + d.row_arm[r]) += t * y[r];
      }
      Eigen::MatrixXd a = d.xtx / se2;
      a.diagonal() += prior_prec;
      const Eigen::LLT<Eigen::MatrixXd> llt(a);
      const Eigen::VectorXd mean = llt.solve(prior_prec_mean + v / se2);
      for (int j = 0; j < p; ++j) z(j) = rng.normal();
      beta = mean + llt.matrixU().solve(z);
    }
    for (int r = 0; r < d.n_rows; ++r) {
      const double t = d.row_t[r];
      double f = beta(0) + beta(1) * t;
      if (d.row_arm[r] > 0) f += beta(1 + d.row_arm[r]) * t;
      xb[r] = f;
    }

    double ssr = 0.0;

    // (3) per-patient random effects; SSR accumulated with the fresh values
    if (use_re) {
      const double gdet = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
      const double gi00 = g(1, 1) / gdet;
      const double gi11 = g(0, 0) / gdet;
      const double gi01 = -g(0, 1) / gdet;
      double suu00 = 0.0, suu11 = 0.0, suu01 = 0.0;

      for (int i = 0; i < d.n_pat; ++i) {
        double s0 = 0.0, s1 = 0.0;
        for (int r = d.pat_begin[i]; r < d.pat_begin[i + 1]; ++r) {
          const double resid = y[r] - xb[r];
          s0 += resid;
          s1 += d.row_t[r] * resid;
        }
        // precision = G^-1 + Z'Z / se2
        const double p00 = gi00 + d.zz_n[i] / se2;
        const double p01 = gi01 + d.zz_t[i] / se2;
        const double p11 = gi11 + d.zz_tt[i] / se2;
        // 2x2 Cholesky of the precision
        const double l00 = std::sqrt(p00);
        const double l10 = p01 / l00;
        const double l11 = std::sqrt(p11 - l10 * l10);
        // mean = P^-1 * (s / se2)
        const double b0 = s0 / se2, b1 = s1 / se2;
        const double pdet = p00 * p11 - p01 * p01;
        const double m0 = (p11 * b0 - p01 * b1) / pdet;
        const double m1 = (p00 * b1 - p01 * b0) / pdet;
        // draw: mean + L^-T z
        const double z1 = rng.normal(), z2 = rng.normal();
        const double w1 = z2 / l11;
        const double w0 = (z1 - l10 * w1) / l00;
        u0[i] = m0 + w0;
        u1[i] = m1 + w1;

        suu00 += u0[i] * u0[i];
        suu11 += u1[i] * u1[i];
        suu01 += u0[i] * u1[i];
        for (int r = d.pat_begin[i]; r < d.pat_begin[i + 1]; ++r) {
          const double e = y[r] - xb[r] - u0[i] - u1[i] * d.row_t[r];
          ssr += e * e;
        }
      }

      // (4) random-effects covariance from the inverse-Wishart
      Eigen::Matrix2d scale = s0_re;
      scale(0, 0) += suu00;
      scale(1, 1) += suu11;
      scale(0, 1) += suu01;
      scale(1, 0) += suu01;
      draw_inverse_wishart_2x2(priors.re_df + d.n_pat, scale, rng, &g);
    } else {
      for (int r = 0; r < d.n_rows; ++r) {
        const double e = y[r] - xb[r];
        ssr += e * e;
      }
    }

    // (5) residual variance from the inverse-gamma
    if (!fixed_se) {
      const double shape = ig_shape0 + 0.5 * d.n_rows;
      const double scale = ig_scale0 + 0.5 * ssr;
      se2 = scale / rng.gamma(shape);
      sigma_e = std::sqrt(se2);
    }

    if (sweep >= cfg.n_warmup &&
        (sweep - cfg.n_warmup) % cfg.thinning == 0) {
      ParamDraw dr;
      dr.beta = beta;
      if (use_re) {
        dr.g11 = g(0, 0);
        dr.g22 = g(1, 1);
        dr.g12 = g(0, 1);
      } else {
        dr.g11 = dr.g22 = dr.g12 = 0.0;
      }
      dr.sigma_e = sigma_e;
      out.draws.push_back(std::move(dr));
    }
  }
  return out;
}

}  // namespace

FitResult fit(const InterimSnapshot& snapshot, const PriorSpec& priors,
              const SamplerConfig& config) {
  priors.validate();
  config.validate();
  if (snapshot.n_arms < 2)
    throw std::invalid_argument("fit: snapshot must cover >= 2 arms");

  const FitData data = build_data(snapshot);

  FitResult res;
  res.flags.empty_likelihood = (data.n_rows == 0);
  res.flags.arm_all_censored.assign(snapshot.n_arms, 1);
  {
    std::vector<int> pats_with_2_visits(snapshot.n_arms, 0);
    for (int i = 0; i < data.n_pat; ++i) {
      const int rows = data.pat_begin[i + 1] - data.pat_begin[i];
      if (rows >= 2) pats_with_2_visits[data.pat_arm[i]] += 1;
    }
    for (int r = 0; r < data.n_rows; ++r)
      if (!data.row_cens[r]) res.flags.arm_all_censored[data.row_arm[r]] = 0;
    for (int k = 0; k < snapshot.n_arms; ++k) {
      if (snapshot.enrolled[k] > 0 && pats_with_2_visits[k] < 2)
        res.flags.thin_data = true;
    }
    // arms with no visible rows are not "all censored"
    std::vector<std::uint8_t> seen(snapshot.n_arms, 0);
    for (int r = 0; r < data.n_rows; ++r) seen[data.row_arm[r]] = 1;
    for (int k = 0; k < snapshot.n_arms; ++k)
      if (!seen[k]) res.flags.arm_all_censored[k] = 0;
  }

  std::vector<ChainOutput> chains(config.n_chains);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < config.n_chains; ++c) {
    chains[c] = run_chain(data, priors, config,
                          derive_stream(config.seed, kStreamChainBase + c));
  }

  PosteriorDraws& draws = res.draws;
  draws.n_arms = snapshot.n_arms;
  draws.n_chains = config.n_chains;
  draws.per_chain = config.retained_per_chain();
  const int total = draws.n_chains * draws.per_chain;
  draws.beta0.reserve(total);
  draws.beta_arm.assign(snapshot.n_arms - 1, {});
  for (int c = 0; c < config.n_chains; ++c) {
    res.flags.min_imputed_latent =
        std::min(res.flags.min_imputed_latent, chains[c].min_latent);
    for (const ParamDraw& dr : chains[c].draws) {
      draws.beta0.push_back(dr.beta(0));
      draws.beta1.push_back(dr.beta(1));
      for (int k = 0; k < snapshot.n_arms - 1; ++k)
        draws.beta_arm[k].push_back(dr.beta(2 + k));
      const double sg1 = std::sqrt(std::max(dr.g11, 0.0));
      const double sg2 = std::sqrt(std::max(dr.g22, 0.0));
      draws.sigma_g1.push_back(sg1);
      draws.sigma_g2.push_back(sg2);
      draws.rho.push_back(sg1 > 0.0 && sg2 > 0.0 ? dr.g12 / (sg1 * sg2) : 0.0);
      draws.sigma_e.push_back(dr.sigma_e);
      draws.chain.push_back(c);
    }
  }

  res.diagnostics = diagnose(draws, config);
  return res;
}

void derive_theta(PosteriorDraws* draws, double max_nonpos_frac) {
  const int n = draws->n_draws();
  const int novel = draws->n_arms - 1;
  draws->theta.assign(novel, std::vector<double>(n));
  draws->theta_valid.assign(n, 1);
  draws->n_beta1_nonpos = 0;
  for (int i = 0; i < n; ++i) {
    const double b1 = draws->beta1[i];
    if (!(b1 > 0.0)) {
      draws->theta_valid[i] = 0;
      draws->n_beta1_nonpos += 1;
    }
    for (int k = 0; k < novel; ++k)
      draws->theta[k][i] = 100.0 * draws->beta_arm[k][i] / b1;
  }
  draws->theta_degenerate =
      n > 0 && static_cast<double>(draws->n_beta1_nonpos) >
                   max_nonpos_frac * static_cast<double>(n);
  draws->has_theta = true;
}

std::vector<ThetaSummary> summarize(const PosteriorDraws& draws, double alpha) {
  if (!draws.has_theta)
    throw std::invalid_argument("summarize: call derive_theta first");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("summarize: alpha must be in (0,1)");
  const int novel = draws.n_arms - 1;
  std::vector<ThetaSummary> out(novel);
  std::vector<double> vals;
  for (int k = 0; k < novel; ++k) {
    vals.clear();
    for (int i = 0; i < draws.n_draws(); ++i)
      if (draws.theta_valid[i]) vals.push_back(draws.theta[k][i]);
    if (vals.empty())
      throw std::runtime_error("summarize: no draws with positive control slope");
    std::sort(vals.begin(), vals.end());
    out[k].median = quantile_type7(vals, 0.5);
    out[k].ci_low = quantile_type7(vals, alpha / 2.0);
    out[k].ci_high = quantile_type7(vals, 1.0 - alpha / 2.0);
  }
  return out;
}

ChainDiagnostics diagnose(const PosteriorDraws& draws,
                          const SamplerConfig& config) {
  ChainDiagnostics diag;
  const int novel = draws.n_arms - 1;

  std::vector<std::pair<std::string, const std::vector<double>*>> params;
  params.emplace_back("beta0", &draws.beta0);
  params.emplace_back("beta1", &draws.beta1);
  for (int k = 0; k < novel; ++k)
    params.emplace_back("beta_arm_" + std::to_string(k + 2), &draws.beta_arm[k]);
  if (config.sample_random_effects) {
    params.emplace_back("sigma_g1", &draws.sigma_g1);
    params.emplace_back("sigma_g2", &draws.sigma_g2);
    params.emplace_back("rho", &draws.rho);
  }
  if (config.fixed_sigma_e <= 0.0)
    params.emplace_back("sigma_e", &draws.sigma_e);

  bool ok = draws.n_chains >= 2;
  for (const auto& [name, col] : params) {
    std::vector<std::vector<double>> chains(draws.n_chains);
    for (int c = 0; c < draws.n_chains; ++c)
      chains[c].assign(col->begin() + c * draws.per_chain,
                       col->begin() + (c + 1) * draws.per_chain);
    const double rhat = split_rhat(chains);
    const double ess = bulk_ess(chains);
    diag.param_names.push_back(name);
    diag.rhat.push_back(rhat);
    diag.ess.push_back(ess);
    if (!(rhat == rhat) || rhat >= config.rhat_threshold || ess < config.min_ess)
      ok = false;
  }
  diag.converged = ok;
  return diag;
}

}  // namespace mams
