#include "mams/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace mams {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + prefix + it.key() + "'");
  }
}

double num_or(const json& j, const char* key, double fallback,
              const std::string& prefix) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number())
    throw ConfigError("config: " + prefix + key + " must be a number");
  return j[key].get<double>();
}

int int_or(const json& j, const char* key, int fallback,
           const std::string& prefix) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer())
    throw ConfigError("config: " + prefix + key + " must be an integer");
  return j[key].get<int>();
}

std::vector<double> num_list(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigError("config: " + where + " must be a number or array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError("config: " + where + " must be numeric");
    out.push_back(x.get<double>());
  }
  return out;
}

TtpSetting parse_ttp_setting(const json& v) {
  if (v.is_string()) return builtin_ttp_setting(v.get<std::string>());
  if (v.is_object()) {
    check_keys(v, "ttp_settings[].", {"name", "theta"});
    if (!v.contains("name") || !v.contains("theta"))
      throw ConfigError("config: custom ttp setting needs 'name' and 'theta'");
    return {v["name"].get<std::string>(), num_list(v["theta"], "ttp_settings[].theta")};
  }
  throw ConfigError("config: ttp_settings entries must be strings or objects");
}

RateSetting parse_rate_setting(const json& v) {
  if (v.is_string()) return builtin_rate_setting(v.get<std::string>());
  if (v.is_object()) {
    check_keys(v, "rate_settings[].", {"name", "rates"});
    if (!v.contains("name") || !v.contains("rates"))
      throw ConfigError("config: custom rate setting needs 'name' and 'rates'");
    return {v["name"].get<std::string>(), num_list(v["rates"], "rate_settings[].rates")};
  }
  throw ConfigError("config: rate_settings entries must be strings or objects");
}

}  // namespace

StudyConfigFile parse_study_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  check_keys(j, "",
             {"name", "seed", "replicates", "n_per_arm", "ttp_settings",
              "rate_settings", "control_rate", "design", "dgm", "weibull",
              "tpp", "policy", "sampler", "priors", "ci_alpha", "workers",
              "out_dir"});

  StudyConfigFile cfg;
  StudySpec& s = cfg.spec;

  if (j.contains("name")) s.name = j["name"].get<std::string>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  s.replicates = int_or(j, "replicates", s.replicates, "");
  if (j.contains("n_per_arm")) {
    s.n_per_arm_grid.clear();
    for (double v : num_list(j["n_per_arm"], "n_per_arm"))
      s.n_per_arm_grid.push_back(static_cast<int>(v));
  }

  if (j.contains("ttp_settings")) {
    if (!j["ttp_settings"].is_array())
      throw ConfigError("config: ttp_settings must be an array");
    s.ttp_settings.clear();
    for (const auto& v : j["ttp_settings"]) s.ttp_settings.push_back(parse_ttp_setting(v));
  } else {
    s.ttp_settings = {builtin_ttp_setting("one_winner")};
  }
  if (j.contains("rate_settings")) {
    if (!j["rate_settings"].is_array())
      throw ConfigError("config: rate_settings must be an array");
    s.rate_settings.clear();
    for (const auto& v : j["rate_settings"]) s.rate_settings.push_back(parse_rate_setting(v));
  } else {
    s.rate_settings = {builtin_rate_setting("mixed")};
  }
  s.control_rate = num_or(j, "control_rate", s.control_rate, "");

  if (j.contains("design")) {
    const json& d = j["design"];
    check_keys(d, "design.",
               {"n_arms", "duration_weeks", "enrollment_rate", "ttp_weeks",
                "censor_limit_days"});
    s.design.n_arms = int_or(d, "n_arms", s.design.n_arms, "design.");
    if (d.contains("duration_weeks")) {
      s.design.duration_weeks.clear();
      for (double v : num_list(d["duration_weeks"], "design.duration_weeks"))
        s.design.duration_weeks.push_back(static_cast<int>(v));
    }
    s.design.enrollment_rate =
        int_or(d, "enrollment_rate", s.design.enrollment_rate, "design.");
    s.design.ttp_weeks = int_or(d, "ttp_weeks", s.design.ttp_weeks, "design.");
    s.design.censor_limit_days =
        num_or(d, "censor_limit_days", s.design.censor_limit_days, "design.");
  }

  if (j.contains("dgm")) {
    const json& d = j["dgm"];
    check_keys(d, "dgm.",
               {"beta0", "beta1", "sigma_g1", "sigma_g2", "rho", "sigma_e",
                "frailty_sd"});
    s.lmm.beta0 = num_or(d, "beta0", s.lmm.beta0, "dgm.");
    s.lmm.beta1 = num_or(d, "beta1", s.lmm.beta1, "dgm.");
    s.lmm.sigma_g1 = num_or(d, "sigma_g1", s.lmm.sigma_g1, "dgm.");
    s.lmm.sigma_g2 = num_or(d, "sigma_g2", s.lmm.sigma_g2, "dgm.");
    s.lmm.rho = num_or(d, "rho", s.lmm.rho, "dgm.");
    s.lmm.sigma_e = num_or(d, "sigma_e", s.lmm.sigma_e, "dgm.");
    s.frailty_sd = num_or(d, "frailty_sd", s.frailty_sd, "dgm.");
  }

  if (j.contains("weibull")) {
    check_keys(j["weibull"], "weibull.", {"shape"});
    s.weibull_shape = num_or(j["weibull"], "shape", s.weibull_shape, "weibull.");
  }

  if (j.contains("tpp")) {
    const json& d = j["tpp"];
    check_keys(d, "tpp.", {"theta_mav", "theta_tv", "tau_mav", "tau_tv"});
    s.tpp.theta_mav = num_or(d, "theta_mav", s.tpp.theta_mav, "tpp.");
    s.tpp.theta_tv = num_or(d, "theta_tv", s.tpp.theta_tv, "tpp.");
    s.tpp.tau_mav = num_or(d, "tau_mav", s.tpp.tau_mav, "tpp.");
    s.tpp.tau_tv = num_or(d, "tau_tv", s.tpp.tau_tv, "tpp.");
  }

  if (j.contains("policy")) {
    const json& d = j["policy"];
    check_keys(d, "policy.", {"max_unfavorable", "ranking_cutoff", "ranking_metric"});
    s.policy.max_unfavorable =
        int_or(d, "max_unfavorable", s.policy.max_unfavorable, "policy.");
    s.policy.ranking_cutoff =
        num_or(d, "ranking_cutoff", s.policy.ranking_cutoff, "policy.");
    if (d.contains("ranking_metric")) {
      const std::string m = d["ranking_metric"].get<std::string>();
      if (m == "psi1") s.policy.ranking_metric = RankingMetricKind::kPsi1;
      else if (m == "psi2") s.policy.ranking_metric = RankingMetricKind::kPsi2;
      else if (m == "psi3") s.policy.ranking_metric = RankingMetricKind::kPsi3;
      else throw ConfigError("config: policy.ranking_metric must be psi1|psi2|psi3");
    }
  }

  if (j.contains("sampler")) {
    const json& d = j["sampler"];
    check_keys(d, "sampler.",
               {"chains", "iterations", "warmup", "thinning", "rhat_threshold",
                "min_ess", "max_beta1_nonpos_frac"});
    s.sampler.n_chains = int_or(d, "chains", s.sampler.n_chains, "sampler.");
    s.sampler.n_iterations = int_or(d, "iterations", s.sampler.n_iterations, "sampler.");
    s.sampler.n_warmup = int_or(d, "warmup", s.sampler.n_warmup, "sampler.");
    s.sampler.thinning = int_or(d, "thinning", s.sampler.thinning, "sampler.");
    s.sampler.rhat_threshold =
        num_or(d, "rhat_threshold", s.sampler.rhat_threshold, "sampler.");
    s.sampler.min_ess = num_or(d, "min_ess", s.sampler.min_ess, "sampler.");
    s.sampler.max_beta1_nonpos_frac = num_or(
        d, "max_beta1_nonpos_frac", s.sampler.max_beta1_nonpos_frac, "sampler.");
  }

  if (j.contains("priors")) {
    const json& d = j["priors"];
    check_keys(d, "priors.",
               {"beta_mean", "beta_sd", "sigma_e_shape", "sigma_e_scale",
                "re_df", "re_scale"});
    if (d.contains("beta_mean"))
      s.priors.beta_mean = num_list(d["beta_mean"], "priors.beta_mean");
    if (d.contains("beta_sd"))
      s.priors.beta_sd = num_list(d["beta_sd"], "priors.beta_sd");
    s.priors.sigma_e_shape =
        num_or(d, "sigma_e_shape", s.priors.sigma_e_shape, "priors.");
    s.priors.sigma_e_scale =
        num_or(d, "sigma_e_scale", s.priors.sigma_e_scale, "priors.");
    s.priors.re_df = num_or(d, "re_df", s.priors.re_df, "priors.");
    s.priors.re_scale = num_or(d, "re_scale", s.priors.re_scale, "priors.");
  }

  s.ci_alpha = num_or(j, "ci_alpha", s.ci_alpha, "");
  s.workers = int_or(j, "workers", s.workers, "");
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

StudyConfigFile load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

std::string resolved_config_json(const StudyConfigFile& cfg) {
  const StudySpec& s = cfg.spec;
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["replicates"] = s.replicates;
  j["n_per_arm"] = s.n_per_arm_grid;
  j["ttp_settings"] = json::array();
  for (const auto& t : s.ttp_settings)
    j["ttp_settings"].push_back({{"name", t.name}, {"theta", t.theta_pct}});
  j["rate_settings"] = json::array();
  for (const auto& r : s.rate_settings)
    j["rate_settings"].push_back({{"name", r.name}, {"rates", r.rates}});
  j["control_rate"] = s.control_rate;
  j["design"] = {{"n_arms", s.design.n_arms},
                 {"duration_weeks", s.design.duration_weeks},
                 {"enrollment_rate", s.design.enrollment_rate},
                 {"ttp_weeks", s.design.ttp_weeks},
                 {"censor_limit_days", s.design.censor_limit_days}};
  j["dgm"] = {{"beta0", s.lmm.beta0},       {"beta1", s.lmm.beta1},
              {"sigma_g1", s.lmm.sigma_g1}, {"sigma_g2", s.lmm.sigma_g2},
              {"rho", s.lmm.rho},           {"sigma_e", s.lmm.sigma_e},
              {"frailty_sd", s.frailty_sd}};
  j["weibull"] = {{"shape", s.weibull_shape}};
  j["tpp"] = {{"theta_mav", s.tpp.theta_mav},
              {"theta_tv", s.tpp.theta_tv},
              {"tau_mav", s.tpp.tau_mav},
              {"tau_tv", s.tpp.tau_tv}};
  j["policy"] = {{"max_unfavorable", s.policy.max_unfavorable},
                 {"ranking_cutoff", s.policy.ranking_cutoff},
                 {"ranking_metric", to_string(s.policy.ranking_metric)}};
  j["sampler"] = {{"chains", s.sampler.n_chains},
                  {"iterations", s.sampler.n_iterations},
                  {"warmup", s.sampler.n_warmup},
                  {"thinning", s.sampler.thinning},
                  {"rhat_threshold", s.sampler.rhat_threshold},
                  {"min_ess", s.sampler.min_ess},
                  {"max_beta1_nonpos_frac", s.sampler.max_beta1_nonpos_frac}};
  j["priors"] = {{"beta_mean", s.priors.beta_mean},
                 {"beta_sd", s.priors.beta_sd},
                 {"sigma_e_shape", s.priors.sigma_e_shape},
                 {"sigma_e_scale", s.priors.sigma_e_scale},
                 {"re_df", s.priors.re_df},
                 {"re_scale", s.priors.re_scale}};
  j["ci_alpha"] = s.ci_alpha;
  return j.dump(2);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[x & 0xf];
    x >>= 4;
  }
  return out;
}

}  // namespace mams
