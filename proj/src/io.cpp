#include "mams/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mams/version.hpp"

namespace mams {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// NaN prints as an empty CSV field.
std::string fmt_or_empty(double v, int decimals) {
  if (std::isnan(v)) return "";
  return fmt(v, decimals);
}

}  // namespace

void write_ttp_csv(const std::string& path,
                   const std::vector<TrialDataset>& replicates) {
  auto out = open_out(path);
  out << "replicate_id,patient_id,arm,rand_week,week,log10_ttp,censored\n";
  for (std::size_t rep = 0; rep < replicates.size(); ++rep) {
    for (const Patient& p : replicates[rep].patients) {
      for (const Visit& v : p.visits) {
        out << rep << ',' << p.id << ',' << p.arm + 1 << ',' << p.rand_week
            << ',' << v.week << ',' << fmt_g(v.log10_ttp) << ','
            << (v.censored ? 1 : 0) << '\n';
      }
    }
  }
}

void write_events_csv(const std::string& path,
                      const std::vector<TrialDataset>& replicates) {
  auto out = open_out(path);
  out << "replicate_id,patient_id,arm,event_time_weeks,event_observed\n";
  for (std::size_t rep = 0; rep < replicates.size(); ++rep) {
    for (const Patient& p : replicates[rep].patients) {
      out << rep << ',' << p.id << ',' << p.arm + 1 << ','
          << fmt_g(p.event_time) << ',' << (p.event_observed ? 1 : 0) << '\n';
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty CSV: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw std::runtime_error("unexpected header in " + path + ": " + line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

}  // namespace

std::vector<TrialDataset> read_dataset_csvs(const std::string& ttp_path,
                                            const std::string& events_path) {
  const auto ttp_rows = read_csv(
      ttp_path, "replicate_id,patient_id,arm,rand_week,week,log10_ttp,censored");
  const auto event_rows = read_csv(
      events_path, "replicate_id,patient_id,arm,event_time_weeks,event_observed");

  std::vector<TrialDataset> reps;
  auto patient_at = [&](std::size_t rep, int id) -> Patient& {
    if (rep >= reps.size()) reps.resize(rep + 1);
    auto& pats = reps[rep].patients;
    if (id >= static_cast<int>(pats.size())) pats.resize(id + 1);
    return pats[id];
  };

  for (const auto& r : ttp_rows) {
    if (r.size() != 7) throw std::runtime_error("bad ttp row");
    Patient& p = patient_at(std::stoul(r[0]), std::stoi(r[1]));
    p.id = std::stoi(r[1]);
    p.arm = std::stoi(r[2]) - 1;
    p.rand_week = std::stoi(r[3]);
    p.visits.push_back({std::stoi(r[4]), std::stod(r[5]), r[6] == "1"});
  }
  for (const auto& r : event_rows) {
    if (r.size() != 5) throw std::runtime_error("bad event row");
    Patient& p = patient_at(std::stoul(r[0]), std::stoi(r[1]));
    p.event_time = std::stod(r[3]);
    p.event_observed = r[4] == "1";
  }
  return reps;
}

DecisionReport build_report(const ScenarioConfig& config,
                            const SnapshotDecision& decision) {
  DecisionReport rep;
  rep.interim_week = decision.record.interim_week;
  rep.converged = decision.record.converged;
  rep.theta_degenerate = decision.record.theta_degenerate;
  rep.durations = config.design.duration_weeks;
  rep.record = decision.record;
  return rep;
}

namespace {

constexpr const char* kReportHeader =
    "arm,duration,n,events,theta_median,ci_low,ci_high,p_mav,p_tv,"
    "tpp_decision,psi1,psi2,psi3,final_decision,reason,converged";

struct ReportCells {
  std::vector<std::string> cells;
};

std::vector<ReportCells> report_rows(const DecisionReport& report,
                                     const std::vector<int>& enrolled) {
  std::vector<ReportCells> rows;
  const auto& arms = report.record.arms;
  for (std::size_t k = 0; k < arms.size(); ++k) {
    const ArmReplicateStats& a = arms[k];
    ReportCells row;
    auto& c = row.cells;
    c.push_back(std::to_string(k + 1));
    c.push_back(std::to_string(report.durations[k]));
    c.push_back(std::to_string(enrolled[k]));
    c.push_back(std::to_string(a.unfavorable));
    if (k == 0) {
      // control: comparator only, no TPP metrics
      c.insert(c.end(), {"", "", "", "", "", "", ""});
      c.push_back(fmt(a.psi2, 2));
      c.push_back(fmt(a.psi3, 2));
      c.push_back("");
      c.push_back(to_string(a.reason));
    } else {
      c.push_back(fmt(a.theta_median, 1));
      c.push_back(fmt(a.ci_low, 1));
      c.push_back(fmt(a.ci_high, 1));
      c.push_back(fmt(a.p_mav, 2));
      c.push_back(fmt(a.p_tv, 2));
      c.push_back(to_string(a.tpp));
      c.push_back(fmt(a.psi1, 2));
      c.push_back(fmt(a.psi2, 2));
      c.push_back(fmt(a.psi3, 2));
      c.push_back(to_string(a.final_decision));
      c.push_back(to_string(a.reason));
    }
    c.push_back(report.converged ? "1" : "0");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void write_report_csv(const std::string& path, const DecisionReport& report,
                      const std::vector<int>& enrolled) {
  auto out = open_out(path);
  out << kReportHeader << '\n';
  for (const auto& row : report_rows(report, enrolled)) {
    for (std::size_t i = 0; i < row.cells.size(); ++i) {
      if (i) out << ',';
      out << row.cells[i];
    }
    out << '\n';
  }
}

void write_report_json(const std::string& path, const DecisionReport& report,
                       const std::vector<int>& enrolled) {
  json j;
  j["interim_week"] = report.interim_week;
  j["converged"] = report.converged;
  j["theta_degenerate"] = report.theta_degenerate;
  j["arms"] = json::array();
  const auto& arms = report.record.arms;
  for (std::size_t k = 0; k < arms.size(); ++k) {
    const ArmReplicateStats& a = arms[k];
    json e;
    e["arm"] = k + 1;
    e["duration"] = report.durations[k];
    e["n"] = enrolled[k];
    e["events"] = a.unfavorable;
    if (k == 0) {
      e["theta_median"] = nullptr;
      e["ci_low"] = nullptr;
      e["ci_high"] = nullptr;
      e["p_mav"] = nullptr;
      e["p_tv"] = nullptr;
      e["tpp_decision"] = nullptr;
      e["psi1"] = nullptr;
      e["final_decision"] = nullptr;
    } else {
      // rounded to report precision so JSON and CSV agree
      e["theta_median"] = std::stod(fmt(a.theta_median, 1));
      e["ci_low"] = std::stod(fmt(a.ci_low, 1));
      e["ci_high"] = std::stod(fmt(a.ci_high, 1));
      e["p_mav"] = std::stod(fmt(a.p_mav, 2));
      e["p_tv"] = std::stod(fmt(a.p_tv, 2));
      e["tpp_decision"] = to_string(a.tpp);
      e["psi1"] = std::stod(fmt(a.psi1, 2));
      e["final_decision"] = to_string(a.final_decision);
    }
    e["psi2"] = std::stod(fmt(a.psi2, 2));
    e["psi3"] = std::stod(fmt(a.psi3, 2));
    e["reason"] = to_string(a.reason);
    j["arms"].push_back(std::move(e));
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string format_report_table(const DecisionReport& report,
                                const std::vector<int>& enrolled) {
  static const char* names[] = {"arm",  "dur",  "n",    "events", "theta",
                                "lo",   "hi",   "pMAV", "pTV",    "tpp",
                                "psi1", "psi2", "psi3", "final",  "reason",
                                "conv"};
  const auto rows = report_rows(report, enrolled);
  std::vector<std::size_t> width(16);
  for (int i = 0; i < 16; ++i) width[i] = std::string(names[i]).size();
  for (const auto& row : rows)
    for (int i = 0; i < 16; ++i)
      width[i] = std::max(width[i], row.cells[i].size());

  std::ostringstream os;
  os << "interim calendar week: " << report.interim_week << '\n';
  auto emit = [&](const std::vector<std::string>& cells) {
    for (int i = 0; i < 16; ++i) {
      os << (i ? "  " : "");
      os << cells[i];
      os << std::string(width[i] - cells[i].size(), ' ');
    }
    os << '\n';
  };
  emit(std::vector<std::string>(names, names + 16));
  for (const auto& row : rows) emit(row.cells);
  return os.str();
}

namespace {

constexpr const char* kAggregateHeader =
    "scenario_id,ttp_setting,rate_setting,n_per_arm,arm,true_theta,true_rate,"
    "truth_class,n_replicates,n_converged,go_rate,continue_rate,stop_rate,"
    "go_mcse,continue_mcse,stop_mcse,tpp_go_rate,tpp_continue_rate,"
    "tpp_nogo_rate,tpp_go_mcse,tpp_continue_mcse,tpp_nogo_mcse,lob_flag_rate,"
    "lob_flag_mcse,false_go_rate,false_no_go_rate,mean_theta_median,"
    "mean_unfavorable,median_psi2,mean_psi2,median_psi3,true_best_arm,"
    "true_second_arm,median_psi2_true_best,median_psi2_true_second,"
    "ranking_separation";

}  // namespace

void write_aggregate_csv(const std::string& path,
                         const std::vector<OperatingCharacteristics>& ocs) {
  auto out = open_out(path);
  out << kAggregateHeader << '\n';
  for (const auto& oc : ocs) {
    for (const auto& a : oc.arms) {
      out << oc.scenario_id << ',' << oc.ttp_setting << ',' << oc.rate_setting
          << ',' << oc.n_per_arm << ',' << a.arm + 1 << ','
          << fmt_g(a.true_theta) << ',' << fmt_g(a.true_rate) << ','
          << to_string(a.truth_class) << ',' << oc.n_replicates << ','
          << oc.n_converged << ',' << fmt_or_empty(a.go_rate, 6) << ','
          << fmt_or_empty(a.continue_rate, 6) << ','
          << fmt_or_empty(a.stop_rate, 6) << ',' << fmt_or_empty(a.go_mcse, 6)
          << ',' << fmt_or_empty(a.continue_mcse, 6) << ','
          << fmt_or_empty(a.stop_mcse, 6) << ','
          << fmt_or_empty(a.tpp_go_rate, 6) << ','
          << fmt_or_empty(a.tpp_continue_rate, 6) << ','
          << fmt_or_empty(a.tpp_nogo_rate, 6) << ','
          << fmt_or_empty(a.tpp_go_mcse, 6) << ','
          << fmt_or_empty(a.tpp_continue_mcse, 6) << ','
          << fmt_or_empty(a.tpp_nogo_mcse, 6) << ','
          << fmt_or_empty(a.lob_flag_rate, 6) << ','
          << fmt_or_empty(a.lob_flag_mcse, 6) << ','
          << fmt_or_empty(a.false_go_rate, 6) << ','
          << fmt_or_empty(a.false_no_go_rate, 6) << ','
          << fmt_or_empty(a.mean_theta_median, 4) << ','
          << fmt_or_empty(a.mean_unfavorable, 4) << ','
          << fmt_or_empty(a.median_psi2, 6) << ','
          << fmt_or_empty(a.mean_psi2, 6) << ','
          << fmt_or_empty(a.median_psi3, 6) << ',' << oc.true_best_arm + 1
          << ',' << oc.true_second_arm + 1 << ','
          << fmt_or_empty(oc.median_psi2_true_best, 6) << ','
          << fmt_or_empty(oc.median_psi2_true_second, 6) << ','
          << fmt_or_empty(oc.ranking_separation, 6) << '\n';
    }
  }
}

void write_plot_lob_csv(const std::string& path, int threshold,
                        const std::vector<OperatingCharacteristics>& ocs) {
  auto out = open_out(path);
  out << "ttp_setting,rate_setting,n_per_arm,arm,true_rate,truth_class,"
         "threshold,flag_rate,mcse\n";
  for (const auto& oc : ocs) {
    for (const auto& a : oc.arms) {
      out << oc.ttp_setting << ',' << oc.rate_setting << ',' << oc.n_per_arm
          << ',' << a.arm + 1 << ',' << fmt_g(a.true_rate) << ','
          << to_string(a.truth_class) << ',' << threshold << ','
          << fmt(a.lob_flag_rate, 6) << ',' << fmt(a.lob_flag_mcse, 6) << '\n';
    }
  }
}

void write_plot_tpp_csv(const std::string& path,
                        const std::vector<OperatingCharacteristics>& ocs) {
  auto out = open_out(path);
  out << "ttp_setting,rate_setting,n_per_arm,arm,true_theta,decision,"
         "proportion,mcse\n";
  for (const auto& oc : ocs) {
    for (const auto& a : oc.arms) {
      if (a.arm == 0) continue;
      auto row = [&](const char* d, double p, double se) {
        out << oc.ttp_setting << ',' << oc.rate_setting << ',' << oc.n_per_arm
            << ',' << a.arm + 1 << ',' << fmt_g(a.true_theta) << ',' << d
            << ',' << fmt(p, 6) << ',' << fmt(se, 6) << '\n';
      };
      row("GO", a.tpp_go_rate, a.tpp_go_mcse);
      row("CONTINUE", a.tpp_continue_rate, a.tpp_continue_mcse);
      row("NO-GO", a.tpp_nogo_rate, a.tpp_nogo_mcse);
    }
  }
}

void write_plot_ranking_csv(const std::string& path,
                            const std::vector<OperatingCharacteristics>& ocs) {
  auto out = open_out(path);
  out << "ttp_setting,rate_setting,n_per_arm,arm,true_theta,true_rank,"
         "median_psi2,mean_psi2\n";
  for (const auto& oc : ocs) {
    for (const auto& a : oc.arms) {
      const char* rank = a.arm == oc.true_best_arm     ? "best"
                         : a.arm == oc.true_second_arm ? "second"
                                                       : "other";
      out << oc.ttp_setting << ',' << oc.rate_setting << ',' << oc.n_per_arm
          << ',' << a.arm + 1 << ',' << fmt_g(a.true_theta) << ',' << rank
          << ',' << fmt(a.median_psi2, 6) << ',' << fmt(a.mean_psi2, 6) << '\n';
    }
  }
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  auto out = open_out(path);
  out << "chain,iter,beta0,beta1";
  const int novel = draws.n_arms - 1;
  for (int k = 0; k < novel; ++k) out << ",beta_arm_" << k + 2;
  out << ",sigma_g1,sigma_g2,rho,sigma_e";
  if (draws.has_theta)
    for (int k = 0; k < novel; ++k) out << ",theta_" << k + 2;
  out << '\n';
  for (int i = 0; i < draws.n_draws(); ++i) {
    out << draws.chain[i] << ',' << i % draws.per_chain << ','
        << fmt_g(draws.beta0[i]) << ',' << fmt_g(draws.beta1[i]);
    for (int k = 0; k < novel; ++k) out << ',' << fmt_g(draws.beta_arm[k][i]);
    out << ',' << fmt_g(draws.sigma_g1[i]) << ',' << fmt_g(draws.sigma_g2[i])
        << ',' << fmt_g(draws.rho[i]) << ',' << fmt_g(draws.sigma_e[i]);
    if (draws.has_theta)
      for (int k = 0; k < novel; ++k) out << ',' << fmt_g(draws.theta[k][i]);
    out << '\n';
  }
}

void write_manifest(const std::string& path, const std::string& command,
                    const StudyConfigFile& config,
                    const std::vector<std::string>& outputs,
                    const std::vector<ScenarioStatus>& scenarios) {
  const std::string resolved = resolved_config_json(config);
  json j;
  j["version"] = MAMS_VERSION;
  j["command"] = command;
  j["config_hash"] = hex64(fnv1a64(resolved));
  j["resolved_config"] = json::parse(resolved);
  j["outputs"] = outputs;
  j["scenarios"] = json::array();
  for (const auto& s : scenarios) {
    json e;
    e["id"] = s.id;
    e["seed"] = s.seed_hex;
    e["status"] = s.status;
    if (!s.error.empty()) e["error"] = s.error;
    j["scenarios"].push_back(std::move(e));
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace mams
