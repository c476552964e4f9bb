#pragma once

#include <string>
#include <vector>

#include "mams/config.hpp"
#include "mams/study.hpp"

namespace mams {

// --- dataset CSVs -----------------------------------------------------------
// ttp columns:    replicate_id,patient_id,arm,rand_week,week,log10_ttp,censored
// events columns: replicate_id,patient_id,arm,event_time_weeks,event_observed
// Arms are written 1-based (1 = control).

void write_ttp_csv(const std::string& path,
                   const std::vector<TrialDataset>& replicates);
void write_events_csv(const std::string& path,
                      const std::vector<TrialDataset>& replicates);

std::vector<TrialDataset> read_dataset_csvs(const std::string& ttp_path,
                                            const std::string& events_path);

// --- decision report --------------------------------------------------------

struct DecisionReport {
  int interim_week = 0;
  bool converged = false;
  bool theta_degenerate = false;
  std::vector<int> durations;  // per arm
  ReplicateRecord record;
};

DecisionReport build_report(const ScenarioConfig& config,
                            const SnapshotDecision& decision);

// columns: arm,duration,n_patients,events,theta_median,ci_low,ci_high,
//          p_mav,p_tv,tpp_decision,psi1,psi2,psi3,final_decision,reason,
//          converged
// theta at 1 decimal, probabilities at 2; control fields left empty.
void write_report_csv(const std::string& path, const DecisionReport& report,
                      const std::vector<int>& enrolled);
void write_report_json(const std::string& path, const DecisionReport& report,
                       const std::vector<int>& enrolled);
std::string format_report_table(const DecisionReport& report,
                                const std::vector<int>& enrolled);

// --- study outputs ----------------------------------------------------------

void write_aggregate_csv(const std::string& path,
                         const std::vector<OperatingCharacteristics>& ocs);
void write_plot_lob_csv(const std::string& path, int threshold,
                        const std::vector<OperatingCharacteristics>& ocs);
void write_plot_tpp_csv(const std::string& path,
                        const std::vector<OperatingCharacteristics>& ocs);
void write_plot_ranking_csv(const std::string& path,
                            const std::vector<OperatingCharacteristics>& ocs);

// --- posterior draw export --------------------------------------------------
// columns: chain,iter,beta0,beta1,beta_arm_2..,sigma_g1,sigma_g2,rho,sigma_e,
//          theta_2..
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);

// --- manifest ---------------------------------------------------------------

struct ScenarioStatus {
  std::string id;
  std::string seed_hex;
  std::string status;  // "ok" or "failed"
  std::string error;
};

// The manifest pins the resolved config, its hash, and the seeds actually
// used. It contains no timestamps or worker counts: reruns at any worker
// count must reproduce it byte for byte.
void write_manifest(const std::string& path, const std::string& command,
                    const StudyConfigFile& config,
                    const std::vector<std::string>& outputs,
                    const std::vector<ScenarioStatus>& scenarios);

}  // namespace mams
