// mams: multi-arm multi-stage trial simulator and Bayesian decision engine.
//
// Subcommands:
//   simulate  generate trial datasets, export TTP/event CSVs + manifest
//   decide    fit the interim model on one dataset, emit the decision report
//   study     run a scenario grid, aggregate operating characteristics
//   report    pretty-print a decision report or aggregate CSV
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 runtime.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "mams/config.hpp"
#include "mams/io.hpp"
#include "mams/study.hpp"
#include "mams/version.hpp"

namespace fs = std::filesystem;
using namespace mams;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<int> workers;
};

std::string resolve_out_dir(const CommonOpts& opts, const StudyConfigFile& cfg) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  const char* root = std::getenv("MAMS_OUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("mams_out");
  return (base / cfg.spec.name).string();
}

StudyConfigFile load_with_overrides(const CommonOpts& opts) {
  StudyConfigFile cfg = load_study_config(opts.config_path);
  if (opts.seed) cfg.spec.seed = *opts.seed;
  if (opts.replicates) cfg.spec.replicates = *opts.replicates;
  if (opts.workers) cfg.spec.workers = *opts.workers;
  return cfg;
}

ScenarioConfig single_scenario(const StudyConfigFile& cfg,
                               const std::string& cmd) {
  auto grid = expand_grid(cfg.spec);
  if (grid.size() != 1)
    throw ConfigError("config: " + cmd + " needs a single scenario, got " +
                      std::to_string(grid.size()) +
                      " (one TTP setting, one rate setting, one n_per_arm)");
  return grid[0];
}

int cmd_simulate(const CommonOpts& opts) {
  const StudyConfigFile cfg = load_with_overrides(opts);
  const ScenarioConfig sc = single_scenario(cfg, "simulate");
  const fs::path out = resolve_out_dir(opts, cfg);
  fs::create_directories(out);

  std::vector<TrialDataset> reps(sc.replicates);
  for (int r = 0; r < sc.replicates; ++r) {
    const std::uint64_t rep_key =
        derive_stream(sc.seed, static_cast<std::uint64_t>(r), 0x5245504cULL);
    reps[r] = simulate_trial(sc.lmm, sc.weibull, sc.design,
                             replicate_streams(rep_key));
  }
  write_ttp_csv((out / "ttp.csv").string(), reps);
  write_events_csv((out / "events.csv").string(), reps);
  write_manifest((out / "manifest.json").string(), "simulate", cfg,
                 {"ttp.csv", "events.csv"},
                 {{sc.id, hex64(sc.seed), "ok", ""}});
  std::cout << "wrote " << sc.replicates << " replicate(s) to " << out.string()
            << "\n";
  return 0;
}

struct DecideOpts {
  CommonOpts common;
  std::string data_dir;
  int replicate = 0;
  bool export_draws = false;
  std::optional<double> theta_mav, theta_tv, tau_mav, tau_tv;
  std::optional<int> max_unfavorable;
  std::optional<double> ranking_cutoff;
};

int cmd_decide(const DecideOpts& opts) {
  StudyConfigFile cfg;
  std::optional<TrialDataset> dataset;

  if (!opts.data_dir.empty()) {
    const fs::path dir = opts.data_dir;
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("cannot read manifest.json in " + opts.data_dir);
    nlohmann::json j = nlohmann::json::parse(mf);
    cfg = parse_study_config(j.at("resolved_config").dump());
    auto reps = read_dataset_csvs((dir / "ttp.csv").string(),
                                  (dir / "events.csv").string());
    if (opts.replicate < 0 || opts.replicate >= static_cast<int>(reps.size()))
      throw std::runtime_error("replicate " + std::to_string(opts.replicate) +
                               " not present in dataset");
    dataset = std::move(reps[opts.replicate]);
    if (dataset->patients.empty())
      throw std::runtime_error("dataset replicate is empty");
  } else {
    cfg = load_with_overrides(opts.common);
  }
  if (opts.common.seed) cfg.spec.seed = *opts.common.seed;
  if (opts.theta_mav) cfg.spec.tpp.theta_mav = *opts.theta_mav;
  if (opts.theta_tv) cfg.spec.tpp.theta_tv = *opts.theta_tv;
  if (opts.tau_mav) cfg.spec.tpp.tau_mav = *opts.tau_mav;
  if (opts.tau_tv) cfg.spec.tpp.tau_tv = *opts.tau_tv;
  if (opts.max_unfavorable) cfg.spec.policy.max_unfavorable = *opts.max_unfavorable;
  if (opts.ranking_cutoff) cfg.spec.policy.ranking_cutoff = *opts.ranking_cutoff;

  const ScenarioConfig sc = single_scenario(cfg, "decide");
  const std::uint64_t rep_key = derive_stream(
      sc.seed, static_cast<std::uint64_t>(opts.replicate), 0x5245504cULL);
  if (!dataset) {
    dataset = simulate_trial(sc.lmm, sc.weibull, sc.design,
                             replicate_streams(rep_key));
  }
  const InterimSnapshot snapshot = take_interim_snapshot(*dataset, sc.design);
  const SnapshotDecision decision =
      decide_snapshot(sc, snapshot, derive_stream(rep_key, kStreamSampler),
                      opts.export_draws);

  const fs::path out = resolve_out_dir(opts.common, cfg);
  fs::create_directories(out);
  const DecisionReport report = build_report(sc, decision);
  write_report_csv((out / "report.csv").string(), report, snapshot.enrolled);
  write_report_json((out / "report.json").string(), report, snapshot.enrolled);
  std::vector<std::string> outputs{"report.csv", "report.json"};
  if (opts.export_draws) {
    write_draws_csv((out / "draws.csv").string(), decision.draws);
    outputs.push_back("draws.csv");
  }
  write_manifest((out / "manifest.json").string(), "decide", cfg, outputs,
                 {{sc.id, hex64(sc.seed), "ok", ""}});
  std::cout << format_report_table(report, snapshot.enrolled);
  return 0;
}

int cmd_study(const CommonOpts& opts) {
  const StudyConfigFile cfg = load_with_overrides(opts);
  const auto grid = expand_grid(cfg.spec);
  const fs::path out = resolve_out_dir(opts, cfg);
  fs::create_directories(out);

  std::vector<OperatingCharacteristics> ocs;
  std::vector<ScenarioStatus> statuses;
  bool any_failed = false;
  for (const ScenarioConfig& sc : grid) {
    try {
      const auto records = run_scenario(sc, cfg.spec.workers);
      ocs.push_back(aggregate(sc, records));
      statuses.push_back({sc.id, hex64(sc.seed), "ok", ""});
    } catch (const std::exception& e) {
      any_failed = true;
      statuses.push_back({sc.id, hex64(sc.seed), "failed", e.what()});
      std::cerr << "scenario " << sc.id << " failed: " << e.what() << "\n";
    }
  }

  write_aggregate_csv((out / "aggregate.csv").string(), ocs);
  write_plot_lob_csv((out / "plot_lack_of_benefit.csv").string(),
                     cfg.spec.policy.max_unfavorable, ocs);
  write_plot_tpp_csv((out / "plot_tpp.csv").string(), ocs);
  write_plot_ranking_csv((out / "plot_ranking.csv").string(), ocs);
  write_manifest((out / "manifest.json").string(), "study", cfg,
                 {"aggregate.csv", "plot_lack_of_benefit.csv", "plot_tpp.csv",
                  "plot_ranking.csv"},
                 statuses);
  std::cout << "study '" << cfg.spec.name << "': " << ocs.size() << "/"
            << grid.size() << " scenarios done, results in " << out.string()
            << "\n";
  return any_failed ? 3 : 0;
}

int cmd_report(const std::string& input) {
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot read '" + input + "'");
  if (input.size() > 5 && input.substr(input.size() - 5) == ".json") {
    nlohmann::json j = nlohmann::json::parse(in);
    auto cell = [&](const nlohmann::json& v) -> std::string {
      if (v.is_null()) return "--";
      if (v.is_string()) return v.get<std::string>();
      return v.dump();
    };
    std::cout << "interim calendar week: " << j.at("interim_week") << "\n";
    std::cout << "converged: " << (j.at("converged").get<bool>() ? "yes" : "no")
              << "\n";
    for (const auto& a : j.at("arms")) {
      std::cout << "arm " << a.at("arm") << "  dur=" << a.at("duration")
                << "  n=" << a.at("n") << "  events=" << a.at("events")
                << "  theta=" << cell(a.at("theta_median")) << " ("
                << cell(a.at("ci_low")) << ", " << cell(a.at("ci_high")) << ")"
                << "  pMAV=" << cell(a.at("p_mav"))
                << "  pTV=" << cell(a.at("p_tv"))
                << "  tpp=" << cell(a.at("tpp_decision"))
                << "  psi=" << cell(a.at("psi1")) << "/" << cell(a.at("psi2"))
                << "/" << cell(a.at("psi3"))
                << "  final=" << cell(a.at("final_decision")) << "\n";
    }
    return 0;
  }
  // CSV: echo as an aligned table
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    cells.push_back(cur);
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw std::runtime_error("empty input");
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i)
      width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i)
      std::cout << (i ? "  " : "") << r[i]
                << std::string(width[i] - r[i].size(), ' ');
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-arm multi-stage trial simulator and decision engine"};
  app.set_version_flag("--version", MAMS_VERSION);
  app.require_subcommand(1);

  CommonOpts sim_opts;
  auto* sim = app.add_subcommand("simulate", "generate trial dataset CSVs");
  sim->add_option("--config", sim_opts.config_path, "config file (JSON)")
      ->required();
  sim->add_option("--out", sim_opts.out_dir, "output directory");
  sim->add_option("--seed", sim_opts.seed, "override config seed");
  sim->add_option("--replicates", sim_opts.replicates, "override replicate count");

  DecideOpts dec_opts;
  auto* dec = app.add_subcommand("decide", "interim fit + decision report");
  dec->add_option("--config", dec_opts.common.config_path, "config file (JSON)");
  dec->add_option("--data", dec_opts.data_dir,
                  "directory with ttp.csv/events.csv/manifest.json");
  dec->add_option("--replicate", dec_opts.replicate, "replicate id to analyze");
  dec->add_option("--out", dec_opts.common.out_dir, "output directory");
  dec->add_option("--seed", dec_opts.common.seed, "override config seed");
  dec->add_option("--theta-mav", dec_opts.theta_mav, "TPP minimum acceptable value (%)");
  dec->add_option("--theta-tv", dec_opts.theta_tv, "TPP target value (%)");
  dec->add_option("--tau-mav", dec_opts.tau_mav, "risk tolerance for the MAV");
  dec->add_option("--tau-tv", dec_opts.tau_tv, "risk tolerance for the TV");
  dec->add_option("--max-unfavorable", dec_opts.max_unfavorable,
                  "lack-of-benefit event threshold M");
  dec->add_option("--ranking-cutoff", dec_opts.ranking_cutoff,
                  "ranking gate cutoff");
  dec->add_flag("--export-draws", dec_opts.export_draws,
                "also write the posterior draws CSV");

  CommonOpts study_opts;
  auto* st = app.add_subcommand("study", "run the scenario grid");
  st->add_option("--config", study_opts.config_path, "config file (JSON)")
      ->required();
  st->add_option("--out", study_opts.out_dir, "output directory");
  st->add_option("--seed", study_opts.seed, "override config seed");
  st->add_option("--replicates", study_opts.replicates, "override replicate count");
  st->add_option("--workers", study_opts.workers, "worker threads (0 = all)");

  std::string report_input;
  auto* rep = app.add_subcommand("report", "pretty-print results");
  rep->add_option("--input", report_input, "report.json or a result CSV")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_opts);
    if (dec->parsed()) {
      if (dec_opts.common.config_path.empty() && dec_opts.data_dir.empty())
        throw ConfigError("decide: need --config or --data");
      return cmd_decide(dec_opts);
    }
    if (st->parsed()) return cmd_study(study_opts);
    if (rep->parsed()) return cmd_report(report_input);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
