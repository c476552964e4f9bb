// Compares the serial reference replicate loop against the OpenMP one on a
// small scenario and checks that both paths agree.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>

#include "mams/study.hpp"

using namespace mams;

namespace {

double run_timed(const ScenarioConfig& sc, int workers, double* checksum) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = workers == 1 ? run_scenario_serial(sc)
                                    : run_scenario_parallel(sc, workers);
  const auto t1 = std::chrono::steady_clock::now();
  double sum = 0.0;
  for (const auto& r : records)
    for (const auto& a : r.arms) sum += a.psi2 + a.unfavorable;
  *checksum = sum;
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  int replicates = 24;
  int n_per_arm = 20;
  if (argc > 1) replicates = std::atoi(argv[1]);
  if (argc > 2) n_per_arm = std::atoi(argv[2]);

  StudySpec spec;
  spec.name = "bench";
  spec.seed = 7;
  spec.replicates = replicates;
  spec.n_per_arm_grid = {n_per_arm};
  spec.ttp_settings = {builtin_ttp_setting("one_winner")};
  spec.rate_settings = {builtin_rate_setting("mixed")};
  spec.sampler.n_chains = 2;
  spec.sampler.n_iterations = 900;
  spec.sampler.n_warmup = 300;
  const ScenarioConfig sc = expand_grid(spec)[0];

  std::printf("replicates=%d n_per_arm=%d hardware_threads=%d\n", replicates,
              n_per_arm, omp_get_max_threads());
  std::printf("%-10s %12s %14s %10s\n", "path", "seconds", "replicates/s",
              "speedup");

  double base_checksum = 0.0;
  const double t_serial = run_timed(sc, 1, &base_checksum);
  std::printf("%-10s %12.3f %14.2f %10s\n", "serial", t_serial,
              replicates / t_serial, "1.00x");

  for (int workers : {2, 4, omp_get_max_threads()}) {
    if (workers < 2) continue;
    double checksum = 0.0;
    const double t = run_timed(sc, workers, &checksum);
    std::printf("%-10s %12.3f %14.2f %9.2fx", ("omp-" + std::to_string(workers)).c_str(),
                t, replicates / t, t_serial / t);
    std::printf("  %s\n", checksum == base_checksum ? "(matches serial)"
                                                    : "(MISMATCH)");
  }
  return 0;
}
