#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "doctest.h"
#include "mams/stats.hpp"
#include "mams/study.hpp"

using namespace mams;

namespace {

StudySpec small_spec() {
  StudySpec spec;
  spec.name = "unit";
  spec.seed = 404;
  spec.replicates = 6;
  spec.n_per_arm_grid = {20};
  spec.ttp_settings = {builtin_ttp_setting("one_winner")};
  spec.rate_settings = {builtin_rate_setting("mixed")};
  spec.sampler.n_chains = 2;
  spec.sampler.n_iterations = 500;
  spec.sampler.n_warmup = 200;
  return spec;
}

bool records_equal(const ReplicateRecord& a, const ReplicateRecord& b) {
  if (a.replicate != b.replicate || a.converged != b.converged ||
      a.interim_week != b.interim_week ||
      a.ranking_gate_applied != b.ranking_gate_applied ||
      a.arms.size() != b.arms.size())
    return false;
  for (std::size_t k = 0; k < a.arms.size(); ++k) {
    const auto& x = a.arms[k];
    const auto& y = b.arms[k];
    const bool stats_equal =
        x.unfavorable == y.unfavorable && x.psi1 == y.psi1 &&
        x.psi2 == y.psi2 && x.psi3 == y.psi3 &&
        x.final_decision == y.final_decision && x.reason == y.reason &&
        x.tpp == y.tpp && x.lack_of_benefit == y.lack_of_benefit;
    if (!stats_equal) return false;
    if (k > 0 && (x.theta_median != y.theta_median || x.ci_low != y.ci_low ||
                  x.ci_high != y.ci_high || x.p_mav != y.p_mav ||
                  x.p_tv != y.p_tv))
      return false;
  }
  return true;
}

bool oc_equal(const OperatingCharacteristics& a,
              const OperatingCharacteristics& b) {
  auto eq = [](double x, double y) {
    return (std::isnan(x) && std::isnan(y)) || x == y;
  };
  if (a.n_replicates != b.n_replicates || a.n_converged != b.n_converged ||
      a.true_best_arm != b.true_best_arm ||
      !eq(a.ranking_separation, b.ranking_separation))
    return false;
  for (std::size_t k = 0; k < a.arms.size(); ++k) {
    const auto& x = a.arms[k];
    const auto& y = b.arms[k];
    if (!(eq(x.go_rate, y.go_rate) && eq(x.stop_rate, y.stop_rate) &&
          eq(x.continue_rate, y.continue_rate) &&
          eq(x.tpp_nogo_rate, y.tpp_nogo_rate) &&
          eq(x.lob_flag_rate, y.lob_flag_rate) &&
          eq(x.mean_theta_median, y.mean_theta_median) &&
          eq(x.median_psi2, y.median_psi2) && eq(x.mean_psi2, y.mean_psi2) &&
          eq(x.false_go_rate, y.false_go_rate) &&
          eq(x.mean_unfavorable, y.mean_unfavorable)))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("grid expansion: product shape, table rows, distinct seeds") {
  StudySpec spec = small_spec();
  spec.ttp_settings = {builtin_ttp_setting("no_winners"),
                       builtin_ttp_setting("one_winner"),
                       builtin_ttp_setting("two_winners"),
                       builtin_ttp_setting("four_winners")};
  spec.rate_settings = {builtin_rate_setting("all_minimal"),
                        builtin_rate_setting("all_desirable"),
                        builtin_rate_setting("all_suboptimal"),
                        builtin_rate_setting("mixed")};
  spec.n_per_arm_grid = {20, 30, 40};
  const auto grid = expand_grid(spec);
  CHECK(grid.size() == 48);

  std::unordered_set<std::uint64_t> seeds;
  std::unordered_set<std::string> ids;
  for (const auto& sc : grid) {
    CHECK(seeds.insert(sc.seed).second);
    CHECK(ids.insert(sc.id).second);
  }

  CHECK(builtin_ttp_setting("one_winner").theta_pct ==
        std::vector<double>{10, 20, 30, 40});
  CHECK(builtin_ttp_setting("two_winners").theta_pct ==
        std::vector<double>{-10, 10, 35, 40});
  CHECK(builtin_rate_setting("mixed").rates ==
        std::vector<double>{0.10, 0.05, 0.05, 0.025});
  CHECK_THROWS(builtin_ttp_setting("nope"));

  // theta -> slope mapping is exact by construction
  const auto& sc = grid[12];  // one_winner x all_minimal x n20
  CHECK(sc.ttp.name == "one_winner");
  for (int k = 0; k < 4; ++k)
    CHECK(sc.lmm.beta_arm[k] ==
          sc.ttp.theta_pct[k] / 100.0 * sc.lmm.beta1);

  // empty grids are rejected
  StudySpec bad = small_spec();
  bad.ttp_settings.clear();
  CHECK_THROWS_AS(expand_grid(bad), std::invalid_argument);
}

TEST_CASE("replicates are deterministic in (config, index)") {
  const auto grid = expand_grid(small_spec());
  const ReplicateRecord a = run_replicate(grid[0], 3);
  const ReplicateRecord b = run_replicate(grid[0], 3);
  CHECK(records_equal(a, b));
  const ReplicateRecord c = run_replicate(grid[0], 4);
  CHECK_FALSE(records_equal(a, c));
}

TEST_CASE("psi identities survive the full pipeline") {
  StudySpec spec = small_spec();
  spec.ttp_settings = {builtin_ttp_setting("no_winners")};
  spec.replicates = 3;
  const auto grid = expand_grid(spec);
  const auto records = run_scenario_serial(grid[0]);
  for (const auto& r : records) {
    double s2 = 0.0, s3 = 0.0;
    for (const auto& a : r.arms) {
      s2 += a.psi2;
      s3 += a.psi3;
      CHECK(a.psi3 >= a.psi2);
    }
    CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s3 == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("serial and parallel paths agree bit for bit") {
  StudySpec spec = small_spec();
  spec.replicates = 10;
  const auto grid = expand_grid(spec);
  const auto serial = run_scenario_serial(grid[0]);
  for (int workers : {2, 4, 8}) {
    const auto par = run_scenario_parallel(grid[0], workers);
    REQUIRE(par.size() == serial.size());
    for (std::size_t r = 0; r < serial.size(); ++r)
      CHECK(records_equal(serial[r], par[r]));
    CHECK(oc_equal(aggregate(grid[0], serial), aggregate(grid[0], par)));
  }
}

TEST_CASE("aggregation matches a hand tally and ignores record order") {
  StudySpec spec = small_spec();
  const auto grid = expand_grid(spec);
  const ScenarioConfig& sc = grid[0];

  // four hand-built records over 5 arms
  auto mk = [&](FinalDecision f, TppDecision t, int events, double psi2) {
    ReplicateRecord r;
    r.converged = true;
    r.arms.resize(5);
    for (int k = 0; k < 5; ++k) {
      r.arms[k].unfavorable = events;
      r.arms[k].psi2 = psi2;
      r.arms[k].psi3 = std::min(1.0, 2 * psi2);
      r.arms[k].theta_median = 10.0 * k;
      r.arms[k].final_decision = f;
      r.arms[k].tpp = t;
      r.arms[k].lack_of_benefit = events >= 2;
    }
    return r;
  };
  std::vector<ReplicateRecord> records{
      mk(FinalDecision::kGo, TppDecision::kGo, 0, 0.9),
      mk(FinalDecision::kGo, TppDecision::kGo, 1, 0.5),
      mk(FinalDecision::kStop, TppDecision::kNoGo, 2, 0.1),
      mk(FinalDecision::kContinue, TppDecision::kContinue, 0, 0.3),
  };
  const OperatingCharacteristics oc = aggregate(sc, records);
  const auto& arm1 = oc.arms[1];
  CHECK(arm1.go_rate == 0.5);
  CHECK(arm1.stop_rate == 0.25);
  CHECK(arm1.continue_rate == 0.25);
  CHECK(arm1.tpp_nogo_rate == 0.25);
  CHECK(arm1.lob_flag_rate == 0.25);
  CHECK(arm1.mean_unfavorable == 0.75);
  CHECK(arm1.median_psi2 == doctest::Approx(0.4));
  CHECK(arm1.mean_theta_median == doctest::Approx(10.0));
  // arm 1 in 'one_winner' x 'mixed' is suboptimal: false-go defined
  CHECK(arm1.truth_class == TruthClass::kSuboptimal);
  CHECK(arm1.false_go_rate == 0.5);
  CHECK(std::isnan(arm1.false_no_go_rate));
  // arm 4 (2.5% rate) is desirable: false-no-go defined
  CHECK(oc.arms[4].truth_class == TruthClass::kDesirable);
  CHECK(oc.arms[4].false_no_go_rate == 0.25);
  CHECK(std::isnan(oc.arms[4].false_go_rate));
  // control has no decision rates
  CHECK(std::isnan(oc.arms[0].go_rate));
  CHECK(oc.arms[0].lob_flag_rate == 0.25);
  // true ranking fields for one_winner
  CHECK(oc.true_best_arm == 4);
  CHECK(oc.true_second_arm == 3);

  // permutation leaves the aggregate bit-identical
  std::vector<ReplicateRecord> shuffled{records[2], records[0], records[3],
                                        records[1]};
  CHECK(oc_equal(oc, aggregate(sc, shuffled)));
}

TEST_CASE("mcse matches the binomial formula") {
  CHECK(binomial_mcse(0.453, 1000) == doctest::Approx(0.0157398).epsilon(1e-4));
  CHECK(binomial_mcse(1.0, 50) == 0.0);  // unanimous decisions have zero MCSE
  StudySpec spec = small_spec();
  const auto grid = expand_grid(spec);
  std::vector<ReplicateRecord> records;
  for (int i = 0; i < 1000; ++i) {
    ReplicateRecord r;
    r.converged = true;
    r.arms.resize(5);
    for (int k = 0; k < 5; ++k) {
      r.arms[k].tpp = i < 453 ? TppDecision::kNoGo : TppDecision::kGo;
      r.arms[k].final_decision =
          i < 453 ? FinalDecision::kStop : FinalDecision::kGo;
    }
    records.push_back(std::move(r));
  }
  const OperatingCharacteristics oc = aggregate(grid[0], records);
  CHECK(oc.arms[1].tpp_nogo_rate == 0.453);
  CHECK(oc.arms[1].tpp_nogo_mcse == doctest::Approx(0.0157398).epsilon(1e-4));
}

TEST_CASE("null scenario: posterior medians center on zero") {
  StudySpec spec = small_spec();
  spec.ttp_settings = {builtin_ttp_setting("no_winners")};
  spec.rate_settings = {builtin_rate_setting("all_minimal")};
  spec.replicates = 200;
  spec.seed = 777;
  const auto grid = expand_grid(spec);
  const auto records = run_scenario(grid[0], 0);
  const OperatingCharacteristics oc = aggregate(grid[0], records);
  for (int k = 1; k < 5; ++k) {
    std::vector<double> medians;
    for (const auto& r : records) medians.push_back(r.arms[k].theta_median);
    const double mcse =
        std::sqrt(sample_variance(medians) / medians.size());
    CHECK(std::fabs(oc.arms[k].mean_theta_median) < 3.0 * mcse);
  }
}

TEST_CASE("scenario failures surface as exceptions in both paths") {
  StudySpec spec = small_spec();
  auto grid = expand_grid(spec);
  grid[0].design.n_per_arm = 0;  // broken resolved config
  CHECK_THROWS(run_scenario_serial(grid[0]));
  CHECK_THROWS(run_scenario_parallel(grid[0], 4));
}
