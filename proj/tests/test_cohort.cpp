#include "phantomhaz/bias.hpp"
#include "phantomhaz/cohort.hpp"
#include "phantomhaz/inference.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace phantomhaz;

namespace {

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

std::vector<double> times(const std::vector<EpisodeRecord>& eps) {
  std::vector<double> t;
  for (const auto& e : eps) t.push_back(e.time);
  return t;
}

}  // namespace

TEST_SUITE("cohort") {

TEST_CASE("baseline calibration") {
  const auto h = calibrate_baseline({{7.0, 0.07}, {30.0, 0.17}});
  CHECK(std::exp(h.log_hazards()[0]) == doctest::Approx(-std::log(0.93) / 7.0).epsilon(1e-14));
  CHECK(std::exp(h.log_hazards()[1]) == doctest::Approx(-std::log(0.83 / 0.93) / 23.0).epsilon(1e-14));
  CHECK(std::abs(std::exp(h.log_hazards()[0]) - 0.010367) < 1e-6);
  CHECK(std::abs(std::exp(h.log_hazards()[1]) - 0.0049466) < 1e-6);
  CHECK(std::abs(1.0 - survival(h, 7.0) - 0.07) < 1e-12);
  CHECK(std::abs(1.0 - survival(h, 30.0) - 0.17) < 1e-12);

  CHECK_THROWS_AS(calibrate_baseline({{30.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_baseline({{7.0, 0.1}, {30.0, 0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_baseline({{7.0, 0.1}, {5.0, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_baseline({{7.0, 1.0}}), std::invalid_argument);

  const auto grid = log_hazards_on_grid(h, {7, 28, 63});
  CHECK(grid.size() == 4);
  CHECK(grid[0] == h.log_hazards()[0]);
  CHECK(grid[3] == h.log_hazards()[1]);
  CHECK_THROWS(log_hazards_on_grid(h, {28, 63}));
}

TEST_CASE("null-effect day-7 cohort reproduces the naive treated rate") {
  const auto sim = simulate(example1_config(100000, 5));
  const auto r = naive_crosstab_effect(sim.episodes, 30.0, 0);
  const double p = 0.10 / 0.93;
  CHECK(std::abs(r.rate_treated - p) < 3 * std::sqrt(p * (1 - p) / r.n_treated));
  CHECK(std::abs(r.rate_overall - 0.17) < 3 * std::sqrt(0.17 * 0.83 / sim.episodes.size()));
}

TEST_CASE("negligible hazard censors everyone at the administrative day") {
  auto cfg = example1_config(2000, 6);
  cfg.truth.block(Block::alpha).head(cfg.structure->intervals()).setConstant(std::log(1e-12));
  const auto sim = simulate(cfg);
  for (const auto& e : sim.episodes) {
    CHECK_FALSE(e.event);
    CHECK(e.time == 365.0);
  }
}

TEST_CASE("event rate without interventions matches the baseline PEM") {
  auto cfg = example1_config(50000, 7, 0.0);
  const auto sim = simulate(cfg);
  const auto h = calibrate_baseline({{7.0, 0.07}, {30.0, 0.17}});
  for (double c : {7.0, 30.0, 90.0, 365.0}) {
    double events = 0;
    for (const auto& e : sim.episodes) events += e.event && e.time <= c;
    const double p = 1.0 - survival(h, c);
    const double n = static_cast<double>(sim.episodes.size());
    CHECK(std::abs(events / n - p) < 3 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("recorded interventions precede the observed time") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto sim = simulate(recovery_config(3000, seed));
    for (const auto& e : sim.episodes) {
      for (const auto& iv : e.interventions) CHECK(iv.time < e.time);
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(2);
      for (const auto& iv : e.interventions) counts[iv.category] += 1;
      CHECK(counts == e.counts);
      CHECK(e.exposure == e.time);
    }
  }
}

TEST_CASE("without effects the intervention mechanism leaves T unchanged") {
  const std::size_t n = 20000;
  const auto off = simulate(example1_config(n, 8, 0.0));
  const auto on = simulate(example1_config(n, 8, 1.0));
  const double crit = 1.628 * std::sqrt(2.0 / n);
  CHECK(ks_statistic(times(off.episodes), times(on.episodes)) < crit);
  const auto other_seed = simulate(example1_config(n, 9, 1.0));
  CHECK(ks_statistic(times(off.episodes), times(other_seed.episodes)) < crit);
}

TEST_CASE("simulated cohorts feed the model directly") {
  const auto cfg = recovery_config(2000, 10);
  const auto sim = simulate(cfg);
  CHECK_NOTHROW(validate_episodes(*cfg.structure, sim.episodes));
  const auto p = initial_params(cfg.structure, sim.episodes);
  for (const auto& e : sim.episodes) CHECK(std::isfinite(episode_loglik(p, e)));
}

TEST_CASE("per-episode streams make output independent of cohort size") {
  const auto small = simulate(recovery_config(100, 11));
  const auto large = simulate(recovery_config(300, 11));
  for (std::size_t i = 0; i < small.episodes.size(); ++i) {
    CHECK(small.episodes[i].time == large.episodes[i].time);
    CHECK(small.episodes[i].x == large.episodes[i].x);
    CHECK(small.episodes[i].kappa == large.episodes[i].kappa);
  }
}

TEST_CASE("configuration checks") {
  auto cfg = example1_config(10, 1);
  cfg.censor_day = 0;
  CHECK_THROWS(simulate(cfg));
  cfg = example1_config(10, 1);
  cfg.timing[0].uptake = 1.5;
  CHECK_THROWS(simulate(cfg));
  cfg = recovery_config(10, 1);
  cfg.feature_rates[3] = -0.1;
  CHECK_THROWS(simulate(cfg));
}

TEST_CASE("horizon risk ignores interventions") {
  auto cfg = example1_config(10, 1);
  cfg.truth.block(Block::gamma).setConstant(-1.0);
  EpisodeRecord e;
  e.x = Eigen::VectorXd(0);
  e.kappa = {0};
  e.counts = Eigen::VectorXd::Zero(1);
  e.interventions = {{7.0, 0, 0.0}};
  CHECK(horizon_risk(cfg.truth, e, 30.0) == doctest::Approx(0.17).epsilon(1e-12));
}

}
