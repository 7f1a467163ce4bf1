#pragma once

// Synthetic cohorts drawn from the generative model with known parameters.

#include "phantomhaz/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

namespace phantomhaz {

/// Intervention at a fixed day.
struct PointMassTiming {
  double day = 7.0;
};

/// Intervention at a uniformly distributed day in [lo, hi).
struct UniformTiming {
  double lo = 0.0;
  double hi = 30.0;
};

/// Interventions arriving as a Poisson process with the episode's modelled
/// rate mu_k per rate period. `max_events` = 1 keeps only the first arrival.
struct RateTiming {
  int max_events = 1;
};

using TimingRule = std::variant<PointMassTiming, UniformTiming, RateTiming>;

struct CategoryTiming {
  TimingRule rule = PointMassTiming{};
  /// Probability that an episode is scheduled for the intervention at all
  /// (point-mass and uniform rules).
  double uptake = 1.0;
};

struct SimConfig {
  std::size_t n_episodes = 1000;
  std::shared_ptr<const ModelStructure> structure;
  /// True parameters; its lattice only needs the right axes.
  ModelParams truth;
  /// Level probabilities per axis (empty = uniform).
  std::vector<std::vector<double>> level_probs;
  /// Bernoulli rate per feature.
  std::vector<double> feature_rates;
  /// One timing rule per intervention category.
  std::vector<CategoryTiming> timing;
  double censor_day = 365.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimResult {
  std::vector<EpisodeRecord> episodes;
  ModelParams truth;
};

/// Draws every episode independently. Episode n uses its own random stream
/// derived from (seed, n), so results do not depend on generation order.
SimResult simulate(const SimConfig& cfg);

/// Piecewise-constant hazard whose cumulative distribution passes exactly
/// through each (day, probability) target.
PiecewiseHazard calibrate_baseline(const std::vector<std::pair<double, double>>& targets);

/// Log hazards of `h` on the intervals of `breakpoints`; every breakpoint of
/// `h` must be one of `breakpoints`.
Eigen::VectorXd log_hazards_on_grid(const PiecewiseHazard& h, const std::vector<double>& breakpoints);

/// Null-effect cohort shaped like the 7-day 7% / 30-day 17% example: one axis
/// with one level, no covariates, one category administered on day 7 with the
/// given uptake, and all effects zero.
SimConfig example1_config(std::size_t n_episodes, std::uint64_t seed, double uptake = 0.5);

/// Two-axis lattice, 20 covariates and two categories with recurring
/// rate-based interventions; beta varies only at leading order.
SimConfig recovery_config(std::size_t n_episodes, std::uint64_t seed);

/// Prediction risk 1 - S(c) at horizon c using the hazard without any
/// post-discharge interventions.
double horizon_risk(const ModelParams& p, const EpisodeRecord& e, double horizon);

}  // namespace phantomhaz
