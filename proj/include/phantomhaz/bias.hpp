#pragma once

// Phantom effect of a null intervention that can only be received by those
// still waiting, and the naive cross-tabulation estimator it fools.

#include "phantomhaz/hazard.hpp"
#include "phantomhaz/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace phantomhaz {

struct PhantomQuery {
  WaitTimeDensity f_inf;
  AdminDensity admin;
  double horizon = 30.0;

  void validate() const;
};

/// Integral over tau in [0, c] of (S_inf(tau) - S_inf(c)) h(tau): the joint
/// probability of receiving the (null) intervention and an event by c.
double phantom_joint(const PhantomQuery& q);

/// phantom_joint normalised by Pr(T >= tau): event probability by c among
/// those who received the intervention.
double phantom_conditional(const PhantomQuery& q);

/// Raised when a cross-tabulation stratum has no members.
class EmptyStratum : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CrosstabResult {
  double rate_treated = 0.0;
  double rate_untreated = 0.0;
  /// Event rate by the horizon over every episode.
  double rate_overall = 0.0;
  /// rate_treated - rate_overall: the naive "with vs. without the
  /// intervention programme" comparison.
  double apparent_effect = 0.0;
  std::size_t n_treated = 0;
  std::size_t n_untreated = 0;
  /// Binomial standard error of apparent_effect, treating the two rates as independent.
  double standard_error = 0.0;
};

/// Deliberately biased estimator: cross-tabulates events within `horizon`
/// against having a recorded intervention of `category`.
CrosstabResult naive_crosstab_effect(std::span<const EpisodeRecord> episodes, double horizon,
                                     int category);

struct ConditionalWaitDensities {
  /// f(T | T < tau) as written: the pre-treatment density itself.
  std::function<double(double)> not_observed;
  /// The same event properly normalised: int f(T) 1{T < tau} h dtau / Pr(T < tau).
  std::function<double(double)> not_observed_normalized;
  /// int g_tau(T - tau) S_inf(tau) 1{tau <= T} h(tau) dtau (sub-density, mass Pr(T >= tau)).
  std::function<double(double)> observed;
};

/// Post-treatment density for an intervention administered at tau.
using PostDensityMaker = std::function<WaitTimeDensity(double tau)>;

/// Wait-time densities split by whether the intervention was observed. Uses
/// the null post-treatment density unless a maker is supplied.
ConditionalWaitDensities conditional_wait_densities(const WaitTimeDensity& f_inf,
                                                    const AdminDensity& admin,
                                                    std::optional<PostDensityMaker> post = std::nullopt);

}  // namespace phantomhaz
