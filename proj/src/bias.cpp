#include "phantomhaz/bias.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace phantomhaz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNormalizationTolerance = 1e-8;

/// Pr(tau > t) under the administration density.
double admin_tail(const AdminDensity& admin, double t) {
  if (const auto* p = std::get_if<AdminDensity::PointMass>(&admin.repr())) return p->at > t ? 1.0 : 0.0;
  return admin.mass(t, kInf);
}

}  // namespace

void PhantomQuery::validate() const {
  if (!(horizon > 0) || !std::isfinite(horizon)) {
    throw PreconditionError("PhantomQuery: horizon must be positive and finite");
  }
  const double total = admin.mass(0.0, kInf);
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw PreconditionError("PhantomQuery: administration density integrates to " + std::to_string(total));
  }
}

double phantom_joint(const PhantomQuery& q) {
  q.validate();
  const double s_c = q.f_inf.survival(q.horizon);
  return q.admin.expectation([&](double tau) { return q.f_inf.survival(tau) - s_c; }, 0.0, q.horizon);
}

double phantom_conditional(const PhantomQuery& q) {
  const double joint = phantom_joint(q);
  const double reach = q.admin.expectation([&](double tau) { return q.f_inf.survival(tau); });
  if (!(reach > 1e-300)) {
    throw DegenerateConditioning("phantom_conditional: nobody survives to receive the intervention");
  }
  return joint / reach;
}

CrosstabResult naive_crosstab_effect(std::span<const EpisodeRecord> episodes, double horizon, int category) {
  if (!(horizon > 0)) throw PreconditionError("naive_crosstab_effect: horizon must be positive");
  std::size_t events_treated = 0;
  std::size_t events_untreated = 0;
  CrosstabResult r;
  for (std::size_t n = 0; n < episodes.size(); ++n) {
    const auto& e = episodes[n];
    const bool event = e.event && e.time <= horizon;
    if (!event && e.time < horizon) {
      throw PreconditionError("naive_crosstab_effect: episode " + e.id + " is censored before the horizon");
    }
    bool treated = false;
    for (const auto& iv : e.interventions) treated = treated || iv.category == category;
    if (treated) {
      ++r.n_treated;
      events_treated += event;
    } else {
      ++r.n_untreated;
      events_untreated += event;
    }
  }
  if (r.n_treated == 0) throw EmptyStratum("naive_crosstab_effect: the treated stratum is empty");
  if (r.n_untreated == 0) throw EmptyStratum("naive_crosstab_effect: the untreated stratum is empty");
  const double nt = static_cast<double>(r.n_treated);
  const double nu = static_cast<double>(r.n_untreated);
  r.rate_treated = events_treated / nt;
  r.rate_untreated = events_untreated / nu;
  r.rate_overall = (events_treated + events_untreated) / (nt + nu);
  r.apparent_effect = r.rate_treated - r.rate_overall;
  r.standard_error = std::sqrt(r.rate_treated * (1 - r.rate_treated) / nt +
                               r.rate_overall * (1 - r.rate_overall) / (nt + nu));
  return r;
}

ConditionalWaitDensities conditional_wait_densities(const WaitTimeDensity& f_inf, const AdminDensity& admin,
                                                    std::optional<PostDensityMaker> post) {
  ConditionalWaitDensities out;
  out.not_observed = [f_inf](double t) { return f_inf.pdf(t); };

  const double pr_before = admin.expectation([&](double tau) { return f_inf.cdf(tau); });
  out.not_observed_normalized = [f_inf, admin, pr_before](double t) {
    if (!(pr_before > 0)) return 0.0;
    return f_inf.pdf(t) * admin_tail(admin, t) / pr_before;
  };

  if (!post) {
    // With the null family g_tau(t - tau) S(tau) = f(t) whenever tau <= t.
    out.observed = [f_inf, admin](double t) {
      if (t < 0) return 0.0;
      return f_inf.pdf(t) * (1.0 - admin_tail(admin, t));
    };
    return out;
  }
  PostDensityMaker maker = *post;
  out.observed = [f_inf, admin, maker](double t) {
    if (t < 0) return 0.0;
    auto integrand = [&](double tau) {
      const double s = f_inf.survival(tau);
      if (!(s > 0)) return 0.0;
      return maker(tau).pdf(t - tau) * s;
    };
    return admin.expectation(integrand, 0.0, t);
  };
  return out;
}

}  // namespace phantomhaz
