#include "phantomhaz/hazard.hpp"

#include "phantomhaz/quadrature.hpp"

#include <numeric>

namespace phantomhaz {

namespace {

constexpr double kConditioningTolerance = 1e-300;

}  // namespace

WaitTimeDensity WaitTimeDensity::generic(Pdf pdf, double horizon) {
  if (!(horizon > 0) || !std::isfinite(horizon)) {
    throw PreconditionError("WaitTimeDensity: horizon must be finite and > 0");
  }
  return WaitTimeDensity(Generic{std::move(pdf)}, horizon);
}

double WaitTimeDensity::pdf(double t) const {
  require_time(t, "WaitTimeDensity::pdf");
  if (const auto* h = hazard()) return density(*h, t);
  if (t > horizon_) return 0.0;
  return std::get<Generic>(repr_).pdf(t);
}

double WaitTimeDensity::survival(double t) const {
  require_time(t, "WaitTimeDensity::survival");
  if (const auto* h = hazard()) return phantomhaz::survival(*h, t);
  const auto& g = std::get<Generic>(repr_);
  const double upper = std::min(t, horizon_);
  return 1.0 - adaptive_simpson(g.pdf, 0.0, upper, kQuadratureTolerance);
}

double WaitTimeDensity::total_mass() const {
  if (hazard() != nullptr) {
    // The last interval has a positive constant rate, so S(inf) = 0 exactly.
    return 1.0;
  }
  // Mass on [0, horizon] plus the lump beyond it is 1 by construction only if
  // the callable is a density; report the quadrature value so callers can check.
  const auto& g = std::get<Generic>(repr_);
  return adaptive_simpson(g.pdf, 0.0, horizon_, kQuadratureTolerance);
}

double WaitTimeDensity::sample_from_exponential(double e) const {
  if (const auto* h = hazard()) return inverse_cumulative_hazard(*h, e);
  // Bisection on -log S(t) = e; draws beyond the horizon land on it.
  const double target = -std::expm1(-e);
  if (cdf(horizon_) <= target) return horizon_;
  double lo = 0.0;
  double hi = horizon_;
  for (int iter = 0; iter < 100 && hi - lo > 1e-10 * std::max(1.0, hi); ++iter) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

WaitTimeDensity null_post_density(const WaitTimeDensity& f_inf, double tau) {
  require_time(tau, "null_post_density");
  const double s_tau = f_inf.survival(tau);
  if (!(s_tau > kConditioningTolerance)) {
    throw DegenerateConditioning("null_post_density: survival to tau is zero");
  }
  if (const auto* h = f_inf.hazard()) return WaitTimeDensity(h->shifted(tau));
  const double horizon = std::max(f_inf.horizon() - tau, 1e-9);
  return WaitTimeDensity::generic(
      [f_inf, tau, s_tau](double s) { return f_inf.pdf(tau + s) / s_tau; }, horizon);
}

double composite_density_single(const WaitTimeDensity& f_inf, const WaitTimeDensity& g, double tau,
                                double t) {
  require_time(t, "composite_density_single");
  require_time(tau, "composite_density_single");
  if (t < tau) return f_inf.pdf(t);
  return g.pdf(t - tau) * f_inf.survival(tau);
}

// ---------------------------------------------------------------------------
// AdminDensity

AdminDensity AdminDensity::point_mass(double at) {
  require_time(at, "AdminDensity::point_mass");
  return AdminDensity(PointMass{at});
}

AdminDensity AdminDensity::uniform(double lo, double hi) {
  require_time(lo, "AdminDensity::uniform");
  if (!(hi > lo) || !std::isfinite(hi)) {
    throw PreconditionError("AdminDensity::uniform: need lo < hi < inf");
  }
  return AdminDensity(Uniform{lo, hi});
}

AdminDensity AdminDensity::tabulated(std::vector<double> edges, std::vector<double> weights) {
  if (edges.size() != weights.size() + 1 || weights.empty()) {
    throw PreconditionError("AdminDensity::tabulated: need edges.size() == weights.size() + 1");
  }
  require_time(edges.front(), "AdminDensity::tabulated");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i + 1] > edges[i])) {
      throw PreconditionError("AdminDensity::tabulated: edges must be strictly increasing");
    }
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0)) throw PreconditionError("AdminDensity::tabulated: negative weight");
    total += w;
  }
  if (!(total > 0)) throw PreconditionError("AdminDensity::tabulated: weights sum to zero");
  for (double& w : weights) w /= total;
  return AdminDensity(Tabulated{std::move(edges), std::move(weights)});
}

double AdminDensity::expectation(const std::function<double(double)>& phi, double lower,
                                 double upper) const {
  constexpr double tol = 1e-12;
  if (const auto* p = std::get_if<PointMass>(&repr_)) {
    return (p->at >= lower && p->at <= upper) ? phi(p->at) : 0.0;
  }
  auto bin = [&](double lo, double hi, double weight) {
    const double a = std::max(lo, lower);
    const double b = std::min(hi, upper);
    if (!(b > a)) return 0.0;
    return weight / (hi - lo) * adaptive_simpson(phi, a, b, tol);
  };
  if (const auto* u = std::get_if<Uniform>(&repr_)) return bin(u->lo, u->hi, 1.0);
  const auto& tab = std::get<Tabulated>(repr_);
  double total = 0.0;
  for (std::size_t i = 0; i < tab.weights.size(); ++i) {
    if (tab.weights[i] > 0) total += bin(tab.edges[i], tab.edges[i + 1], tab.weights[i]);
  }
  return total;
}

double AdminDensity::pdf(double tau) const {
  if (std::holds_alternative<PointMass>(repr_)) return 0.0;
  if (const auto* u = std::get_if<Uniform>(&repr_)) {
    return (tau >= u->lo && tau < u->hi) ? 1.0 / (u->hi - u->lo) : 0.0;
  }
  const auto& tab = std::get<Tabulated>(repr_);
  for (std::size_t i = 0; i < tab.weights.size(); ++i) {
    if (tau >= tab.edges[i] && tau < tab.edges[i + 1]) {
      return tab.weights[i] / (tab.edges[i + 1] - tab.edges[i]);
    }
  }
  return 0.0;
}

double AdminDensity::support_end() const {
  if (const auto* p = std::get_if<PointMass>(&repr_)) return p->at;
  if (const auto* u = std::get_if<Uniform>(&repr_)) return u->hi;
  return std::get<Tabulated>(repr_).edges.back();
}

double AdminDensity::sample_from_uniform(double u) const {
  if (const auto* p = std::get_if<PointMass>(&repr_)) return p->at;
  if (const auto* un = std::get_if<Uniform>(&repr_)) return un->lo + u * (un->hi - un->lo);
  const auto& tab = std::get<Tabulated>(repr_);
  double acc = 0.0;
  for (std::size_t i = 0; i < tab.weights.size(); ++i) {
    if (u < acc + tab.weights[i] || i + 1 == tab.weights.size()) {
      const double frac = tab.weights[i] > 0 ? std::clamp((u - acc) / tab.weights[i], 0.0, 1.0) : 0.0;
      return tab.edges[i] + frac * (tab.edges[i + 1] - tab.edges[i]);
    }
    acc += tab.weights[i];
  }
  return tab.edges.back();
}

// ---------------------------------------------------------------------------
// Schedules and composites

bool InterventionSchedule::is_sorted() const {
  return std::is_sorted(items.begin(), items.end(), [](const Intervention& a, const Intervention& b) {
    return a.time < b.time || (a.time == b.time && a.category < b.category);
  });
}

InterventionSchedule InterventionSchedule::sorted() const {
  InterventionSchedule out = *this;
  std::stable_sort(out.items.begin(), out.items.end(), [](const Intervention& a, const Intervention& b) {
    return a.time < b.time || (a.time == b.time && a.category < b.category);
  });
  return out;
}

std::vector<WaitTimeDensity> proportional_effect_family(const PiecewiseHazard& base,
                                                        const InterventionSchedule& schedule) {
  if (!schedule.is_sorted()) throw PreconditionError("proportional_effect_family: schedule not sorted");
  std::vector<WaitTimeDensity> out;
  out.reserve(schedule.size());
  double cumulative = 0.0;
  for (const auto& item : schedule.items) {
    require_time(item.time, "proportional_effect_family");
    cumulative += item.effect;
    out.emplace_back(base.shifted(item.time).scaled(cumulative));
  }
  return out;
}

std::vector<WaitTimeDensity> null_effect_family(const WaitTimeDensity& f_inf,
                                                const InterventionSchedule& schedule) {
  std::vector<WaitTimeDensity> out;
  out.reserve(schedule.size());
  for (const auto& item : schedule.items) out.push_back(null_post_density(f_inf, item.time));
  return out;
}

namespace detail {

void check_family(std::span<const WaitTimeDensity> gs, const InterventionSchedule& schedule) {
  if (!schedule.is_sorted()) {
    throw PreconditionError("composite density: intervention schedule must be sorted by time");
  }
  if (gs.size() != schedule.size()) {
    throw PreconditionError("composite density: need one post-treatment density per intervention");
  }
  for (const auto& item : schedule.items) require_time(item.time, "composite density");
}

}  // namespace detail

double composite_density_multi(const WaitTimeDensity& f_inf, std::span<const WaitTimeDensity> gs,
                               const InterventionSchedule& schedule, double t) {
  require_time(t, "composite_density_multi");
  detail::check_family(gs, schedule);
  const auto& items = schedule.items;
  if (items.empty() || t < items.front().time) return f_inf.pdf(t);
  // Probability of still waiting at the start of the current segment.
  double reach = f_inf.survival(items.front().time);
  for (std::size_t n = 0; n < items.size(); ++n) {
    const double start = items[n].time;
    if (n + 1 == items.size() || t < items[n + 1].time) return gs[n].pdf(t - start) * reach;
    reach *= gs[n].survival(items[n + 1].time - start);
  }
  return 0.0;
}

double composite_survival_multi(const WaitTimeDensity& f_inf, std::span<const WaitTimeDensity> gs,
                                const InterventionSchedule& schedule, double t) {
  require_time(t, "composite_survival_multi");
  detail::check_family(gs, schedule);
  const auto& items = schedule.items;
  if (items.empty() || t < items.front().time) return f_inf.survival(t);
  double reach = f_inf.survival(items.front().time);
  for (std::size_t n = 0; n < items.size(); ++n) {
    const double start = items[n].time;
    if (n + 1 == items.size() || t < items[n + 1].time) return gs[n].survival(t - start) * reach;
    reach *= gs[n].survival(items[n + 1].time - start);
  }
  return 0.0;
}

double sample_wait_time(const WaitTimeDensity& f_inf, std::span<const WaitTimeDensity> gs,
                        const InterventionSchedule& schedule, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_wait_time(f_inf, gs, schedule, rng);
}

}  // namespace phantomhaz
