#pragma once

// Hazard functions, wait-time densities and the intervention-censored
// composite densities built from them.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace phantomhaz {

/// Raised when a time argument lies outside [0, inf).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when conditioning on an event of (numerically) zero probability.
class DegenerateConditioning : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an input violates a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Default PEM breakpoints: 1, 4 and 9 weeks after discharge.
inline const std::vector<double>& default_breakpoints() {
  static const std::vector<double> days{7.0, 28.0, 63.0};
  return days;
}

inline void require_time(double t, const char* what) {
  if (!(t >= 0.0)) {
    throw DomainError(std::string(what) + ": time must be >= 0, got " + std::to_string(t));
  }
}

/// Piecewise-constant hazard on [0, inf).
///
/// Interval i covers [t_{i-1}, t_i) with t_0 = 0 and t_{intervals} = inf; a
/// time exactly on a breakpoint belongs to the later interval.
template <typename Scalar>
class BasicPiecewiseHazard {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicPiecewiseHazard() : log_hazards_(Vector::Zero(1)) {}

  BasicPiecewiseHazard(Vector breakpoints, Vector log_hazards)
      : breakpoints_(std::move(breakpoints)), log_hazards_(std::move(log_hazards)) {
    if (log_hazards_.size() != breakpoints_.size() + 1) {
      throw PreconditionError("PiecewiseHazard: need exactly breakpoints + 1 log-hazards");
    }
    for (Eigen::Index i = 0; i < breakpoints_.size(); ++i) {
      if (!(breakpoints_[i] > 0) || !std::isfinite(breakpoints_[i]) ||
          (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1]))) {
        throw PreconditionError("PiecewiseHazard: breakpoints must be finite, > 0 and strictly increasing");
      }
    }
    for (Eigen::Index i = 0; i < log_hazards_.size(); ++i) {
      if (!std::isfinite(log_hazards_[i])) {
        throw PreconditionError("PiecewiseHazard: log-hazards must be finite");
      }
    }
  }

  static BasicPiecewiseHazard constant(Scalar rate) {
    return from_rates(Vector(0), Vector::Constant(1, rate));
  }

  static BasicPiecewiseHazard from_rates(const Vector& breakpoints, const Vector& rates) {
    if ((rates.array() <= 0).any()) {
      throw PreconditionError("PiecewiseHazard: rates must be > 0");
    }
    return BasicPiecewiseHazard(breakpoints, rates.array().log().matrix());
  }

  Eigen::Index intervals() const { return log_hazards_.size(); }
  const Vector& breakpoints() const { return breakpoints_; }
  const Vector& log_hazards() const { return log_hazards_; }

  Scalar interval_start(Eigen::Index i) const { return i == 0 ? Scalar(0) : breakpoints_[i - 1]; }
  Scalar interval_end(Eigen::Index i) const {
    return i + 1 == intervals() ? std::numeric_limits<Scalar>::infinity() : breakpoints_[i];
  }

  /// Index of the interval containing t (left-closed).
  Eigen::Index interval(Scalar t) const {
    const Scalar* first = breakpoints_.data();
    const Scalar* last = first + breakpoints_.size();
    return static_cast<Eigen::Index>(std::upper_bound(first, last, t) - first);
  }

  Scalar rate(Scalar t) const { return std::exp(log_hazards_[interval(t)]); }

  /// Hazard of the remaining wait after surviving to tau: u -> rate(tau + u).
  BasicPiecewiseHazard shifted(Scalar tau) const {
    require_time(static_cast<double>(tau), "PiecewiseHazard::shifted");
    const Eigen::Index first = interval(tau);
    const Eigen::Index kept = intervals() - first;
    Vector bp(kept - 1);
    for (Eigen::Index i = 0; i + 1 < kept; ++i) bp[i] = breakpoints_[first + i] - tau;
    return BasicPiecewiseHazard(bp, log_hazards_.tail(kept));
  }

  /// Same breakpoints, every log-hazard shifted by `log_ratio`.
  BasicPiecewiseHazard scaled(Scalar log_ratio) const {
    return BasicPiecewiseHazard(breakpoints_, (log_hazards_.array() + log_ratio).matrix());
  }

  /// Adds `log_ratio` to the hazard on [tau, inf), inserting tau as a breakpoint.
  BasicPiecewiseHazard with_step(Scalar tau, Scalar log_ratio) const {
    require_time(static_cast<double>(tau), "PiecewiseHazard::with_step");
    if (tau == 0) return scaled(log_ratio);
    const Eigen::Index at = interval(tau);
    const bool existing = at > 0 && breakpoints_[at - 1] == tau;
    const Eigen::Index n_bp = breakpoints_.size() + (existing ? 0 : 1);
    Vector bp(n_bp);
    Vector lh(n_bp + 1);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < intervals(); ++i) {
      const Scalar lo = interval_start(i);
      const Scalar hi = interval_end(i);
      if (!existing && lo < tau && tau < hi) {
        lh[j] = log_hazards_[i];
        bp[j] = tau;
        ++j;
        lh[j] = log_hazards_[i] + log_ratio;
      } else {
        lh[j] = log_hazards_[i] + (lo >= tau ? log_ratio : Scalar(0));
      }
      if (i + 1 < intervals()) bp[j] = breakpoints_[i];
      ++j;
    }
    return BasicPiecewiseHazard(bp, lh);
  }

 private:
  Vector breakpoints_;
  Vector log_hazards_;
};

using PiecewiseHazard = BasicPiecewiseHazard<double>;

/// Lambda(t): exact piecewise-linear integral of the hazard over [0, t].
template <typename Scalar>
Scalar cumulative_hazard(const BasicPiecewiseHazard<Scalar>& h, Scalar t) {
  require_time(static_cast<double>(t), "cumulative_hazard");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < h.intervals(); ++i) {
    const Scalar lo = h.interval_start(i);
    if (lo >= t) break;
    const Scalar hi = std::min(h.interval_end(i), t);
    total += std::exp(h.log_hazards()[i]) * (hi - lo);
  }
  return total;
}

template <typename Scalar>
Scalar survival(const BasicPiecewiseHazard<Scalar>& h, Scalar t) {
  return std::exp(-cumulative_hazard(h, t));
}

/// f(t) = lambda(t) exp(-Lambda(t)).
template <typename Scalar>
Scalar density(const BasicPiecewiseHazard<Scalar>& h, Scalar t) {
  require_time(static_cast<double>(t), "density");
  return h.rate(t) * std::exp(-cumulative_hazard(h, t));
}

/// Smallest t with Lambda(t) = target (inverse of the cumulative hazard).
template <typename Scalar>
Scalar inverse_cumulative_hazard(const BasicPiecewiseHazard<Scalar>& h, Scalar target) {
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < h.intervals(); ++i) {
    const Scalar rate = std::exp(h.log_hazards()[i]);
    const Scalar lo = h.interval_start(i);
    const Scalar hi = h.interval_end(i);
    const Scalar mass = rate * (hi - lo);
    if (acc + mass >= target || i + 1 == h.intervals()) {
      return lo + (target - acc) / rate;
    }
    acc += mass;
  }
  return std::numeric_limits<Scalar>::infinity();
}

/// Probability density of a wait time on [0, inf).
///
/// Either a piecewise hazard (every quantity in closed form) or a generic
/// density callable. Generic densities are integrated by adaptive Simpson up to
/// `horizon`; whatever mass remains beyond it is treated as a single lump.
class WaitTimeDensity {
 public:
  using Pdf = std::function<double(double)>;

  static constexpr double kDefaultHorizon = 3650.0;
  static constexpr double kQuadratureTolerance = 1e-9;

  explicit WaitTimeDensity(PiecewiseHazard hazard) : repr_(std::move(hazard)) {}

  static WaitTimeDensity generic(Pdf pdf, double horizon = kDefaultHorizon);

  bool is_piecewise() const { return std::holds_alternative<PiecewiseHazard>(repr_); }
  /// The underlying hazard, or nullptr for a generic density.
  const PiecewiseHazard* hazard() const { return std::get_if<PiecewiseHazard>(&repr_); }
  double horizon() const { return horizon_; }

  double pdf(double t) const;
  double survival(double t) const;
  double cdf(double t) const { return 1.0 - survival(t); }
  /// Integral of the density over [0, inf) (closed form or quadrature + tail lump).
  double total_mass() const;

  /// Inverse-CDF draw.
  template <typename Rng>
  double sample(Rng& rng) const {
    std::exponential_distribution<double> unit(1.0);
    return sample_from_exponential(unit(rng));
  }

  /// Maps a unit-exponential variate e to the wait time t with -log S(t) = e.
  double sample_from_exponential(double e) const;

 private:
  struct Generic {
    Pdf pdf;
  };

  WaitTimeDensity(Generic g, double horizon) : repr_(std::move(g)), horizon_(horizon) {}

  std::variant<PiecewiseHazard, Generic> repr_;
  double horizon_ = std::numeric_limits<double>::infinity();
};

/// Density that leaves the wait time unchanged: g(s) = f(tau + s) / S(tau).
WaitTimeDensity null_post_density(const WaitTimeDensity& f_inf, double tau);

/// Composite density: f_inf before tau, g(t - tau) S_inf(tau) afterwards.
double composite_density_single(const WaitTimeDensity& f_inf, const WaitTimeDensity& g, double tau,
                                double t);

/// Density over intervention administration time.
class AdminDensity {
 public:
  struct PointMass {
    double at;
  };
  struct Uniform {
    double lo, hi;
  };
  /// Histogram: weights[i] spread uniformly on [edges[i], edges[i+1]).
  struct Tabulated {
    std::vector<double> edges;
    std::vector<double> weights;
  };

  static AdminDensity point_mass(double at);
  static AdminDensity uniform(double lo, double hi);
  static AdminDensity tabulated(std::vector<double> edges, std::vector<double> weights);

  /// Integral of phi(tau) h(tau) over [lower, upper].
  double expectation(const std::function<double(double)>& phi, double lower = 0.0,
                     double upper = std::numeric_limits<double>::infinity()) const;
  double mass(double lower, double upper) const {
    return expectation([](double) { return 1.0; }, lower, upper);
  }
  /// Probability density (0 for a point mass except through `expectation`).
  double pdf(double tau) const;
  /// Time below which all mass lies.
  double support_end() const;
  bool is_point_mass() const { return std::holds_alternative<PointMass>(repr_); }

  template <typename Rng>
  double sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return sample_from_uniform(u(rng));
  }
  double sample_from_uniform(double u) const;

  const std::variant<PointMass, Uniform, Tabulated>& repr() const { return repr_; }

 private:
  explicit AdminDensity(std::variant<PointMass, Uniform, Tabulated> r) : repr_(std::move(r)) {}
  std::variant<PointMass, Uniform, Tabulated> repr_;
};

struct Intervention {
  double time = 0.0;
  int category = 0;
  double effect = 0.0;  ///< log-hazard ratio applied from `time` onwards
};

/// Ordered interventions; ties are ordered by category id.
struct InterventionSchedule {
  std::vector<Intervention> items;
  std::optional<AdminDensity> admin;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  bool is_sorted() const;
  /// Copy with items ordered by (time, category), stable otherwise.
  InterventionSchedule sorted() const;
};

/// Post-treatment densities g_1..g_N implied by proportional effects: after
/// the n-th intervention the hazard is the base hazard times exp(sum of the
/// first n effects), and g_n is the wait from tau_n under that hazard.
std::vector<WaitTimeDensity> proportional_effect_family(const PiecewiseHazard& base,
                                                        const InterventionSchedule& schedule);

/// Null family: every g_n leaves the wait time unchanged.
std::vector<WaitTimeDensity> null_effect_family(const WaitTimeDensity& f_inf,
                                                const InterventionSchedule& schedule);

/// Density of T under a sequence of interventions, each of which only takes
/// effect if the event has not happened yet. gs[n-1] is the density of the
/// remaining wait after intervention n when no later intervention applies.
double composite_density_multi(const WaitTimeDensity& f_inf, std::span<const WaitTimeDensity> gs,
                               const InterventionSchedule& schedule, double t);

/// Survival function matching composite_density_multi.
double composite_survival_multi(const WaitTimeDensity& f_inf, std::span<const WaitTimeDensity> gs,
                                const InterventionSchedule& schedule, double t);

/// Segment-wise inverse-CDF draw from composite_density_multi.
template <typename Rng>
double sample_wait_time(const WaitTimeDensity& f_inf, std::span<const WaitTimeDensity> gs,
                        const InterventionSchedule& schedule, Rng& rng);

double sample_wait_time(const WaitTimeDensity& f_inf, std::span<const WaitTimeDensity> gs,
                        const InterventionSchedule& schedule, std::uint64_t seed);

// ---------------------------------------------------------------------------

namespace detail {
void check_family(std::span<const WaitTimeDensity> gs, const InterventionSchedule& schedule);
}

template <typename Rng>
double sample_wait_time(const WaitTimeDensity& f_inf, std::span<const WaitTimeDensity> gs,
                        const InterventionSchedule& schedule, Rng& rng) {
  detail::check_family(gs, schedule);
  std::exponential_distribution<double> unit(1.0);
  const auto& items = schedule.items;
  double t = f_inf.sample_from_exponential(unit(rng));
  if (items.empty() || t < items.front().time) return t;
  for (std::size_t n = 0; n < items.size(); ++n) {
    const double start = items[n].time;
    const double s = gs[n].sample_from_exponential(unit(rng));
    if (n + 1 == items.size() || start + s < items[n + 1].time) return start + s;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace phantomhaz
