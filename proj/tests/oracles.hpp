#pragma once

// Independent reference computations used by the tests.

#include "phantomhaz/hazard.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Fixed-panel composite Simpson rule on [a, b] with 2n panels. Both ends
/// are evaluated just inside the piece so jumps at a or b (possibly displaced by rounding)
/// do not leak into the piece.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  const double h = (b - a) / (2 * n);
  double s = f(a + 1e-10 * (b - a)) + f(b - 1e-10 * (b - a));
  for (int i = 1; i < 2 * n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Simpson over consecutive [cuts[i], cuts[i+1]] so kinks fall on panel edges.
inline double simpson_pieces(const std::function<double(double)>& f, std::vector<double> cuts, int n = 400) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) total += simpson(f, cuts[i], cuts[i + 1], n);
  }
  return total;
}

/// Cumulative hazard by summing rate * overlap, written from the definition.
inline double cumhaz(const std::vector<double>& bps, const std::vector<double>& rates, double t) {
  double total = 0.0;
  double lo = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double hi = i < bps.size() ? bps[i] : INFINITY;
    if (t > lo) total += rates[i] * (std::min(t, hi) - lo);
    lo = hi;
  }
  return total;
}

struct RandomPem {
  std::vector<double> bps;
  std::vector<double> rates;
  phantomhaz::PiecewiseHazard hazard() const {
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(bps.data(), bps.size());
    Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(rates.data(), rates.size());
    return phantomhaz::PiecewiseHazard::from_rates(b, r);
  }
};

template <typename Rng>
RandomPem random_pem(Rng& rng) {
  std::uniform_int_distribution<int> count(0, 4);
  std::uniform_real_distribution<double> gap(1.0, 30.0);
  std::uniform_real_distribution<double> log_rate(std::log(1e-3), std::log(5e-2));
  RandomPem p;
  const int n = count(rng);
  double t = 0.0;
  for (int i = 0; i < n; ++i) p.bps.push_back(t += gap(rng));
  for (int i = 0; i <= n; ++i) p.rates.push_back(std::exp(log_rate(rng)));
  return p;
}

}  // namespace oracle
