#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace phantomhaz {

namespace detail {

template <typename Scalar, typename F>
Scalar simpson_step(F& f, Scalar a, Scalar fa, Scalar b, Scalar fb, Scalar m, Scalar fm,
                    Scalar whole, Scalar tol, int depth) {
  const Scalar lm = (a + m) / 2;
  const Scalar rm = (m + b) / 2;
  const Scalar flm = f(lm);
  const Scalar frm = f(rm);
  const Scalar left = (m - a) / 6 * (fa + 4 * flm + fm);
  const Scalar right = (b - m) / 6 * (fm + 4 * frm + fb);
  const Scalar delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15 * tol) {
    return left + right + delta / 15;
  }
  return simpson_step(f, a, fa, m, fm, lm, flm, left, tol / 2, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, tol / 2, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] with Richardson correction.
///
/// The interval is pre-split into `initial_panels` pieces so that narrow
/// features (kinks from piecewise hazards, steps from point effects) are not
/// skipped by the first coarse estimate.
template <typename Scalar = double, typename F>
Scalar adaptive_simpson(F&& f, Scalar a, Scalar b, Scalar abs_tol = Scalar(1e-9),
                        int max_depth = 40, int initial_panels = 16) {
  if (!(b > a)) {
    if (a == b) return Scalar(0);
    return -adaptive_simpson<Scalar>(f, b, a, abs_tol, max_depth, initial_panels);
  }
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("adaptive_simpson: integration limits must be finite");
  }
  Scalar total = 0;
  const Scalar width = (b - a) / initial_panels;
  const Scalar panel_tol = abs_tol / initial_panels;
  for (int i = 0; i < initial_panels; ++i) {
    const Scalar lo = a + width * i;
    const Scalar hi = (i + 1 == initial_panels) ? b : lo + width;
    const Scalar mid = (lo + hi) / 2;
    const Scalar flo = f(lo);
    const Scalar fhi = f(hi);
    const Scalar fmid = f(mid);
    const Scalar whole = (hi - lo) / 6 * (flo + 4 * fmid + fhi);
    total += detail::simpson_step(f, lo, flo, hi, fhi, mid, fmid, whole, panel_tol, max_depth);
  }
  return total;
}

}  // namespace phantomhaz
