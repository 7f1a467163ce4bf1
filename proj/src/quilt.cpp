#include "phantomhaz/quilt.hpp"

#include "phantomhaz/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace phantomhaz {

int Axis::level_index(const std::string& level) const {
  const auto it = std::find(levels.begin(), levels.end(), level);
  if (it == levels.end()) {
    throw std::out_of_range("axis '" + name + "' has no level '" + level + "'");
  }
  return static_cast<int>(it - levels.begin());
}

namespace {

constexpr Eigen::Index kMaxCells = 50'000'000;

void validate_axes(const std::vector<Axis>& axes) {
  Eigen::Index cells = 1;
  for (const auto& axis : axes) {
    if (axis.levels.empty()) throw std::invalid_argument("axis '" + axis.name + "' has no levels");
    for (const auto& level : axis.levels) {
      if (level == kWildcard || level == "∗") {
        throw std::invalid_argument("axis '" + axis.name + "': the wildcard is not a valid level name");
      }
    }
    cells *= axis.size();
    if (cells > kMaxCells) throw std::invalid_argument("lattice has too many cells");
  }
}

Eigen::Index cell_total(const std::vector<Axis>& axes) {
  Eigen::Index cells = 1;
  for (const auto& axis : axes) cells *= axis.size();
  return cells;
}

void combinations(int n, int k, int start, std::vector<int>& current, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == k) {
    out.push_back(current);
    return;
  }
  for (int i = start; i < n; ++i) {
    current.push_back(i);
    combinations(n, k, i + 1, current, out);
    current.pop_back();
  }
}

}  // namespace

Lattice::Lattice(std::vector<Axis> axes) : axes_(std::move(axes)) {
  validate_axes(axes_);
  cell_counts_ = Eigen::VectorXd::Zero(cell_total(axes_));
}

Lattice::Lattice(std::vector<Axis> axes, Eigen::VectorXd cell_counts)
    : axes_(std::move(axes)), cell_counts_(std::move(cell_counts)) {
  validate_axes(axes_);
  if (cell_counts_.size() != cell_total(axes_)) {
    throw std::invalid_argument("lattice: cell count vector does not match axis sizes");
  }
  if ((cell_counts_.array() < 0).any()) throw std::invalid_argument("lattice: negative cell count");
}

Lattice Lattice::from_indices(std::vector<Axis> axes, std::span<const MultiIndex> kappas) {
  Lattice out(std::move(axes));
  for (const auto& kappa : kappas) out.cell_counts_[out.flat_index(kappa)] += 1.0;
  return out;
}

void Lattice::check(const MultiIndex& kappa) const {
  if (static_cast<int>(kappa.size()) != dims()) {
    throw std::out_of_range("multi-index has " + std::to_string(kappa.size()) + " coordinates, lattice has " +
                            std::to_string(dims()));
  }
  for (int d = 0; d < dims(); ++d) {
    if (kappa[d] < 0 || kappa[d] >= axes_[d].size()) {
      throw std::out_of_range("multi-index coordinate " + std::to_string(kappa[d]) + " out of range for axis '" +
                              axes_[d].name + "'");
    }
  }
}

Eigen::Index Lattice::flat_index(const MultiIndex& kappa) const {
  check(kappa);
  Eigen::Index flat = 0;
  for (int d = 0; d < dims(); ++d) flat = flat * axes_[d].size() + kappa[d];
  return flat;
}

MultiIndex Lattice::unflatten(Eigen::Index flat) const {
  MultiIndex kappa(dims());
  for (int d = dims() - 1; d >= 0; --d) {
    kappa[d] = static_cast<int>(flat % axes_[d].size());
    flat /= axes_[d].size();
  }
  return kappa;
}

Lattice Lattice::project(std::span<const int> positions) const {
  std::vector<Axis> axes;
  for (int p : positions) {
    if (p < 0 || p >= dims()) throw std::out_of_range("lattice projection: bad axis position");
    axes.push_back(axes_[p]);
  }
  Lattice out(std::move(axes));
  MultiIndex sub(positions.size());
  for (Eigen::Index c = 0; c < cells(); ++c) {
    if (cell_counts_[c] == 0) continue;
    const MultiIndex kappa = unflatten(c);
    for (std::size_t i = 0; i < positions.size(); ++i) sub[i] = kappa[positions[i]];
    out.cell_counts_[out.flat_index(sub)] += cell_counts_[c];
  }
  return out;
}

// ---------------------------------------------------------------------------

DecompositionLayout::DecompositionLayout(Lattice lattice, int max_order, Eigen::Index width)
    : lattice_(std::move(lattice)), max_order_(max_order), width_(width), expanded_(width, true) {
  if (max_order < 0) throw std::invalid_argument("decomposition: max_order must be >= 0");
  if (width < 0) throw std::invalid_argument("decomposition: width must be >= 0");
  const int dims = lattice_.dims();

  Eigen::Index offset = 0;
  for (int order = 0; order <= std::min(max_order, dims); ++order) {
    std::vector<std::vector<int>> subsets;
    std::vector<int> current;
    combinations(dims, order, 0, current, subsets);
    for (auto& subset : subsets) {
      Term term;
      term.axes = std::move(subset);
      for (int a : term.axes) term.slices *= lattice_.axes()[a].size();
      term.offset = offset;
      term.counts = Eigen::VectorXd::Zero(term.slices);
      offset += term.slices * width_;
      terms_.push_back(std::move(term));
    }
  }
  size_ = offset;

  for (Eigen::Index c = 0; c < lattice_.cells(); ++c) {
    const double count = lattice_.cell_counts()[c];
    if (count == 0) continue;
    const MultiIndex kappa = lattice_.unflatten(c);
    for (auto& term : terms_) term.counts[slice_index(term, kappa)] += count;
  }
}

Eigen::Index DecompositionLayout::slice_index(const Term& term, const MultiIndex& kappa) const {
  Eigen::Index s = 0;
  for (int a : term.axes) s = s * lattice_.axes()[a].size() + kappa[a];
  return s;
}

void DecompositionLayout::active_offsets(const MultiIndex& kappa, std::vector<Eigen::Index>& out) const {
  lattice_.check(kappa);
  out.clear();
  for (const auto& term : terms_) out.push_back(term.offset + slice_index(term, kappa) * width_);
}

std::vector<std::string> DecompositionLayout::slice_key(const Term& term, Eigen::Index slice) const {
  std::vector<std::string> key(lattice_.dims(), kWildcard);
  for (int i = term.order() - 1; i >= 0; --i) {
    const auto& axis = lattice_.axes()[term.axes[i]];
    key[term.axes[i]] = axis.levels[slice % axis.size()];
    slice /= axis.size();
  }
  return key;
}

void DecompositionLayout::set_expanded_columns(std::vector<bool> expanded) {
  if (static_cast<Eigen::Index>(expanded.size()) != width_) {
    throw std::invalid_argument("decomposition: expanded-column mask has wrong width");
  }
  expanded_ = std::move(expanded);
}

Eigen::VectorXd DecompositionLayout::free_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(size_);
  for (const auto& term : terms_) {
    if (term.order() == 0) continue;
    for (Eigen::Index s = 0; s < term.slices; ++s) {
      for (Eigen::Index j = 0; j < width_; ++j) {
        if (!expanded_[j]) mask[term.offset + s * width_ + j] = 0.0;
      }
    }
  }
  return mask;
}

ParamDecomposition::ParamDecomposition(std::shared_ptr<const DecompositionLayout> l, Eigen::VectorXd v)
    : layout(std::move(l)), values(std::move(v)) {
  if (values.size() != layout->size()) {
    throw std::invalid_argument("decomposition: value vector size does not match layout");
  }
}

ParamDecomposition operator+(const ParamDecomposition& a, const ParamDecomposition& b) {
  if (a.layout->size() != b.layout->size() || a.layout->width() != b.layout->width()) {
    throw std::invalid_argument("decomposition sum: layouts differ");
  }
  return ParamDecomposition(a.layout, a.values + b.values);
}

Eigen::VectorXd lookup(const ParamDecomposition& d, const MultiIndex& kappa) {
  const auto& layout = *d.layout;
  layout.lattice().check(kappa);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(layout.width());
  for (const auto& term : layout.terms()) out += d.slice(term, layout.slice_index(term, kappa));
  return out;
}

// ---------------------------------------------------------------------------
// Priors

void PriorSpec::validate() const {
  if (!(base_variance > 0)) throw std::invalid_argument("prior: base_variance must be > 0");
  if (leading_variance && !(*leading_variance > 0)) {
    throw std::invalid_argument("prior: leading_variance must be > 0");
  }
  if (horseshoe && (!(horseshoe->global_scale > 0) || !(horseshoe->slab_scale > 0))) {
    throw std::invalid_argument("prior: horseshoe scales must be > 0");
  }
}

double prior_scale(const DecompositionLayout& layout, const Term& term, Eigen::Index slice,
                   const PriorSpec& prior) {
  if (term.order() == 0) return prior.leading_variance.value_or(prior.base_variance);
  const double total = layout.lattice().total_n();
  const double share = total > 0 ? term.counts[slice] / total : 0.0;
  return std::max(prior.base_variance * share, kPriorVarianceFloor);
}

Eigen::VectorXd prior_variances(const DecompositionLayout& layout, const PriorSpec& prior) {
  Eigen::VectorXd out(layout.size());
  for (const auto& term : layout.terms()) {
    for (Eigen::Index s = 0; s < term.slices; ++s) {
      out.segment(term.offset + s * layout.width(), layout.width()).setConstant(prior_scale(layout, term, s, prior));
    }
  }
  return out;
}

double gaussian_logprior(const ParamDecomposition& d, const PriorSpec& prior, Eigen::VectorXd* grad,
                         bool skip_leading) {
  const auto& layout = *d.layout;
  const auto& expanded = layout.expanded_columns();
  constexpr double log_two_pi = 1.8378770664093453;
  double total = 0.0;
  for (const auto& term : layout.terms()) {
    if (skip_leading && term.order() == 0) continue;
    for (Eigen::Index s = 0; s < term.slices; ++s) {
      const double var = prior_scale(layout, term, s, prior);
      const double log_norm = -0.5 * (log_two_pi + std::log(var));
      const Eigen::Index base = term.offset + s * layout.width();
      for (Eigen::Index j = 0; j < layout.width(); ++j) {
        if (term.order() > 0 && !expanded[j]) continue;
        const double v = d.values[base + j];
        total += log_norm - 0.5 * v * v / var;
        if (grad) (*grad)[base + j] -= v / var;
      }
    }
  }
  return total;
}

ParamDecomposition prior_optimal_allocation(const ParamDecomposition& d, const PriorSpec& prior,
                                            const Eigen::Ref<const Eigen::VectorXd>& adjustable) {
  const auto& layout = *d.layout;
  if (adjustable.size() != layout.size()) throw std::invalid_argument("prior_optimal_allocation: mask has wrong size");
  const Lattice& lattice = layout.lattice();
  const Eigen::VectorXd var = prior_variances(layout, prior);
  const Eigen::Index w = layout.width();

  std::vector<std::vector<Eigen::Index>> observed;
  std::vector<Eigen::Index> offsets;
  for (Eigen::Index c = 0; c < lattice.cells(); ++c) {
    if (lattice.cell_counts()[c] <= 0) continue;
    layout.active_offsets(lattice.unflatten(c), offsets);
    observed.push_back(offsets);
  }

  ParamDecomposition out = d;
  for (Eigen::Index i = 0; i < layout.size(); ++i) {
    if (adjustable[i] != 0.0) out.values[i] = 0.0;
  }
  if (observed.empty()) return out;
  const Eigen::Index n_cells = static_cast<Eigen::Index>(observed.size());
  std::vector<Eigen::Index> unknowns;
  for (Eigen::Index j = 0; j < w; ++j) {
    unknowns.clear();
    for (const auto& cell : observed) {
      for (Eigen::Index off : cell) {
        if (adjustable[off + j] != 0.0) unknowns.push_back(off + j);
      }
    }
    std::sort(unknowns.begin(), unknowns.end());
    unknowns.erase(std::unique(unknowns.begin(), unknowns.end()), unknowns.end());
    if (unknowns.empty()) continue;
    const Eigen::Index n_unknown = static_cast<Eigen::Index>(unknowns.size());

    // Minimise sum v^2 / var subject to unchanged totals on every observed cell:
    // v = D A^T (A D A^T)^+ r, with r the totals less the held coordinates.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_cells, n_unknown);
    Eigen::VectorXd r(n_cells);
    for (Eigen::Index c = 0; c < n_cells; ++c) {
      double total = 0.0, held = 0.0;
      for (Eigen::Index off : observed[c]) {
        const Eigen::Index i = off + j;
        total += d.values[i];
        if (adjustable[i] == 0.0) {
          held += d.values[i];
        } else {
          const auto pos = std::lower_bound(unknowns.begin(), unknowns.end(), i) - unknowns.begin();
          a(c, pos) = 1.0;
        }
      }
      r[c] = total - held;
    }
    Eigen::VectorXd dvar(n_unknown);
    for (Eigen::Index u = 0; u < n_unknown; ++u) dvar[u] = var[unknowns[u]];
    const Eigen::MatrixXd ad = a * dvar.asDiagonal();
    const Eigen::MatrixXd gram = ad * a.transpose();
    const Eigen::VectorXd multipliers = gram.completeOrthogonalDecomposition().solve(r);
    const Eigen::VectorXd v = ad.transpose() * multipliers;
    for (Eigen::Index u = 0; u < n_unknown; ++u) out.values[unknowns[u]] = v[u];
  }
  return out;
}

double softplus(double u) { return u > 30 ? u : std::log1p(std::exp(u)); }

double inverse_softplus(double x) { return x > 30 ? x : std::log(std::expm1(x)); }

double sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

namespace {

/// log lambda for lambda = softplus(u), accurate for very negative u.
double log_softplus(double u) { return u < -30 ? u : std::log(softplus(u)); }

}  // namespace

double horseshoe_joint_logprior(const Eigen::Ref<const Eigen::VectorXd>& values,
                                const Eigen::Ref<const Eigen::VectorXd>& local_unconstrained,
                                double global_scale, double slab_scale, Eigen::VectorXd* grad_values,
                                Eigen::VectorXd* grad_local) {
  if (values.size() != local_unconstrained.size()) {
    throw std::invalid_argument("horseshoe: values and local scales differ in length");
  }
  if (!(global_scale > 0) || !(slab_scale > 0) || !std::isfinite(global_scale) || !std::isfinite(slab_scale)) {
    throw std::invalid_argument("horseshoe: scales must be finite and > 0");
  }
  constexpr double log_two_pi = 1.8378770664093453;
  const double log_two_over_pi = std::log(2.0 / std::numbers::pi);
  const double tau2 = global_scale * global_scale;
  const double c2 = slab_scale * slab_scale;
  double total = 0.0;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    const double v = values[j];
    const double u = local_unconstrained[j];
    if (!std::isfinite(v) || !std::isfinite(u)) throw std::domain_error("horseshoe: non-finite input");
    const double lambda = softplus(u);
    const double log_lambda = log_softplus(u);
    const double lambda2 = lambda * lambda;
    const double denom = c2 + tau2 * lambda2;
    // log variance of the regularized scale: tau^2 c^2 lambda^2 / (c^2 + tau^2 lambda^2)
    const double log_var = std::log(tau2) + std::log(c2) + 2 * log_lambda - std::log(denom);
    const double inv_var = std::exp(-log_var);
    const double sig = sigmoid(u);
    total += -0.5 * (log_two_pi + log_var) - 0.5 * v * v * inv_var + log_two_over_pi - std::log1p(lambda2) +
             (u < -30 ? u : std::log(sig));
    if (grad_values) (*grad_values)[j] += -v * inv_var;
    if (grad_local) {
      const double d_logvar = -0.5 + 0.5 * v * v * inv_var;
      // d log lambda / du = sigmoid(u) / softplus(u), which tends to 1 as u -> -inf.
      const double dloglambda_du = u < -30 ? 1.0 : sig / lambda;
      const double dlogvar_du = 2 * dloglambda_du - 2 * tau2 * lambda * sig / denom;
      const double dcauchy_du = -2 * lambda * sig / (1 + lambda2);
      (*grad_local)[j] += d_logvar * dlogvar_du + dcauchy_du + (1 - sig);
    }
  }
  return total;
}

double horseshoe_logprior(const Eigen::Ref<const Eigen::VectorXd>& values, double global_scale,
                          double slab_scale) {
  if (!(global_scale > 0) || !(slab_scale > 0)) throw std::invalid_argument("horseshoe: scales must be > 0");
  const double tau2 = global_scale * global_scale;
  const double c2 = slab_scale * slab_scale;
  double total = 0.0;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    const double v = values[j];
    if (!std::isfinite(v)) throw std::domain_error("horseshoe: non-finite input");
    if (v == 0.0) return std::numeric_limits<double>::infinity();
    // lambda = tan(theta) turns the half-Cauchy measure into (2/pi) dtheta.
    auto integrand = [&](double theta) {
      if (theta <= 0) return 0.0;
      const double lambda = std::tan(theta);
      const double lambda2 = lambda * lambda;
      const double var = std::isfinite(lambda2) ? tau2 * c2 * lambda2 / (c2 + tau2 * lambda2) : c2;
      return std::exp(-0.5 * v * v / var) / std::sqrt(2 * std::numbers::pi * var);
    };
    // The integrand never exceeds the normal density at its optimal scale.
    const double peak = 1.0 / (std::abs(v) * std::sqrt(2 * std::numbers::pi * std::numbers::e));
    const double integral =
        adaptive_simpson(integrand, 0.0, std::numbers::pi / 2, 1e-13 * peak, 50, 64);
    total += std::log(2.0 / std::numbers::pi * integral);
  }
  return total;
}

}  // namespace phantomhaz
