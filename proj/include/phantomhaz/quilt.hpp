#pragma once

// Additive multi-index parameter decompositions ("quilts") over a lattice of
// categorical axes, with count-weighted Gaussian and regularized horseshoe
// priors.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phantomhaz {

/// Wildcard level name used in serialized term keys.
inline constexpr const char* kWildcard = "*";

using MultiIndex = std::vector<int>;

struct Axis {
  std::string name;
  std::vector<std::string> levels;

  int size() const { return static_cast<int>(levels.size()); }
  int level_index(const std::string& level) const;
};

/// Categorical axes plus the multi-way contingency counts of the training data.
class Lattice {
 public:
  Lattice() : cell_counts_(Eigen::VectorXd::Constant(1, 0.0)) {}
  /// Lattice with all counts zero.
  explicit Lattice(std::vector<Axis> axes);
  Lattice(std::vector<Axis> axes, Eigen::VectorXd cell_counts);

  static Lattice from_indices(std::vector<Axis> axes, std::span<const MultiIndex> kappas);

  const std::vector<Axis>& axes() const { return axes_; }
  int dims() const { return static_cast<int>(axes_.size()); }
  Eigen::Index cells() const { return cell_counts_.size(); }
  const Eigen::VectorXd& cell_counts() const { return cell_counts_; }
  double total_n() const { return cell_counts_.sum(); }

  void check(const MultiIndex& kappa) const;
  /// Row-major flat index of kappa.
  Eigen::Index flat_index(const MultiIndex& kappa) const;
  MultiIndex unflatten(Eigen::Index flat) const;

  /// Marginal lattice over the axes at `positions` (in that order).
  Lattice project(std::span<const int> positions) const;

 private:
  std::vector<Axis> axes_;
  Eigen::VectorXd cell_counts_;
};

/// One interaction term: a subset of axes; the others are wildcards.
struct Term {
  std::vector<int> axes;      ///< ascending axis positions
  Eigen::Index slices = 1;    ///< product of level counts over `axes`
  Eigen::Index offset = 0;    ///< start of this term's block in the value vector
  Eigen::VectorXd counts;     ///< marginal contingency count per slice

  int order() const { return static_cast<int>(axes.size()); }
};

/// Shape of a decomposition: which terms exist and where their values live.
///
/// Every slice carries `width` values (one per covariate, interval, ...).
/// Columns may be marked unexpanded, in which case only the zero-order term
/// is free for them and all higher-order values stay at zero.
class DecompositionLayout {
 public:
  DecompositionLayout(Lattice lattice, int max_order, Eigen::Index width);

  const Lattice& lattice() const { return lattice_; }
  int max_order() const { return max_order_; }
  Eigen::Index width() const { return width_; }
  Eigen::Index size() const { return size_; }
  const std::vector<Term>& terms() const { return terms_; }

  Eigen::Index slice_index(const Term& term, const MultiIndex& kappa) const;
  /// Offsets (start of the width-long block) of every term slice matching kappa.
  void active_offsets(const MultiIndex& kappa, std::vector<Eigen::Index>& out) const;
  /// Level names for a slice, with wildcards on unused axes.
  std::vector<std::string> slice_key(const Term& term, Eigen::Index slice) const;

  const std::vector<bool>& expanded_columns() const { return expanded_; }
  void set_expanded_columns(std::vector<bool> expanded);
  /// 1 for free coordinates, 0 for coordinates pinned at zero.
  Eigen::VectorXd free_mask() const;

 private:
  Lattice lattice_;
  int max_order_;
  Eigen::Index width_;
  Eigen::Index size_ = 0;
  std::vector<Term> terms_;
  std::vector<bool> expanded_;
};

/// Decomposed parameter: a shared layout plus its flat value vector.
struct ParamDecomposition {
  std::shared_ptr<const DecompositionLayout> layout;
  Eigen::VectorXd values;

  ParamDecomposition() = default;
  explicit ParamDecomposition(std::shared_ptr<const DecompositionLayout> l)
      : layout(std::move(l)), values(Eigen::VectorXd::Zero(layout->size())) {}
  ParamDecomposition(std::shared_ptr<const DecompositionLayout> l, Eigen::VectorXd v);

  /// Values of one term slice (a width-long segment).
  auto slice(const Term& term, Eigen::Index s) { return values.segment(term.offset + s * layout->width(), layout->width()); }
  auto slice(const Term& term, Eigen::Index s) const {
    return values.segment(term.offset + s * layout->width(), layout->width());
  }
  /// The zero-order block.
  auto leading() { return values.head(layout->width()); }
  auto leading() const { return values.head(layout->width()); }
};

ParamDecomposition operator+(const ParamDecomposition& a, const ParamDecomposition& b);

/// theta^(kappa): sum of every stored term whose non-wildcard levels match kappa.
Eigen::VectorXd lookup(const ParamDecomposition& d, const MultiIndex& kappa);

struct HorseshoeSpec {
  double global_scale = 0.1;
  double slab_scale = 2.0;
};

struct PriorSpec {
  double base_variance = 1.0;
  /// Overrides the zero-order variance when set.
  std::optional<double> leading_variance;
  /// Regularized horseshoe on the zero-order slice instead of a Gaussian.
  std::optional<HorseshoeSpec> horseshoe;

  void validate() const;
};

inline constexpr double kPriorVarianceFloor = 1e-8;

/// base_variance * (slice count / total_n), floored; the zero-order term gets
/// the full base (or leading) variance.
double prior_scale(const DecompositionLayout& layout, const Term& term, Eigen::Index slice,
                   const PriorSpec& prior);

/// Per-coordinate prior variances, in value-vector order.
Eigen::VectorXd prior_variances(const DecompositionLayout& layout, const PriorSpec& prior);

/// Sum of independent centred Gaussian log densities over every free
/// coordinate; adds the gradient into `grad` when given. With `skip_leading`
/// the zero-order block is left out (it carries the horseshoe instead).
double gaussian_logprior(const ParamDecomposition& d, const PriorSpec& prior,
                         Eigen::VectorXd* grad = nullptr, bool skip_leading = false);

/// Joint log density of values and their local scales under the regularized
/// horseshoe. Local scales are given unconstrained: lambda = softplus(u),
/// and the soft-plus Jacobian is included so the density is over (v, u).
double horseshoe_joint_logprior(const Eigen::Ref<const Eigen::VectorXd>& values,
                                const Eigen::Ref<const Eigen::VectorXd>& local_unconstrained,
                                double global_scale, double slab_scale,
                                Eigen::VectorXd* grad_values = nullptr,
                                Eigen::VectorXd* grad_local = nullptr);

/// Log density of values with the half-Cauchy local scales integrated out.
/// Infinite at exactly zero (the horseshoe pole).
double horseshoe_logprior(const Eigen::Ref<const Eigen::VectorXd>& values, double global_scale,
                          double slab_scale);

/// Decomposition with the smallest Gaussian prior penalty among those giving
/// every cell with training data the same total. Only coordinates flagged in
/// `adjustable` move; adjustable coordinates that reach no observed cell become 0.
ParamDecomposition prior_optimal_allocation(const ParamDecomposition& d, const PriorSpec& prior,
                                            const Eigen::Ref<const Eigen::VectorXd>& adjustable);

double softplus(double u);
double inverse_softplus(double x);
double sigmoid(double u);

}  // namespace phantomhaz
