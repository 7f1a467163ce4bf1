#pragma once

// Generative piecewise-exponential model with quilted coefficients,
// intervention effects and a jointly modelled Poisson intervention rate.

#include "phantomhaz/hazard.hpp"
#include "phantomhaz/quilt.hpp"

#include <Eigen/Core>

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace phantomhaz {

/// One index discharge.
struct EpisodeRecord {
  std::string id;
  Eigen::VectorXd x;                        ///< binary covariates
  MultiIndex kappa;                         ///< lattice coordinates
  std::vector<Intervention> interventions;  ///< observed (time, category); effect unused
  Eigen::VectorXd counts;                   ///< interventions per category
  double time = 0.0;                        ///< observed time T (days)
  bool event = false;                       ///< event observed at T (else censored)
  double exposure = 0.0;                    ///< observation days for the count model

  void validate(Eigen::Index n_features, std::size_t n_categories, const Lattice& lattice) const;
};

enum class Block : int { alpha = 0, beta, gamma, eta, nu, xi };
inline constexpr std::array<Block, 6> kBlocks{Block::alpha, Block::beta, Block::gamma,
                                              Block::eta,   Block::nu,   Block::xi};
const char* block_name(Block b);

/// Which lattice axes a parameter varies over, to what order, and its prior.
struct ParamSpec {
  std::vector<int> axes;  ///< positions in ModelStructure::axes
  int max_order = 0;
  PriorSpec prior;
  /// Held at its current value during fitting.
  bool fixed = false;
};

struct ModelStructure {
  std::vector<double> breakpoints = default_breakpoints();
  std::vector<std::string> features;
  std::vector<std::string> categories;
  std::vector<Axis> axes;
  std::array<ParamSpec, 6> params;
  /// Include the Poisson intervention-count likelihood.
  bool joint_poisson = true;
  /// Days that one unit of Poisson rate refers to (counts are per year).
  double rate_period_days = 365.0;

  ParamSpec& spec(Block b) { return params[static_cast<int>(b)]; }
  const ParamSpec& spec(Block b) const { return params[static_cast<int>(b)]; }

  Eigen::Index intervals() const { return static_cast<Eigen::Index>(breakpoints.size()) + 1; }
  Eigen::Index n_features() const { return static_cast<Eigen::Index>(features.size()); }
  Eigen::Index n_categories() const { return static_cast<Eigen::Index>(categories.size()); }
  /// Values per slice for a block (intervals, features, categories x intervals, ...).
  Eigen::Index width(Block b) const;
  int category_index(const std::string& name) const;

  /// Defaults: every parameter over all axes, alpha and gamma to order 3,
  /// the rest to order 2; horseshoe on the leading beta slice.
  static ModelStructure with_defaults(std::vector<std::string> features, std::vector<std::string> categories,
                                      std::vector<Axis> axes);
  void validate() const;
};

/// All model parameters packed into one flat vector.
///
/// Blocks are laid out in `kBlocks` order, followed by the unconstrained
/// horseshoe local scales of the leading beta slice (when enabled).
class ModelParams {
 public:
  ModelParams() = default;
  /// Zero-initialised parameters; `lattice` carries the training-data counts.
  ModelParams(std::shared_ptr<const ModelStructure> structure, const Lattice& lattice);

  const ModelStructure& structure() const { return *structure_; }
  std::shared_ptr<const ModelStructure> structure_ptr() const { return structure_; }
  const Lattice& lattice() const { return lattice_; }

  const DecompositionLayout& layout(Block b) const { return *layouts_[static_cast<int>(b)]; }
  std::shared_ptr<const DecompositionLayout> layout_ptr(Block b) const { return layouts_[static_cast<int>(b)]; }
  Eigen::Index offset(Block b) const { return offsets_[static_cast<int>(b)]; }
  const std::vector<int>& axes(Block b) const { return structure_->spec(b).axes; }

  auto block(Block b) { return theta.segment(offset(b), layout(b).size()); }
  auto block(Block b) const { return theta.segment(offset(b), layout(b).size()); }
  ParamDecomposition decomposition(Block b) const { return {layout_ptr(b), block(b)}; }

  bool has_horseshoe() const { return horseshoe_size_ > 0; }
  Eigen::Index horseshoe_offset() const { return horseshoe_offset_; }
  auto horseshoe_local() { return theta.segment(horseshoe_offset_, horseshoe_size_); }
  auto horseshoe_local() const { return theta.segment(horseshoe_offset_, horseshoe_size_); }

  Eigen::Index size() const { return theta.size(); }
  /// 1 for optimisable coordinates, 0 for pinned ones.
  Eigen::VectorXd free_mask() const;

  /// Restricts higher-order beta terms to the given feature columns.
  void set_expanded_features(const std::vector<bool>& expanded);

  /// Block-local coordinates of kappa (the projection onto the block's axes).
  MultiIndex project(Block b, const MultiIndex& kappa) const;

  Eigen::VectorXd theta;

 private:
  std::shared_ptr<const ModelStructure> structure_;
  Lattice lattice_;
  std::array<std::shared_ptr<DecompositionLayout>, 6> layouts_;
  std::array<Eigen::Index, 6> offsets_{};
  Eigen::Index horseshoe_offset_ = 0;
  Eigen::Index horseshoe_size_ = 0;
};

struct InterventionRate {
  double rate = 1.0;  ///< mu: expected interventions per rate period
  double log_rate = 0.0;
  bool clamped = false;
};

inline constexpr double kLogRateClamp = 30.0;

/// mu_k = exp(nu_k + sum_j xi_kj x_j), clamped at exp(30).
InterventionRate intervention_rate(const ModelParams& p, const EpisodeRecord& e, int category);

/// Poisson log pmf of count given the episode's rate and exposure offset.
double intervention_count_logpmf(double count, double rate, double exposure_days, double period_days);

/// log lambda_n(t): baseline, covariates, effects of interventions strictly
/// before t, and the selection adjustment.
double total_log_hazard(const ModelParams& p, const EpisodeRecord& e, double t);

/// Cumulative hazard Lambda_n(t) over the merged breakpoint/intervention grid.
double cumulative_hazard(const ModelParams& p, const EpisodeRecord& e, double t,
                         bool with_interventions = true);

/// Per-episode hazard as a PiecewiseHazard (interventions applied).
PiecewiseHazard episode_hazard(const ModelParams& p, const EpisodeRecord& e, bool with_interventions = true);

/// Censoring-aware log likelihood of one episode, plus the Poisson count
/// term when the structure models counts jointly.
double episode_loglik(const ModelParams& p, const EpisodeRecord& e);

/// Log prior over all blocks; adds into grad when given.
double log_prior(const ModelParams& p, Eigen::VectorXd* grad = nullptr);

/// scale * sum of episode log likelihoods + log prior.
double dataset_logpost(const ModelParams& p, std::span<const EpisodeRecord> episodes, double minibatch_scale);

/// Gradient of dataset_logpost with respect to theta.
Eigen::VectorXd gradient(const ModelParams& p, std::span<const EpisodeRecord> episodes,
                         double minibatch_scale = 1.0);

/// Per-episode log likelihoods plus the summed gradient of the finite ones.
struct BatchEvaluation {
  Eigen::VectorXd loglik;
  Eigen::VectorXd grad_sum;  ///< empty unless requested
};

/// Evaluates every episode. Episodes whose log likelihood is not finite are
/// left out of grad_sum (their clamped value is constant in theta).
BatchEvaluation evaluate_batch(const ModelParams& p, std::span<const EpisodeRecord> episodes,
                               bool want_gradient);
/// Same, over episodes[indices[0]], episodes[indices[1]], ...
BatchEvaluation evaluate_batch(const ModelParams& p, std::span<const EpisodeRecord> episodes,
                               std::span<const std::size_t> indices, bool want_gradient);

}  // namespace phantomhaz
