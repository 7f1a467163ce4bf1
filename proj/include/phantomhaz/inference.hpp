#pragma once

// Minibatch MAP estimation (Adam) and mean-field Gaussian variational
// inference for the quilted PEM, with per-episode likelihood clamping.

#include "phantomhaz/model.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phantomhaz {

/// Raised when a numeric failure cannot be repaired (exit code 3 in the CLI).
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FitMode { map, meanfield_vi };

struct FitState;

struct FitConfig {
  std::size_t minibatch_size = 5000;
  double initial_lr = 0.0015;
  double lr_decay_factor = 0.9;
  int patience_epochs = 3;
  int max_epochs = 50;
  int vi_sample_size = 16;
  std::uint64_t seed = 0;
  double clamp_offset = 100.0;
  FitMode mode = FitMode::map;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// MAP only: finish by giving each Gaussian-prior block its smallest-penalty
  /// decomposition with the same observed-cell totals (likelihood unchanged).
  /// The optimiser's per-coordinate steps leave that split essentially where
  /// the first epochs put it. Skipped when initial_lr is 0.
  bool reallocate_terms = true;
  /// Initial posterior standard deviation in VI mode.
  double vi_initial_scale = 0.01;
  /// Called with the optimiser state every `checkpoint_every` epochs (0 = never).
  int checkpoint_every = 5;
  std::function<void(const FitState&)> on_checkpoint;

  void validate() const;
};

/// Everything needed to resume an interrupted fit bit-for-bit.
struct FitState {
  int epoch = 0;  ///< completed epochs
  Eigen::VectorXd theta;
  Eigen::VectorXd vi_rho;  ///< unconstrained VI scales (empty in MAP mode)
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  long long step = 0;
  double lr = 0.0;
  double best_loss = 0.0;
  int stale_epochs = 0;
  std::vector<double> epoch_losses;
  std::string rng_state;
  std::size_t clamped_logliks = 0;
};

struct FitReport {
  std::vector<double> epoch_losses;
  double initial_loss = 0.0;
  ModelParams params;
  /// Posterior standard deviations (VI mode only).
  Eigen::VectorXd vi_scales;
  std::string convergence_reason;
  double wall_seconds = 0.0;
  int epochs_run = 0;
  double final_lr = 0.0;
  std::size_t clamped_logliks = 0;
  std::size_t clamped_rates = 0;
  std::vector<std::string> warnings;
  /// Two-stage expansion only.
  std::vector<int> selected_features;
  bool empty_expansion = false;
};

/// Replaces every non-finite value by (smallest finite value - clamp_offset).
std::vector<double> stabilize_loglik(std::span<const double> values, double clamp_offset = 100.0);
/// In-place variant; returns how many values were replaced.
std::size_t stabilize_loglik_inplace(Eigen::Ref<Eigen::VectorXd> values, double clamp_offset = 100.0);

/// Parameters at their starting point: zeros except the leading alpha slice,
/// which holds log(total events / total exposure) in every interval.
ModelParams initial_params(std::shared_ptr<const ModelStructure> structure, std::span<const EpisodeRecord> episodes);

/// Training lattice (axis counts) of a data set.
Lattice training_lattice(const ModelStructure& structure, std::span<const EpisodeRecord> episodes);

/// Rejects malformed rows, naming the first offending row (1-based).
void validate_episodes(const ModelStructure& structure, std::span<const EpisodeRecord> episodes);

/// Mean clamped negative log posterior per episode over the full data set.
double full_data_loss(const ModelParams& p, std::span<const EpisodeRecord> episodes, double clamp_offset);

FitReport fit(std::span<const EpisodeRecord> episodes, std::shared_ptr<const ModelStructure> structure,
              const FitConfig& config, std::optional<ModelParams> init = std::nullopt,
              std::optional<FitState> resume = std::nullopt);

/// Leading-order fit under the horseshoe, then a refit with higher-order beta
/// terms enabled only for the `top_k` largest leading coefficients.
FitReport two_stage_expand(std::span<const EpisodeRecord> episodes, std::shared_ptr<const ModelStructure> structure,
                           const FitConfig& config, int top_k = 60);

}  // namespace phantomhaz
