#include "phantomhaz/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace phantomhaz {

void FitConfig::validate() const {
  if (minibatch_size == 0) throw std::invalid_argument("fit: minibatch_size must be > 0");
  if (!(initial_lr >= 0)) throw std::invalid_argument("fit: initial_lr must be >= 0");
  if (!(lr_decay_factor > 0 && lr_decay_factor < 1)) throw std::invalid_argument("fit: lr_decay_factor must be in (0, 1)");
  if (patience_epochs < 1) throw std::invalid_argument("fit: patience_epochs must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("fit: max_epochs must be >= 1");
  if (vi_sample_size < 1) throw std::invalid_argument("fit: vi_sample_size must be >= 1");
  if (!(clamp_offset > 0)) throw std::invalid_argument("fit: clamp_offset must be > 0");
  if (!(vi_initial_scale > 0)) throw std::invalid_argument("fit: vi_initial_scale must be > 0");
}

std::size_t stabilize_loglik_inplace(Eigen::Ref<Eigen::VectorXd> values, double clamp_offset) {
  double min_finite = std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (std::isfinite(v)) min_finite = std::min(min_finite, v);
  }
  if (!std::isfinite(min_finite)) {
    if (values.size() == 0) return 0;
    throw NumericFailure("stabilize_loglik: every log likelihood is non-finite");
  }
  std::size_t replaced = 0;
  for (double& v : values) {
    if (!std::isfinite(v)) {
      v = min_finite - clamp_offset;
      ++replaced;
    }
  }
  return replaced;
}

std::vector<double> stabilize_loglik(std::span<const double> values, double clamp_offset) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  stabilize_loglik_inplace(v, clamp_offset);
  return {v.data(), v.data() + v.size()};
}

Lattice training_lattice(const ModelStructure& structure, std::span<const EpisodeRecord> episodes) {
  Lattice lattice(structure.axes);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(lattice.cells());
  for (const auto& e : episodes) counts[lattice.flat_index(e.kappa)] += 1.0;
  return Lattice(structure.axes, counts);
}

void validate_episodes(const ModelStructure& structure, std::span<const EpisodeRecord> episodes) {
  const Lattice lattice(structure.axes);
  for (std::size_t n = 0; n < episodes.size(); ++n) {
    try {
      episodes[n].validate(structure.n_features(), structure.categories.size(), lattice);
    } catch (const std::exception& ex) {
      throw std::invalid_argument("row " + std::to_string(n + 1) + ": " + ex.what());
    }
  }
}

ModelParams initial_params(std::shared_ptr<const ModelStructure> structure, std::span<const EpisodeRecord> episodes) {
  ModelParams p(structure, training_lattice(*structure, episodes));
  double events = 0.0;
  double exposure = 0.0;
  for (const auto& e : episodes) {
    events += e.event ? 1.0 : 0.0;
    exposure += e.time;
  }
  // Half an event keeps the start finite on event-free data.
  const double rate = std::max(events, 0.5) / std::max(exposure, 1e-12);
  p.block(Block::alpha).head(structure->intervals()).setConstant(std::log(rate));
  return p;
}

double full_data_loss(const ModelParams& p, std::span<const EpisodeRecord> episodes, double clamp_offset) {
  if (episodes.empty()) return -log_prior(p);
  BatchEvaluation eval = evaluate_batch(p, episodes, false);
  stabilize_loglik_inplace(eval.loglik, clamp_offset);
  const double n = static_cast<double>(episodes.size());
  return -(eval.loglik.sum() + log_prior(p)) / n;
}

namespace {

std::string save_rng(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void load_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw std::invalid_argument("fit: corrupt RNG state in checkpoint");
}

/// Loss and gradient of the normalised negative log posterior on one batch.
struct BatchLoss {
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::size_t clamped = 0;
};

BatchLoss batch_loss(const ModelParams& p, std::span<const EpisodeRecord> episodes, std::span<const std::size_t> batch,
                     double clamp_offset) {
  const double n_total = static_cast<double>(episodes.size());
  const double scale = n_total / static_cast<double>(batch.size());
  BatchEvaluation eval = evaluate_batch(p, episodes, batch, true);
  BatchLoss out;
  out.clamped = stabilize_loglik_inplace(eval.loglik, clamp_offset);
  Eigen::VectorXd grad = scale * eval.grad_sum;
  const double logpost = scale * eval.loglik.sum() + log_prior(p, &grad);
  out.loss = -logpost / n_total;
  out.grad = -grad / n_total;
  return out;
}

std::size_t count_clamped_rates(const ModelParams& p, std::span<const EpisodeRecord> episodes) {
  std::size_t clamped = 0;
  for (const auto& e : episodes) {
    for (int k = 0; k < static_cast<int>(p.structure().n_categories()); ++k) {
      if (intervention_rate(p, e, k).clamped) ++clamped;
    }
  }
  return clamped;
}

}  // namespace

FitReport fit(std::span<const EpisodeRecord> episodes, std::shared_ptr<const ModelStructure> structure,
              const FitConfig& config, std::optional<ModelParams> init, std::optional<FitState> resume) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  if (episodes.empty()) throw std::invalid_argument("fit: no episodes");
  validate_episodes(*structure, episodes);

  ModelParams params = init ? std::move(*init) : initial_params(structure, episodes);
  const Eigen::Index dim = params.size();
  const Eigen::VectorXd mask = params.free_mask();
  const bool vi = config.mode == FitMode::meanfield_vi;
  const Eigen::Index opt_dim = vi ? 2 * dim : dim;

  FitReport report;
  report.initial_loss = full_data_loss(params, episodes, config.clamp_offset);

  FitState state;
  std::mt19937_64 rng(config.seed);
  if (resume) {
    state = *resume;
    if (state.theta.size() != dim || state.adam_m.size() != opt_dim) {
      throw std::invalid_argument("fit: checkpoint does not match the model structure");
    }
    params.theta = state.theta;
    load_rng(rng, state.rng_state);
  } else {
    state.theta = params.theta;
    state.adam_m = Eigen::VectorXd::Zero(opt_dim);
    state.adam_v = Eigen::VectorXd::Zero(opt_dim);
    state.lr = config.initial_lr;
    state.best_loss = std::numeric_limits<double>::infinity();
    if (vi) state.vi_rho = Eigen::VectorXd::Constant(dim, inverse_softplus(config.vi_initial_scale));
  }

  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::normal_distribution<double> normal(0.0, 1.0);
  report.convergence_reason = "max_epochs";

  auto adam_step = [&](const Eigen::VectorXd& g) {
    ++state.step;
    state.adam_m = config.adam_beta1 * state.adam_m + (1 - config.adam_beta1) * g;
    state.adam_v = config.adam_beta2 * state.adam_v + (1 - config.adam_beta2) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(config.adam_beta1, static_cast<double>(state.step));
    const double c2 = 1 - std::pow(config.adam_beta2, static_cast<double>(state.step));
    return Eigen::VectorXd(state.lr * (state.adam_m / c1).array() /
                           ((state.adam_v / c2).array().sqrt() + config.adam_epsilon));
  };

  bool stop = false;
  while (!stop && state.epoch < config.max_epochs) {
    // Fresh permutation each epoch: batches are drawn without replacement.
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.minibatch_size) {
      const std::size_t stop_at = std::min(order.size(), start + config.minibatch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop_at - start);
      if (!vi) {
        BatchLoss bl = batch_loss(params, episodes, batch, config.clamp_offset);
        state.clamped_logliks += bl.clamped;
        if (!bl.grad.allFinite()) throw NumericFailure("fit: non-finite gradient");
        params.theta -= (adam_step(bl.grad.cwiseProduct(mask))).cwiseProduct(mask);
        loss_sum += bl.loss;
      } else {
        const Eigen::VectorXd sigma = state.vi_rho.unaryExpr([](double r) { return softplus(r); });
        const Eigen::VectorXd mean = params.theta;
        Eigen::VectorXd g_mean = Eigen::VectorXd::Zero(dim);
        Eigen::VectorXd g_rho = Eigen::VectorXd::Zero(dim);
        double loss = 0.0;
        ModelParams draw = params;
        for (int s = 0; s < config.vi_sample_size; ++s) {
          Eigen::VectorXd eps(dim);
          for (Eigen::Index i = 0; i < dim; ++i) eps[i] = normal(rng);
          eps = eps.cwiseProduct(mask);
          draw.theta = mean + sigma.cwiseProduct(eps);
          BatchLoss bl = batch_loss(draw, episodes, batch, config.clamp_offset);
          state.clamped_logliks += bl.clamped;
          loss += bl.loss;
          g_mean += bl.grad;
          g_rho += bl.grad.cwiseProduct(eps);
        }
        const double S = config.vi_sample_size;
        const double n_total = static_cast<double>(episodes.size());
        const Eigen::VectorXd sig = state.vi_rho.unaryExpr([](double r) { return sigmoid(r); });
        // Negative ELBO per episode: expected loss minus entropy / n.
        const double entropy = (sigma.array().log() * mask.array()).sum();
        loss = loss / S - entropy / n_total;
        g_mean /= S;
        g_rho = (g_rho / S).cwiseProduct(sig) - (sig.array() / sigma.array()).matrix() / n_total;
        if (!g_mean.allFinite() || !g_rho.allFinite()) throw NumericFailure("fit: non-finite VI gradient");
        Eigen::VectorXd g(opt_dim);
        g << g_mean.cwiseProduct(mask), g_rho.cwiseProduct(mask);
        const Eigen::VectorXd step = adam_step(g);
        params.theta -= step.head(dim).cwiseProduct(mask);
        state.vi_rho -= step.tail(dim).cwiseProduct(mask);
        loss_sum += loss;
      }
      ++batches;
    }
    const double epoch_loss = loss_sum / batches;
    if (!std::isfinite(epoch_loss)) throw NumericFailure("fit: non-finite epoch loss");
    state.epoch_losses.push_back(epoch_loss);
    ++state.epoch;
    if (epoch_loss < state.best_loss) {
      state.best_loss = epoch_loss;
      state.stale_epochs = 0;
    } else {
      ++state.stale_epochs;
      state.lr *= config.lr_decay_factor;
      if (state.stale_epochs >= config.patience_epochs) {
        report.convergence_reason = "no_improvement";
        stop = true;
      }
    }
    state.theta = params.theta;
    state.rng_state = save_rng(rng);
    if (config.on_checkpoint && config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0) {
      config.on_checkpoint(state);
    }
  }
  if (resume && state.epoch >= config.max_epochs && state.epoch_losses.size() == resume->epoch_losses.size()) {
    report.convergence_reason = "resumed_complete";
  }

  if (!vi && config.reallocate_terms && config.initial_lr > 0) {
    for (Block b : kBlocks) {
      const ParamSpec& spec = structure->spec(b);
      if (spec.fixed) continue;
      Eigen::VectorXd adjustable = params.layout(b).free_mask();
      if (spec.prior.horseshoe) adjustable.head(params.layout(b).width()).setZero();
      params.block(b) = prior_optimal_allocation(params.decomposition(b), spec.prior, adjustable).values;
    }
  }

  report.epoch_losses = state.epoch_losses;
  report.epochs_run = state.epoch;
  report.final_lr = state.lr;
  report.clamped_logliks = state.clamped_logliks;
  if (vi) report.vi_scales = state.vi_rho.unaryExpr([](double r) { return softplus(r); }).cwiseProduct(mask);
  report.clamped_rates = count_clamped_rates(params, episodes);
  if (report.clamped_rates > 0) {
    report.warnings.push_back(std::to_string(report.clamped_rates) + " intervention rates clamped at exp(30)");
  }
  report.params = std::move(params);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

FitReport two_stage_expand(std::span<const EpisodeRecord> episodes, std::shared_ptr<const ModelStructure> structure,
                           const FitConfig& config, int top_k) {
  const int n_features = static_cast<int>(structure->n_features());
  std::vector<std::string> warnings;
  if (top_k < 0) throw std::invalid_argument("two_stage_expand: top_k must be >= 0");
  if (top_k > n_features) {
    warnings.push_back("top_k " + std::to_string(top_k) + " exceeds the " + std::to_string(n_features) +
                       " features; expanding all of them");
    top_k = n_features;
  }

  ModelParams stage1 = initial_params(structure, episodes);
  stage1.set_expanded_features(std::vector<bool>(n_features, false));
  FitReport first = fit(episodes, structure, config, stage1);

  const auto leading = first.params.block(Block::beta).head(n_features);
  std::vector<int> ranked(n_features);
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](int a, int b) { return std::abs(leading[a]) > std::abs(leading[b]); });
  ranked.resize(top_k);
  std::sort(ranked.begin(), ranked.end());

  std::vector<bool> expanded(n_features, false);
  for (int j : ranked) expanded[j] = true;
  ModelParams stage2 = first.params;
  stage2.set_expanded_features(expanded);
  FitConfig second_config = config;
  second_config.seed = config.seed + 1;
  FitReport second = fit(episodes, structure, second_config, stage2);

  second.selected_features = ranked;
  second.empty_expansion = ranked.empty();
  if (second.empty_expansion) warnings.push_back("empty expansion: stage 2 keeps leading-order beta only");
  second.epoch_losses.insert(second.epoch_losses.begin(), first.epoch_losses.begin(), first.epoch_losses.end());
  second.initial_loss = first.initial_loss;
  second.epochs_run += first.epochs_run;
  second.clamped_logliks += first.clamped_logliks;
  second.wall_seconds += first.wall_seconds;
  warnings.insert(warnings.end(), second.warnings.begin(), second.warnings.end());
  second.warnings = std::move(warnings);
  return second;
}

}  // namespace phantomhaz
