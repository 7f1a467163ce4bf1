#include "phantomhaz/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace phantomhaz {

const char* block_name(Block b) {
  switch (b) {
    case Block::alpha: return "alpha";
    case Block::beta: return "beta";
    case Block::gamma: return "gamma";
    case Block::eta: return "eta";
    case Block::nu: return "nu";
    case Block::xi: return "xi";
  }
  return "?";
}

void EpisodeRecord::validate(Eigen::Index n_features, std::size_t n_categories, const Lattice& lattice) const {
  auto fail = [&](const std::string& why) { throw std::invalid_argument("episode '" + id + "': " + why); };
  if (!(time >= 0) || !std::isfinite(time)) fail("observed time must be finite and >= 0");
  if (!(exposure >= 0) || !std::isfinite(exposure)) fail("exposure must be finite and >= 0");
  if (x.size() != n_features) fail("covariate vector has wrong length");
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0 && x[j] != 1.0) fail("covariates must be binary");
  }
  if (counts.size() != static_cast<Eigen::Index>(n_categories)) fail("count vector has wrong length");
  if ((counts.array() < 0).any() || !counts.allFinite()) fail("counts must be finite and >= 0");
  for (const auto& item : interventions) {
    if (item.category < 0 || item.category >= static_cast<int>(n_categories)) fail("unknown intervention category");
    if (!(item.time >= 0) || !std::isfinite(item.time)) fail("intervention time must be finite and >= 0");
  }
  for (std::size_t k = 1; k < interventions.size(); ++k) {
    if (interventions[k].time < interventions[k - 1].time) fail("interventions must be sorted by time");
  }
  lattice.check(kappa);
}

// ---------------------------------------------------------------------------
// Structure

Eigen::Index ModelStructure::width(Block b) const {
  const Eigen::Index I = intervals();
  const Eigen::Index P = n_features();
  const Eigen::Index K = n_categories();
  switch (b) {
    case Block::alpha: return I;
    case Block::beta: return P;
    case Block::gamma: return K * I;
    case Block::eta: return K;
    case Block::nu: return K;
    case Block::xi: return K * P;
  }
  return 0;
}

int ModelStructure::category_index(const std::string& name) const {
  const auto it = std::find(categories.begin(), categories.end(), name);
  if (it == categories.end()) throw std::invalid_argument("unknown intervention category '" + name + "'");
  return static_cast<int>(it - categories.begin());
}

ModelStructure ModelStructure::with_defaults(std::vector<std::string> features, std::vector<std::string> categories,
                                             std::vector<Axis> axes) {
  ModelStructure s;
  s.features = std::move(features);
  s.categories = std::move(categories);
  s.axes = std::move(axes);
  std::vector<int> all(s.axes.size());
  std::iota(all.begin(), all.end(), 0);
  for (Block b : kBlocks) {
    auto& spec = s.spec(b);
    spec.axes = all;
    spec.max_order = (b == Block::alpha || b == Block::gamma) ? 3 : 2;
    spec.prior.base_variance = 1.0;
    spec.prior.leading_variance = 100.0;
  }
  s.spec(Block::beta).prior.horseshoe = HorseshoeSpec{};
  return s;
}

void ModelStructure::validate() const {
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > 0) || (i > 0 && !(breakpoints[i] > breakpoints[i - 1]))) {
      throw std::invalid_argument("model: breakpoints must be > 0 and strictly increasing");
    }
  }
  if (!(rate_period_days > 0)) throw std::invalid_argument("model: rate period must be > 0");
  for (Block b : kBlocks) {
    const auto& spec = this->spec(b);
    for (std::size_t i = 0; i < spec.axes.size(); ++i) {
      if (spec.axes[i] < 0 || spec.axes[i] >= static_cast<int>(axes.size()) ||
          (i > 0 && spec.axes[i] <= spec.axes[i - 1])) {
        throw std::invalid_argument(std::string("model: bad axis list for ") + block_name(b));
      }
    }
    if (spec.max_order < 0) throw std::invalid_argument(std::string("model: bad max order for ") + block_name(b));
    spec.prior.validate();
    if (spec.prior.horseshoe && b != Block::beta) {
      throw std::invalid_argument("model: the horseshoe is only supported on beta");
    }
  }
}

// ---------------------------------------------------------------------------
// Parameters

ModelParams::ModelParams(std::shared_ptr<const ModelStructure> structure, const Lattice& lattice)
    : structure_(std::move(structure)), lattice_(lattice) {
  structure_->validate();
  if (lattice_.dims() != static_cast<int>(structure_->axes.size())) {
    throw std::invalid_argument("model: lattice does not match the structure's axes");
  }
  Eigen::Index offset = 0;
  for (Block b : kBlocks) {
    const auto& spec = structure_->spec(b);
    const int i = static_cast<int>(b);
    layouts_[i] = std::make_shared<DecompositionLayout>(lattice_.project(spec.axes), spec.max_order,
                                                       structure_->width(b));
    offsets_[i] = offset;
    offset += layouts_[i]->size();
  }
  horseshoe_offset_ = offset;
  horseshoe_size_ = structure_->spec(Block::beta).prior.horseshoe ? structure_->n_features() : 0;
  theta = Eigen::VectorXd::Zero(offset + horseshoe_size_);
  // Local scales start at lambda = 1.
  if (horseshoe_size_ > 0) horseshoe_local().setConstant(inverse_softplus(1.0));
}

Eigen::VectorXd ModelParams::free_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(theta.size());
  for (Block b : kBlocks) {
    if (structure_->spec(b).fixed) {
      mask.segment(offset(b), layout(b).size()).setZero();
    } else {
      mask.segment(offset(b), layout(b).size()) = layout(b).free_mask();
    }
  }
  return mask;
}

void ModelParams::set_expanded_features(const std::vector<bool>& expanded) {
  auto& beta = layouts_[static_cast<int>(Block::beta)];
  beta = std::make_shared<DecompositionLayout>(*beta);
  beta->set_expanded_columns(expanded);
  // Keep pinned coordinates at exactly zero.
  block(Block::beta).array() *= beta->free_mask().array();
}

MultiIndex ModelParams::project(Block b, const MultiIndex& kappa) const {
  const auto& positions = axes(b);
  MultiIndex out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) out[i] = kappa.at(positions[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Per-episode evaluation

namespace {

/// Episode-specific parameter values theta^(kappa) for every block, and the
/// term offsets they were summed from.
struct Resolved {
  std::array<Eigen::VectorXd, 6> value;
  std::array<std::vector<Eigen::Index>, 6> offsets;
};

void resolve(const ModelParams& p, const MultiIndex& kappa, Resolved& r) {
  p.lattice().check(kappa);
  for (Block b : kBlocks) {
    const int i = static_cast<int>(b);
    const auto& layout = p.layout(b);
    layout.active_offsets(p.project(b, kappa), r.offsets[i]);
    r.value[i].setZero(layout.width());
    const Eigen::Index base = p.offset(b);
    for (Eigen::Index off : r.offsets[i]) r.value[i] += p.theta.segment(base + off, layout.width());
  }
}

const Eigen::VectorXd& val(const Resolved& r, Block b) { return r.value[static_cast<int>(b)]; }

struct Rates {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_mu;
  std::vector<bool> clamped;
};

void compute_rates(const ModelParams& p, const EpisodeRecord& e, const Resolved& r, Rates& out) {
  const Eigen::Index K = p.structure().n_categories();
  const Eigen::Index P = p.structure().n_features();
  const auto& nu = val(r, Block::nu);
  const auto& xi = val(r, Block::xi);
  out.mu.resize(K);
  out.log_mu.resize(K);
  out.clamped.assign(K, false);
  for (Eigen::Index k = 0; k < K; ++k) {
    double lm = nu[k] + xi.segment(k * P, P).dot(e.x);
    if (lm > kLogRateClamp) {
      lm = kLogRateClamp;
      out.clamped[k] = true;
    }
    out.log_mu[k] = lm;
    out.mu[k] = std::exp(lm);
  }
}

/// Log hazard shift common to every time: covariates plus selection adjustment.
double static_log_hazard(const EpisodeRecord& e, const Resolved& r, const Rates& rates) {
  return val(r, Block::beta).dot(e.x) + val(r, Block::eta).dot(rates.mu);
}

Eigen::Index interval_of(const std::vector<double>& breakpoints, double t) {
  return std::upper_bound(breakpoints.begin(), breakpoints.end(), t) - breakpoints.begin();
}

double gamma_of(const ModelParams& p, const Resolved& r, const Intervention& item) {
  const Eigen::Index I = p.structure().intervals();
  return val(r, Block::gamma)[item.category * I + interval_of(p.structure().breakpoints, item.time)];
}

/// Cumulative hazard walk over the merged breakpoint/intervention grid on
/// [0, t). When `interval_mass` is given it receives the mass per PEM
/// interval; `activation` receives Lambda at the moment each intervention
/// switches on (NaN if it never does before t).
double walk(const ModelParams& p, const EpisodeRecord& e, const Resolved& r, double shift, double t,
            bool with_interventions, Eigen::VectorXd* interval_mass, std::vector<double>* activation) {
  const auto& bp = p.structure().breakpoints;
  const auto& alpha = val(r, Block::alpha);
  const auto& items = e.interventions;
  const std::size_t n_items = with_interventions ? items.size() : 0;
  if (interval_mass) interval_mass->setZero(p.structure().intervals());
  if (activation) activation->assign(items.size(), std::numeric_limits<double>::quiet_NaN());

  double total = 0.0;
  double effects = 0.0;
  double a = 0.0;
  std::size_t bi = 0;
  std::size_t ki = 0;
  // Effects switch on for times strictly after tau, i.e. from segment start tau.
  auto activate = [&] {
    while (ki < n_items && items[ki].time <= a && items[ki].time < t) {
      effects += gamma_of(p, r, items[ki]);
      if (activation) (*activation)[ki] = total;
      ++ki;
    }
  };
  activate();
  constexpr double inf = std::numeric_limits<double>::infinity();
  while (a < t) {
    const double next_bp = bi < bp.size() ? bp[bi] : inf;
    const double next_tau = ki < n_items ? items[ki].time : inf;
    const double b = std::min({next_bp, next_tau, t});
    if (b > a) {
      const double mass = std::exp(alpha[bi] + shift + effects) * (b - a);
      total += mass;
      if (interval_mass) (*interval_mass)[bi] += mass;
    }
    if (b >= t) break;
    a = b;
    while (bi < bp.size() && bp[bi] <= a) ++bi;
    activate();
  }
  return total;
}

/// Log hazard at t with effects of interventions strictly before t.
double log_hazard_at(const ModelParams& p, const EpisodeRecord& e, const Resolved& r, double shift, double t) {
  double lh = val(r, Block::alpha)[interval_of(p.structure().breakpoints, t)] + shift;
  for (const auto& item : e.interventions) {
    if (item.time < t) lh += gamma_of(p, r, item);
  }
  return lh;
}

struct Scratch {
  Resolved resolved;
  Rates rates;
  Eigen::VectorXd interval_mass;
  std::vector<double> activation;
  std::array<Eigen::VectorXd, 6> d;
};

/// Log likelihood of one episode; when `grad` is non-null and the value is
/// finite, adds scale * d loglik / d theta into it.
double episode_eval(const ModelParams& p, const EpisodeRecord& e, Scratch& s, Eigen::VectorXd* grad, double scale) {
  const auto& structure = p.structure();
  resolve(p, e.kappa, s.resolved);
  const Resolved& r = s.resolved;
  compute_rates(p, e, r, s.rates);
  const double shift = static_log_hazard(e, r, s.rates);
  const double Lambda =
      walk(p, e, r, shift, e.time, true, grad ? &s.interval_mass : nullptr, grad ? &s.activation : nullptr);
  const double ev = e.event ? 1.0 : 0.0;
  double ll = -Lambda;
  if (e.event) ll += log_hazard_at(p, e, r, shift, e.time);

  const Eigen::Index K = structure.n_categories();
  Eigen::VectorXd count_residual = Eigen::VectorXd::Zero(K);
  if (structure.joint_poisson) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const double m = s.rates.mu[k] * e.exposure / structure.rate_period_days;
      ll += intervention_count_logpmf(e.counts[k], s.rates.mu[k], e.exposure, structure.rate_period_days);
      count_residual[k] = e.counts[k] - m;
    }
  }
  if (!grad || !std::isfinite(ll)) return ll;

  const Eigen::Index I = structure.intervals();
  const Eigen::Index P = structure.n_features();
  for (Block b : kBlocks) s.d[static_cast<int>(b)].setZero(structure.width(b));
  auto& d_alpha = s.d[static_cast<int>(Block::alpha)];
  auto& d_beta = s.d[static_cast<int>(Block::beta)];
  auto& d_gamma = s.d[static_cast<int>(Block::gamma)];
  auto& d_eta = s.d[static_cast<int>(Block::eta)];
  auto& d_nu = s.d[static_cast<int>(Block::nu)];
  auto& d_xi = s.d[static_cast<int>(Block::xi)];

  d_alpha -= s.interval_mass;
  if (e.event) d_alpha[interval_of(structure.breakpoints, e.time)] += 1.0;
  const double resid = ev - Lambda;
  d_beta = resid * e.x;
  for (std::size_t k = 0; k < e.interventions.size(); ++k) {
    const auto& item = e.interventions[k];
    if (std::isnan(s.activation[k])) continue;
    const Eigen::Index col = item.category * I + interval_of(structure.breakpoints, item.time);
    d_gamma[col] += ev - (Lambda - s.activation[k]);
  }
  const auto& eta = val(r, Block::eta);
  for (Eigen::Index k = 0; k < K; ++k) {
    d_eta[k] = s.rates.mu[k] * resid;
    if (s.rates.clamped[k]) continue;
    const double d_logmu = eta[k] * s.rates.mu[k] * resid + count_residual[k];
    d_nu[k] = d_logmu;
    d_xi.segment(k * P, P) = d_logmu * e.x;
  }
  for (Block b : kBlocks) {
    const int i = static_cast<int>(b);
    const Eigen::Index width = structure.width(b);
    if (width == 0) continue;
    const Eigen::Index base = p.offset(b);
    for (Eigen::Index off : r.offsets[i]) grad->segment(base + off, width) += scale * s.d[i];
  }
  return ll;
}

}  // namespace

InterventionRate intervention_rate(const ModelParams& p, const EpisodeRecord& e, int category) {
  if (category < 0 || category >= p.structure().n_categories()) {
    throw std::out_of_range("intervention_rate: unknown category");
  }
  Resolved r;
  resolve(p, e.kappa, r);
  Rates rates;
  compute_rates(p, e, r, rates);
  return {rates.mu[category], rates.log_mu[category], static_cast<bool>(rates.clamped[category])};
}

double intervention_count_logpmf(double count, double rate, double exposure_days, double period_days) {
  const double m = rate * exposure_days / period_days;
  if (m == 0.0) return count == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return count * std::log(m) - m - std::lgamma(count + 1.0);
}

double total_log_hazard(const ModelParams& p, const EpisodeRecord& e, double t) {
  require_time(t, "total_log_hazard");
  Resolved r;
  resolve(p, e.kappa, r);
  Rates rates;
  compute_rates(p, e, r, rates);
  return log_hazard_at(p, e, r, static_log_hazard(e, r, rates), t);
}

double cumulative_hazard(const ModelParams& p, const EpisodeRecord& e, double t, bool with_interventions) {
  require_time(t, "cumulative_hazard");
  Resolved r;
  resolve(p, e.kappa, r);
  Rates rates;
  compute_rates(p, e, r, rates);
  return walk(p, e, r, static_log_hazard(e, r, rates), t, with_interventions, nullptr, nullptr);
}

PiecewiseHazard episode_hazard(const ModelParams& p, const EpisodeRecord& e, bool with_interventions) {
  Resolved r;
  resolve(p, e.kappa, r);
  Rates rates;
  compute_rates(p, e, r, rates);
  const double shift = static_log_hazard(e, r, rates);
  const auto& bp = p.structure().breakpoints;
  PiecewiseHazard h(Eigen::Map<const Eigen::VectorXd>(bp.data(), static_cast<Eigen::Index>(bp.size())),
                    (val(r, Block::alpha).array() + shift).matrix());
  if (with_interventions) {
    for (const auto& item : e.interventions) h = h.with_step(item.time, gamma_of(p, r, item));
  }
  return h;
}

double episode_loglik(const ModelParams& p, const EpisodeRecord& e) {
  Scratch s;
  return episode_eval(p, e, s, nullptr, 1.0);
}

double log_prior(const ModelParams& p, Eigen::VectorXd* grad) {
  double total = 0.0;
  for (Block b : kBlocks) {
    const auto& prior = p.structure().spec(b).prior;
    const bool horseshoe = prior.horseshoe.has_value();
    const ParamDecomposition d = p.decomposition(b);
    Eigen::VectorXd g;
    if (grad) g = Eigen::VectorXd::Zero(d.values.size());
    total += gaussian_logprior(d, prior, grad ? &g : nullptr, horseshoe);
    if (horseshoe && p.layout(b).width() > 0) {
      Eigen::VectorXd gv;
      Eigen::VectorXd gl;
      if (grad) {
        gv = Eigen::VectorXd::Zero(p.layout(b).width());
        gl = Eigen::VectorXd::Zero(p.layout(b).width());
      }
      total += horseshoe_joint_logprior(d.leading(), p.horseshoe_local(), prior.horseshoe->global_scale,
                                        prior.horseshoe->slab_scale, grad ? &gv : nullptr, grad ? &gl : nullptr);
      if (grad) {
        g.head(gv.size()) += gv;
        grad->segment(p.horseshoe_offset(), gl.size()) += gl;
      }
    }
    if (grad) grad->segment(p.offset(b), g.size()) += g;
  }
  return total;
}

double dataset_logpost(const ModelParams& p, std::span<const EpisodeRecord> episodes, double minibatch_scale) {
  Scratch s;
  double ll = 0.0;
  for (const auto& e : episodes) ll += episode_eval(p, e, s, nullptr, 1.0);
  return minibatch_scale * ll + log_prior(p);
}

Eigen::VectorXd gradient(const ModelParams& p, std::span<const EpisodeRecord> episodes, double minibatch_scale) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.size());
  Scratch s;
  for (const auto& e : episodes) episode_eval(p, e, s, &grad, minibatch_scale);
  log_prior(p, &grad);
  return grad;
}

BatchEvaluation evaluate_batch(const ModelParams& p, std::span<const EpisodeRecord> episodes, bool want_gradient) {
  BatchEvaluation out;
  out.loglik.resize(static_cast<Eigen::Index>(episodes.size()));
  if (want_gradient) out.grad_sum = Eigen::VectorXd::Zero(p.size());
  Scratch s;
  for (std::size_t n = 0; n < episodes.size(); ++n) {
    out.loglik[static_cast<Eigen::Index>(n)] =
        episode_eval(p, episodes[n], s, want_gradient ? &out.grad_sum : nullptr, 1.0);
  }
  return out;
}

BatchEvaluation evaluate_batch(const ModelParams& p, std::span<const EpisodeRecord> episodes,
                               std::span<const std::size_t> indices, bool want_gradient) {
  BatchEvaluation out;
  out.loglik.resize(static_cast<Eigen::Index>(indices.size()));
  if (want_gradient) out.grad_sum = Eigen::VectorXd::Zero(p.size());
  Scratch s;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    out.loglik[static_cast<Eigen::Index>(n)] =
        episode_eval(p, episodes[indices[n]], s, want_gradient ? &out.grad_sum : nullptr, 1.0);
  }
  return out;
}

}  // namespace phantomhaz
