#include "phantomhaz/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace phantomhaz {

void SimConfig::validate() const {
  if (!structure) throw std::invalid_argument("simulate: missing model structure");
  if (truth.size() == 0) throw std::invalid_argument("simulate: missing true parameters");
  if (&truth.structure() != structure.get() && truth.structure().axes.size() != structure->axes.size()) {
    throw std::invalid_argument("simulate: true parameters do not match the structure");
  }
  if (!(censor_day > 0) || !std::isfinite(censor_day)) throw std::invalid_argument("simulate: censoring day must be > 0");
  if (feature_rates.size() != static_cast<std::size_t>(structure->n_features())) {
    throw std::invalid_argument("simulate: need one Bernoulli rate per feature");
  }
  for (double r : feature_rates) {
    if (!(r >= 0 && r <= 1)) throw std::invalid_argument("simulate: feature rates must lie in [0, 1]");
  }
  if (timing.size() != static_cast<std::size_t>(structure->n_categories())) {
    throw std::invalid_argument("simulate: need one timing rule per category");
  }
  for (const auto& t : timing) {
    if (!(t.uptake >= 0 && t.uptake <= 1)) throw std::invalid_argument("simulate: uptake must lie in [0, 1]");
    if (const auto* u = std::get_if<UniformTiming>(&t.rule)) {
      if (!(u->lo >= 0 && u->hi > u->lo)) throw std::invalid_argument("simulate: bad uniform timing window");
    }
    if (const auto* p = std::get_if<PointMassTiming>(&t.rule)) {
      if (!(p->day >= 0)) throw std::invalid_argument("simulate: point-mass day must be >= 0");
    }
    if (const auto* r = std::get_if<RateTiming>(&t.rule)) {
      if (r->max_events < 1) throw std::invalid_argument("simulate: max_events must be >= 1");
    }
  }
  if (!level_probs.empty()) {
    if (level_probs.size() != structure->axes.size()) throw std::invalid_argument("simulate: need level probabilities per axis");
    for (std::size_t a = 0; a < level_probs.size(); ++a) {
      if (static_cast<int>(level_probs[a].size()) != structure->axes[a].size()) {
        throw std::invalid_argument("simulate: level probabilities for axis '" + structure->axes[a].name +
                                    "' have the wrong length");
      }
      double total = 0;
      for (double q : level_probs[a]) {
        if (!(q >= 0)) throw std::invalid_argument("simulate: level probabilities must be >= 0");
        total += q;
      }
      if (!(total > 0)) throw std::invalid_argument("simulate: level probabilities sum to zero");
    }
  }
}

namespace {

std::mt19937_64 episode_stream(std::uint64_t seed, std::uint64_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
  cfg.validate();
  const ModelStructure& s = *cfg.structure;
  const int n_axes = static_cast<int>(s.axes.size());
  const int n_cat = static_cast<int>(s.n_categories());
  SimResult out;
  out.truth = cfg.truth;
  out.episodes.reserve(cfg.n_episodes);

  for (std::size_t n = 0; n < cfg.n_episodes; ++n) {
    std::mt19937_64 rng = episode_stream(cfg.seed, n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> unit_exp(1.0);

    EpisodeRecord e;
    e.id = "e" + std::to_string(n + 1);
    e.kappa.resize(n_axes);
    for (int a = 0; a < n_axes; ++a) {
      if (cfg.level_probs.empty()) {
        std::uniform_int_distribution<int> pick(0, s.axes[a].size() - 1);
        e.kappa[a] = pick(rng);
      } else {
        std::discrete_distribution<int> pick(cfg.level_probs[a].begin(), cfg.level_probs[a].end());
        e.kappa[a] = pick(rng);
      }
    }
    e.x.resize(s.n_features());
    for (Eigen::Index j = 0; j < e.x.size(); ++j) e.x[j] = unif(rng) < cfg.feature_rates[j] ? 1.0 : 0.0;

    std::vector<Intervention> intended;
    for (int k = 0; k < n_cat; ++k) {
      const auto& t = cfg.timing[k];
      const bool scheduled = unif(rng) < t.uptake;
      if (const auto* p = std::get_if<PointMassTiming>(&t.rule)) {
        if (scheduled) intended.push_back({p->day, k, 0.0});
      } else if (const auto* u = std::get_if<UniformTiming>(&t.rule)) {
        const double day = u->lo + unif(rng) * (u->hi - u->lo);
        if (scheduled) intended.push_back({day, k, 0.0});
      } else {
        const auto& r = std::get<RateTiming>(t.rule);
        const double per_day = intervention_rate(cfg.truth, e, k).rate / s.rate_period_days;
        double day = 0.0;
        for (int m = 0; m < r.max_events && per_day > 0; ++m) {
          day += unit_exp(rng) / per_day;
          if (!(day < cfg.censor_day)) break;
          if (scheduled) intended.push_back({day, k, 0.0});
        }
      }
    }
    std::stable_sort(intended.begin(), intended.end(), [](const Intervention& a, const Intervention& b) {
      return a.time < b.time || (a.time == b.time && a.category < b.category);
    });

    // An intended intervention only changes the hazard after its own time, so
    // drawing T under the full intended schedule and then discarding those at
    // or after T realises the "only if still waiting" mechanism exactly.
    e.interventions = intended;
    const PiecewiseHazard h = episode_hazard(cfg.truth, e);
    const double t_event = inverse_cumulative_hazard(h, unit_exp(rng));
    e.event = t_event <= cfg.censor_day;
    e.time = e.event ? t_event : cfg.censor_day;
    std::erase_if(e.interventions, [&](const Intervention& iv) { return !(iv.time < e.time); });
    e.counts = Eigen::VectorXd::Zero(n_cat);
    for (const auto& iv : e.interventions) e.counts[iv.category] += 1.0;
    e.exposure = e.time;
    out.episodes.push_back(std::move(e));
  }
  return out;
}

PiecewiseHazard calibrate_baseline(const std::vector<std::pair<double, double>>& targets) {
  if (targets.empty()) throw std::invalid_argument("calibrate_baseline: no targets");
  Eigen::VectorXd breakpoints(static_cast<Eigen::Index>(targets.size()) - 1);
  Eigen::VectorXd rates(static_cast<Eigen::Index>(targets.size()));
  double prev_day = 0.0;
  double prev_log_s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto [day, prob] = targets[i];
    if (!(day > prev_day) || !std::isfinite(day)) {
      throw std::invalid_argument("calibrate_baseline: target days must be > 0 and strictly increasing");
    }
    const double log_s = std::log1p(-prob);
    if (!(prob < 1) || !(log_s < prev_log_s)) {
      throw std::invalid_argument("calibrate_baseline: infeasible target at day " + std::to_string(day) +
                                  " (probabilities must strictly increase and stay below 1)");
    }
    rates[static_cast<Eigen::Index>(i)] = (prev_log_s - log_s) / (day - prev_day);
    if (i + 1 < targets.size()) breakpoints[static_cast<Eigen::Index>(i)] = day;
    prev_day = day;
    prev_log_s = log_s;
  }
  return PiecewiseHazard::from_rates(breakpoints, rates);
}

Eigen::VectorXd log_hazards_on_grid(const PiecewiseHazard& h, const std::vector<double>& breakpoints) {
  for (Eigen::Index i = 0; i < h.breakpoints().size(); ++i) {
    if (std::find(breakpoints.begin(), breakpoints.end(), h.breakpoints()[i]) == breakpoints.end()) {
      throw std::invalid_argument("log_hazards_on_grid: hazard changes inside a grid interval");
    }
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(breakpoints.size()) + 1);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double start = i == 0 ? 0.0 : breakpoints[static_cast<std::size_t>(i) - 1];
    out[i] = h.log_hazards()[h.interval(start)];
  }
  return out;
}

namespace {

void set_slice(ModelParams& p, Block b, int term_index, Eigen::Index slice, const Eigen::VectorXd& v) {
  const auto& layout = p.layout(b);
  const auto& term = layout.terms().at(static_cast<std::size_t>(term_index));
  p.block(b).segment(term.offset + slice * layout.width(), layout.width()) = v;
}

/// Index of the term over exactly `axes` (block-local positions).
int term_index(const DecompositionLayout& layout, const std::vector<int>& axes) {
  for (std::size_t i = 0; i < layout.terms().size(); ++i) {
    if (layout.terms()[i].axes == axes) return static_cast<int>(i);
  }
  throw std::logic_error("term_index: no such term");
}

}  // namespace

SimConfig example1_config(std::size_t n_episodes, std::uint64_t seed, double uptake) {
  auto structure = std::make_shared<ModelStructure>(
      ModelStructure::with_defaults({}, {"followup"}, {Axis{"cohort", {"all"}}}));
  structure->joint_poisson = false;
  // No selection in this cohort: the adjustment loading is held at zero.
  structure->spec(Block::eta).fixed = true;
  structure->spec(Block::beta).prior.horseshoe.reset();

  SimConfig cfg;
  cfg.n_episodes = n_episodes;
  cfg.seed = seed;
  cfg.structure = structure;
  cfg.truth = ModelParams(structure, Lattice(structure->axes));
  const PiecewiseHazard base = calibrate_baseline({{7.0, 0.07}, {30.0, 0.17}});
  cfg.truth.block(Block::alpha).head(structure->intervals()) = log_hazards_on_grid(base, structure->breakpoints);
  cfg.timing = {CategoryTiming{PointMassTiming{7.0}, uptake}};
  return cfg;
}

SimConfig recovery_config(std::size_t n_episodes, std::uint64_t seed) {
  std::vector<std::string> features;
  for (int j = 1; j <= 20; ++j) features.push_back("f" + std::string(j < 10 ? "0" : "") + std::to_string(j));
  std::vector<Axis> axes{{"sex", {"F", "M"}}, {"age", {"65-74", "75-84", "85+"}}};
  auto structure = std::make_shared<ModelStructure>(
      ModelStructure::with_defaults(features, {"office_or_outpatient", "home"}, axes));
  auto& s = *structure;
  s.spec(Block::alpha) = {{0, 1}, 2, {1.0, 100.0, std::nullopt}};
  s.spec(Block::beta) = {{}, 0, {1.0, 100.0, std::nullopt}};
  s.spec(Block::gamma) = {{0, 1}, 1, {1.0, 100.0, std::nullopt}};
  s.spec(Block::eta) = {{}, 0, {1.0, 100.0, std::nullopt}};
  s.spec(Block::nu) = {{0, 1}, 1, {1.0, 100.0, std::nullopt}};
  s.spec(Block::xi) = {{}, 0, {1.0, 100.0, std::nullopt}};

  SimConfig cfg;
  cfg.n_episodes = n_episodes;
  cfg.seed = seed;
  cfg.structure = structure;
  ModelParams truth(structure, Lattice(structure->axes));
  const auto I = s.intervals();
  const auto P = s.n_features();

  Eigen::VectorXd alpha(I);
  alpha << std::log(0.0104), std::log(0.0049), std::log(0.003), std::log(0.0015);
  set_slice(truth, Block::alpha, 0, 0, alpha);
  const auto& la = truth.layout(Block::alpha);
  set_slice(truth, Block::alpha, term_index(la, {0}), 0, Eigen::VectorXd::Constant(I, -0.1));
  set_slice(truth, Block::alpha, term_index(la, {0}), 1, Eigen::VectorXd::Constant(I, 0.1));
  set_slice(truth, Block::alpha, term_index(la, {1}), 0, Eigen::VectorXd::Constant(I, -0.15));
  set_slice(truth, Block::alpha, term_index(la, {1}), 2, Eigen::VectorXd::Constant(I, 0.15));

  Eigen::VectorXd beta(P);
  beta << 0.4, -0.3, 0.25, 0.0, -0.2, 0.15, 0.0, 0.35, -0.1, 0.05, 0.0, -0.4, 0.3, 0.0, 0.1, -0.25, 0.2, 0.0, -0.15,
      0.45;
  set_slice(truth, Block::beta, 0, 0, beta);

  Eigen::VectorXd gamma(2 * I);
  gamma << -0.3, -0.3, -0.2, -0.1, 0.0, -0.2, -0.1, 0.05;
  set_slice(truth, Block::gamma, 0, 0, gamma);
  const auto& lg = truth.layout(Block::gamma);
  Eigen::VectorXd sex_shift = Eigen::VectorXd::Zero(2 * I);
  sex_shift.head(I).setConstant(0.05);
  set_slice(truth, Block::gamma, term_index(lg, {0}), 0, -sex_shift);
  set_slice(truth, Block::gamma, term_index(lg, {0}), 1, sex_shift);

  Eigen::VectorXd nu(2);
  nu << std::log(2.0), std::log(1.5);
  set_slice(truth, Block::nu, 0, 0, nu);
  const auto& ln = truth.layout(Block::nu);
  set_slice(truth, Block::nu, term_index(ln, {1}), 0, Eigen::VectorXd::Constant(2, -0.2));
  set_slice(truth, Block::nu, term_index(ln, {1}), 2, Eigen::VectorXd::Constant(2, 0.2));

  Eigen::VectorXd xi = Eigen::VectorXd::Zero(2 * P);
  xi.head(5).setConstant(0.2);
  xi.segment(P + 5, 5).setConstant(-0.2);
  set_slice(truth, Block::xi, 0, 0, xi);

  cfg.truth = std::move(truth);
  for (Eigen::Index j = 0; j < P; ++j) cfg.feature_rates.push_back(0.1 + 0.02 * static_cast<double>(j));
  cfg.timing = {CategoryTiming{RateTiming{1000}, 1.0}, CategoryTiming{RateTiming{1000}, 1.0}};
  return cfg;
}

double horizon_risk(const ModelParams& p, const EpisodeRecord& e, double horizon) {
  return -std::expm1(-cumulative_hazard(p, e, horizon, false));
}

}  // namespace phantomhaz
