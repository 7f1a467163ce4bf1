#pragma once

// Small random model instances and a brute-force log-hazard recomputation.

#include "phantomhaz/model.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace fixture {

using namespace phantomhaz;

inline std::vector<Axis> toy_axes() {
  return {Axis{"sex", {"F", "M"}}, Axis{"age", {"young", "mid", "old"}}};
}

/// Every block over both axes to order 2, Gaussian priors, no horseshoe.
inline std::shared_ptr<ModelStructure> toy_structure(int features = 3, int categories = 2, bool horseshoe = false) {
  std::vector<std::string> fs, cs;
  for (int j = 0; j < features; ++j) fs.push_back("f" + std::to_string(j));
  for (int k = 0; k < categories; ++k) cs.push_back("c" + std::to_string(k));
  auto s = std::make_shared<ModelStructure>(ModelStructure::with_defaults(fs, cs, toy_axes()));
  for (Block b : kBlocks) s->spec(b).max_order = 2;
  if (!horseshoe) s->spec(Block::beta).prior.horseshoe.reset();
  return s;
}

inline Lattice toy_lattice() {
  Eigen::VectorXd counts(6);
  counts << 40, 10, 25, 5, 0, 20;
  return Lattice(toy_axes(), counts);
}

template <typename Rng>
ModelParams random_params(std::shared_ptr<ModelStructure> s, Rng& rng, double scale = 0.3) {
  ModelParams p(s, toy_lattice());
  std::normal_distribution<double> z(0.0, 1.0);
  for (auto& v : p.theta) v = z(rng) * scale;
  // Keep each coordinate within its prior scale so floored slices stay tiny.
  for (Block b : kBlocks) {
    const auto var = prior_variances(p.layout(b), s->spec(b).prior);
    p.block(b).array() *= var.array().sqrt().min(1.0);
  }
  p.block(Block::alpha) *= 0.5;
  p.block(Block::alpha).head(s->intervals()).array() += std::log(0.01);
  p.theta.array() *= p.free_mask().array();
  return p;
}

template <typename Rng>
EpisodeRecord random_episode(const ModelStructure& s, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EpisodeRecord e;
  e.id = "e";
  e.x.resize(s.n_features());
  for (auto& v : e.x) v = u(rng) < 0.4 ? 1.0 : 0.0;
  e.kappa = {static_cast<int>(u(rng) * 2), static_cast<int>(u(rng) * 3)};
  e.time = 1.0 + 120.0 * u(rng);
  e.event = u(rng) < 0.6;
  e.exposure = e.time;
  const int n_iv = static_cast<int>(u(rng) * 4);
  for (int i = 0; i < n_iv; ++i) e.interventions.push_back({e.time * u(rng), static_cast<int>(u(rng) * s.n_categories()), 0.0});
  std::sort(e.interventions.begin(), e.interventions.end(), [](auto& a, auto& b) { return a.time < b.time; });
  e.counts = Eigen::VectorXd::Zero(s.n_categories());
  for (const auto& iv : e.interventions) e.counts[iv.category] += 1.0;
  return e;
}

/// Sum of every stored term whose axes agree with kappa, read straight from theta.
inline Eigen::VectorXd brute_lookup(const ModelParams& p, Block b, const MultiIndex& kappa) {
  const auto& layout = p.layout(b);
  const auto& axes = p.axes(b);
  const Eigen::Index w = layout.width();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(w);
  for (const auto& t : layout.terms()) {
    Eigen::Index s = 0;
    for (int local : t.axes) s = s * layout.lattice().axes()[local].size() + kappa[axes[local]];
    out += p.theta.segment(p.offset(b) + t.offset + s * w, w);
  }
  return out;
}

inline double brute_log_hazard(const ModelParams& p, const EpisodeRecord& e, double t) {
  const auto& s = p.structure();
  const Eigen::Index I = s.intervals();
  const Eigen::Index P = s.n_features();
  const auto alpha = brute_lookup(p, Block::alpha, e.kappa);
  const auto beta = brute_lookup(p, Block::beta, e.kappa);
  const auto gamma = brute_lookup(p, Block::gamma, e.kappa);
  const auto eta = brute_lookup(p, Block::eta, e.kappa);
  const auto nu = brute_lookup(p, Block::nu, e.kappa);
  const auto xi = brute_lookup(p, Block::xi, e.kappa);
  auto interval = [&](double x) {
    Eigen::Index i = 0;
    while (i < static_cast<Eigen::Index>(s.breakpoints.size()) && x >= s.breakpoints[i]) ++i;
    return i;
  };
  double lh = alpha[interval(t)];
  for (Eigen::Index j = 0; j < P; ++j) lh += beta[j] * e.x[j];
  for (const auto& iv : e.interventions) {
    if (t > iv.time) lh += gamma[iv.category * I + interval(iv.time)];
  }
  for (Eigen::Index k = 0; k < s.n_categories(); ++k) {
    double lm = nu[k];
    for (Eigen::Index j = 0; j < P; ++j) lm += xi[k * P + j] * e.x[j];
    lh += eta[k] * std::exp(std::min(lm, 30.0));
  }
  return lh;
}

}  // namespace fixture
