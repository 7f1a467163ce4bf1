#include "phantomhaz/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

namespace phantomhaz {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, std::size_t& positives) {
  if (scores.size() != labels.size()) throw std::invalid_argument("metric: scores and labels differ in length");
  positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("metric: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw std::invalid_argument("metric: NaN score");
    positives += static_cast<std::size_t>(labels[i]);
  }
  if (positives == 0 || positives == labels.size()) throw UndefinedMetric("metric: both classes are required");
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t positives = 0;
  check_inputs(scores, labels, positives);
  const double n_pos = static_cast<double>(positives);
  const double n_neg = static_cast<double>(labels.size() - positives);
  // Twice the Mann-Whitney count, kept in integers so the single final
  // division is the correctly rounded ratio.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t twice_u = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) pos += labels[order[j++]] ? 1 : 0;
    const std::uint64_t neg = (j - i) - pos;
    twice_u += pos * (2 * negatives_below + neg);
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * n_pos * n_neg);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t positives = 0;
  check_inputs(scores, labels, positives);
  const auto order = order_descending(scores);
  const double n_pos = static_cast<double>(positives);
  double tp = 0.0;
  double seen = 0.0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double gained = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      gained += labels[order[j]];
      ++j;
    }
    const double prev_recall = tp / n_pos;
    tp += gained;
    seen += static_cast<double>(j - i);
    area += (tp / n_pos - prev_recall) * (tp / seen);
    i = j;
  }
  return area;
}

BootstrapResult bootstrap_sd(std::span<const double> scores, std::span<const int> labels, const Metric& metric,
                             int n_boot, std::uint64_t seed) {
  if (scores.size() != labels.size()) throw std::invalid_argument("bootstrap_sd: scores and labels differ in length");
  if (scores.size() < 2) throw std::invalid_argument("bootstrap_sd: need at least two observations");
  if (n_boot < 2) throw std::invalid_argument("bootstrap_sd: need at least two resamples");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, scores.size() - 1);
  std::vector<double> s(scores.size());
  std::vector<int> l(labels.size());
  std::vector<double> values;
  BootstrapResult out;
  for (int b = 0; b < n_boot; ++b) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t k = pick(rng);
      s[i] = scores[k];
      l[i] = labels[k];
      positives += static_cast<std::size_t>(labels[k]);
    }
    if (positives == 0 || positives == s.size()) {
      ++out.skipped;
      continue;
    }
    values.push_back(metric(s, l));
  }
  out.used = static_cast<int>(values.size());
  if (values.size() < 2) throw UndefinedMetric("bootstrap_sd: fewer than two usable resamples");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

HorizonScores horizon_scores(std::span<const EpisodeRecord> episodes, double horizon, const RiskFn& risk) {
  if (!(horizon > 0)) throw std::invalid_argument("horizon_scores: horizon must be > 0");
  HorizonScores hs;
  hs.horizon = horizon;
  for (std::size_t n = 0; n < episodes.size(); ++n) {
    const auto& e = episodes[n];
    const bool label = e.event && e.time <= horizon;
    if (!label && e.time < horizon) {
      ++hs.excluded;
      continue;
    }
    const double r = risk(e, horizon);
    if (!(r >= 0 && r <= 1)) throw std::domain_error("horizon_scores: risk outside [0, 1] for " + e.id);
    hs.scores.push_back(r);
    hs.labels.push_back(label ? 1 : 0);
    hs.rows.push_back(n);
  }
  return hs;
}

std::vector<MetricReport> evaluate_horizon(const HorizonScores& hs, int n_boot, std::uint64_t seed) {
  std::vector<MetricReport> out;
  const std::pair<const char*, Metric> metrics[] = {{"auroc", auroc}, {"auprc", auprc}};
  for (const auto& [name, fn] : metrics) {
    MetricReport r;
    r.metric = name;
    r.horizon = hs.horizon;
    r.value = fn(hs.scores, hs.labels);
    const auto boot = bootstrap_sd(hs.scores, hs.labels, fn, n_boot, seed);
    r.bootstrap_sd = boot.sd;
    r.skipped_resamples = boot.skipped;
    r.n = hs.scores.size();
    r.excluded = hs.excluded;
    out.push_back(r);
  }
  return out;
}

}  // namespace phantomhaz
