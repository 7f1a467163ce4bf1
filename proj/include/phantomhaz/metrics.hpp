#pragma once

// Horizon classification metrics with bootstrap standard deviations.

#include "phantomhaz/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phantomhaz {

/// Raised when a metric needs both classes and gets one.
class UndefinedMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Area under the ROC curve from the rank statistic; tied scores count 1/2.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Area under the precision-recall curve by step integration: the sum over
/// distinct score thresholds (high to low) of precision times recall gained.
double auprc(std::span<const double> scores, std::span<const int> labels);

using Metric = std::function<double(std::span<const double>, std::span<const int>)>;

struct BootstrapResult {
  double sd = 0.0;
  int used = 0;     ///< resamples that contained both classes
  int skipped = 0;  ///< single-class resamples
};

BootstrapResult bootstrap_sd(std::span<const double> scores, std::span<const int> labels, const Metric& metric,
                             int n_boot = 200, std::uint64_t seed = 0);

struct HorizonScores {
  double horizon = 30.0;
  std::vector<double> scores;  ///< 1 - S(horizon)
  std::vector<int> labels;     ///< event within the horizon
  std::vector<std::size_t> rows;
  std::size_t excluded = 0;    ///< censored before the horizon
};

/// Risk function giving 1 - S_n(horizon) for one episode.
using RiskFn = std::function<double(const EpisodeRecord&, double horizon)>;

HorizonScores horizon_scores(std::span<const EpisodeRecord> episodes, double horizon, const RiskFn& risk);

struct MetricReport {
  std::string metric;
  double horizon = 0.0;
  double value = 0.0;
  double bootstrap_sd = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;
  int skipped_resamples = 0;
};

/// AUROC and AUPRC at one horizon with bootstrap SDs.
std::vector<MetricReport> evaluate_horizon(const HorizonScores& hs, int n_boot = 200, std::uint64_t seed = 0);

}  // namespace phantomhaz
