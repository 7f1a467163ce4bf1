#pragma once

// Quantile binarization of numeric features and the E/M HCPCS category table.

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phantomhaz {

inline const std::vector<double>& default_quantile_grid() {
  static const std::vector<double> grid{25, 50, 75, 90, 95, 99};
  return grid;
}

struct FeatureCutoffs {
  std::string name;
  std::vector<double> cutoffs;  ///< strictly increasing
};

struct QuantizerSpec {
  std::vector<double> grid = default_quantile_grid();
  /// Features with at least one cutoff; constant features are dropped.
  std::vector<FeatureCutoffs> features;
  std::vector<std::string> dropped;

  /// Output column count (sum of cutoff counts).
  std::size_t columns() const;
  /// Output column names "<feature>>=<cutoff>".
  std::vector<std::string> column_names() const;
};

/// Value at 1-based rank ceil(p/100 * n) of the sorted sample (rank clamped to [1, n]).
double nearest_rank_percentile(std::vector<double> sorted_values, double percent);

/// Deduplicated nearest-rank cutoffs, dropping any equal to the minimum.
std::vector<double> quantile_cutoffs(std::span<const double> values, std::span<const double> grid);

QuantizerSpec fit_quantizer(std::span<const std::pair<std::string, std::vector<double>>> data,
                            const std::vector<double>& grid = default_quantile_grid());

/// bit_i = 1 iff value >= cutoffs[i].
std::vector<int> binarize(std::span<const double> cutoffs, double value);

/// Binarized row for all kept features; `values` holds one entry per feature
/// name in spec order, looked up by `names`.
Eigen::VectorXd binarize_row(const QuantizerSpec& spec, std::span<const std::string> names,
                             std::span<const double> values);

struct CodeRange {
  int first;  ///< inclusive
  int last;   ///< inclusive
};

struct EmCategory {
  std::string name;
  std::vector<CodeRange> ranges;
};

inline constexpr const char* kUncategorized = "uncategorized";

/// Evaluation and management categories in their published order.
const std::vector<EmCategory>& em_category_table();

/// Name of the first category whose ranges contain the code, else "uncategorized".
std::string em_category(int hcpcs_code);

}  // namespace phantomhaz
