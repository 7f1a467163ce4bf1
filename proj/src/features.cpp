#include "phantomhaz/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace phantomhaz {

std::size_t QuantizerSpec::columns() const {
  std::size_t n = 0;
  for (const auto& f : features) n += f.cutoffs.size();
  return n;
}

std::vector<std::string> QuantizerSpec::column_names() const {
  std::vector<std::string> names;
  for (const auto& f : features) {
    for (double c : f.cutoffs) {
      std::ostringstream out;
      out << f.name << ">=" << c;
      names.push_back(out.str());
    }
  }
  return names;
}

double nearest_rank_percentile(std::vector<double> sorted_values, double percent) {
  if (sorted_values.empty()) throw std::invalid_argument("nearest_rank_percentile: empty sample");
  if (!(percent >= 0 && percent <= 100)) throw std::invalid_argument("nearest_rank_percentile: percent outside [0, 100]");
  const auto n = static_cast<long long>(sorted_values.size());
  // Round before the ceiling so that e.g. 0.29 * 100 does not land on 29.000000000000004.
  const double raw = percent / 100.0 * static_cast<double>(n);
  long long rank = static_cast<long long>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  rank = std::clamp(rank, 1LL, n);
  return sorted_values[static_cast<std::size_t>(rank - 1)];
}

std::vector<double> quantile_cutoffs(std::span<const double> values, std::span<const double> grid) {
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantile_cutoffs: non-finite value");
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cutoffs;
  for (double p : grid) cutoffs.push_back(nearest_rank_percentile(sorted, p));
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
  std::erase_if(cutoffs, [&](double c) { return c <= sorted.front(); });
  return cutoffs;
}

QuantizerSpec fit_quantizer(std::span<const std::pair<std::string, std::vector<double>>> data,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("fit_quantizer: empty quantile grid");
  QuantizerSpec spec;
  spec.grid = grid;
  for (const auto& [name, values] : data) {
    if (values.empty()) throw std::invalid_argument("fit_quantizer: feature '" + name + "' has no values");
    auto cutoffs = quantile_cutoffs(values, grid);
    if (cutoffs.empty()) {
      spec.dropped.push_back(name);
    } else {
      spec.features.push_back({name, std::move(cutoffs)});
    }
  }
  return spec;
}

std::vector<int> binarize(std::span<const double> cutoffs, double value) {
  std::vector<int> bits(cutoffs.size());
  for (std::size_t i = 0; i < cutoffs.size(); ++i) bits[i] = value >= cutoffs[i] ? 1 : 0;
  return bits;
}

Eigen::VectorXd binarize_row(const QuantizerSpec& spec, std::span<const std::string> names,
                             std::span<const double> values) {
  if (names.size() != values.size()) throw std::invalid_argument("binarize_row: names and values differ in length");
  std::map<std::string, double> by_name;
  for (std::size_t i = 0; i < names.size(); ++i) by_name[names[i]] = values[i];
  Eigen::VectorXd out(static_cast<Eigen::Index>(spec.columns()));
  Eigen::Index col = 0;
  for (const auto& f : spec.features) {
    const auto it = by_name.find(f.name);
    if (it == by_name.end()) throw std::invalid_argument("binarize_row: missing feature '" + f.name + "'");
    for (int bit : binarize(f.cutoffs, it->second)) out[col++] = bit;
  }
  return out;
}

const std::vector<EmCategory>& em_category_table() {
  // Upper bounds are inclusive (the published ranges are half-open).
  static const std::vector<EmCategory> table{
      {"office_or_outpatient", {{99202, 99215}}},
      {"hospital_observation", {{99217, 99226}}},
      {"hospital_inpatient", {{99221, 99239}}},
      {"consultation", {{99241, 99255}}},
      {"nursing_facility", {{99304, 99318}}},
      {"domicilliary", {{99324, 99337}, {99339, 99340}}},
      {"home", {{99341, 99350}}},
      {"prolonged", {{99354, 99416}}},
      {"case_management", {{99366, 99368}}},
      {"care_plan", {{99374, 99380}}},
      {"preventative_medicine", {{99381, 99429}}},
      {"care_management", {{99439, 99491}}},
      {"special_eval", {{99450, 99458}}},
      {"newborn_care", {{99460, 99463}}},
      {"cognitive", {{99483, 99486}}},
      {"behavioral", {{99484, 99484}}},
      {"psych", {{99492, 99494}}},
      {"transitional", {{99495, 99496}}},
      {"other", {{99497, 99499}}},
  };
  return table;
}

std::string em_category(int hcpcs_code) {
  for (const auto& cat : em_category_table()) {
    for (const auto& r : cat.ranges) {
      if (hcpcs_code >= r.first && hcpcs_code <= r.last) return cat.name;
    }
  }
  return kUncategorized;
}

}  // namespace phantomhaz
