#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossadapt/data.hpp"

namespace crossadapt::shift {

enum class Metric { JS, KL, Wasserstein1D };

const char* to_string(Metric m);
Metric parse_metric(const std::string& name);

inline constexpr double kKlSmoothing = 1e-10;

struct WindowDistribution {
  std::size_t feature = 0;
  data::FieldKind kind = data::FieldKind::Numerical;
  std::vector<double> edges;             // numerical: bins + 1, strictly increasing
  std::vector<std::uint32_t> categories; // categorical: support tokens
  std::vector<double> probs;
};

/// [begin, end) row ranges of n contiguous windows whose sizes differ by at
/// most one; the trailing windows take the remainder.
std::vector<std::pair<std::size_t, std::size_t>> partition_windows(std::size_t rows, std::size_t n);

/// Equal-width histogram on [lo, hi]; values at or past hi fall in the last bin.
WindowDistribution numerical_histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

/// Normalised counts over `support` (tokens outside it are ignored).
WindowDistribution categorical_distribution(std::span<const std::uint32_t> tokens,
                                            std::span<const std::uint32_t> support);

/// Distributions of feature `feature` (schema order) in two windows on a
/// shared support: pooled min/max edges, or the union of categories.
std::pair<WindowDistribution, WindowDistribution> estimate_pair(const data::Dataset& a, const data::Dataset& b,
                                                                const data::FieldSchema& schema,
                                                                std::size_t feature, std::size_t bins);

/// Natural-log divergences; Wasserstein1D integrates |CDF_P - CDF_Q| with the
/// bin width. KL smooths every bin by kKlSmoothing and renormalises.
double divergence(std::span<const double> p, std::span<const double> q, Metric metric, double bin_width = 1.0);
double divergence(const WindowDistribution& p, const WindowDistribution& q, Metric metric);

struct ShiftSettings {
  std::size_t windows = 10;
  std::size_t bins = 50;
  Metric metric = Metric::JS;
  double theta_low = 0.01;
  double theta_high = 0.05;
  double k = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct ShiftReport {
  ShiftSettings settings;
  std::size_t n_features = 0;
  /// table[i][j]: divergence of feature j between windows i and i + 1.
  std::vector<std::vector<double>> table;
  std::vector<double> pair_means;
  double delta_shift = 0.0;
  double r_enh = 0.0;

  nlohmann::json to_json() const;
};

/// Piecewise gate: k when delta <= theta_low, k (1 - delta / theta_high) up
/// to theta_high, zero beyond.
double enhancement_ratio(double delta, double theta_low, double theta_high, double k);

ShiftReport compute_shift(const data::Dataset& d, const data::FieldSchema& schema, const ShiftSettings& settings);

}  // namespace crossadapt::shift
