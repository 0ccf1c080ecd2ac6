// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "divgen/data.hpp"
#include "divgen/diffcore.hpp"

namespace divgen {

struct GaussianFit {
  std::size_t dim = 0;
  std::vector<double> mean;  // d
  std::vector<double> cov;   // d x d row-major, symmetric
};

// Sample mean and unbiased sample covariance of [N, d] samples, N >= d + 1.
GaussianFit fit_gaussian(const Tensor& samples);

// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}), clamped at 0.
// Closed form via trace/determinant for d = 2, eigendecomposition otherwise.
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

struct Range2D {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
};

inline constexpr std::size_t kJsBinsDefault = 64;
inline constexpr double kJsSmoothingEps = 1e-10;

struct Histogram2D {
  Range2D range;
  std::size_t bins = kJsBinsDefault;
  std::vector<double> mass;  // bins x bins, sums to 1 when any sample in range
};

Histogram2D histogram2d(const Tensor& samples, const Range2D& range,
                        std::size_t bins);

// Jensen-Shannon divergence between 2D sample sets over a shared histogram:
// common bounding box expanded 5% (unless an explicit range is given),
// add-epsilon smoothing, natural log. Result in [0, ln 2].
double js_divergence(const Tensor& p_samples, const Tensor& q_samples,
                     std::size_t bins = kJsBinsDefault,
                     const std::optional<Range2D>& range = std::nullopt);

struct Coverage {
  double inside_fraction = 0.0;
  // Share of all samples per angular sector of width 2*pi/arms centered on
  // each lobe; sums to inside_fraction.
  std::vector<double> per_arm_mass;
};

Coverage star_coverage(const Tensor& samples, const StarSpec& spec);

struct EvalResult {
  double frechet_distance = 0.0;
  double js_divergence = 0.0;
  double inside_fraction = 0.0;
  std::vector<double> per_arm_mass;
};

// Aggregated evaluation across seeds. CSV column order:
//   label,seeds,fd_mean,fd_std,jsd_mean,jsd_std,inside_mean,inside_std,min_arm_mass_mean
struct MetricsReport {
  std::string label;
  std::vector<EvalResult> per_seed;
  std::size_t bins = kJsBinsDefault;
  double smoothing_eps = kJsSmoothingEps;

  double fd_mean = 0.0, fd_std = 0.0;
  double jsd_mean = 0.0, jsd_std = 0.0;
  double inside_mean = 0.0, inside_std = 0.0;
  double min_arm_mass_mean = 0.0;

  void aggregate();  // fill the mean/std fields from per_seed

  std::string to_json_string() const;
  static MetricsReport from_json_string(const std::string& text);
  static std::string csv_header();
  std::string csv_row() const;
};

}  // namespace divgen
