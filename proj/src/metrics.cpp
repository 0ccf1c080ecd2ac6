// SPDX-License-Identifier: Apache-2.0
#include "divgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

#include <Eigen/Dense>

#include "json.hpp"

namespace divgen {

using nlohmann::json;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLn2 = 0.6931471805599453;
constexpr double kPsdTolerance = 1e-10;
}  // namespace

GaussianFit fit_gaussian(const Tensor& samples) {
  if (samples.rank() != 2) {
    throw DimensionError("fit_gaussian expects [N, d] samples");
  }
  const std::size_t n = samples.rows(), d = samples.cols();
  if (n < d + 1) {
    throw DimensionError("fit_gaussian: need at least d + 1 = " +
                         std::to_string(d + 1) + " samples, got " +
                         std::to_string(n));
  }
  GaussianFit fit;
  fit.dim = d;
  fit.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) fit.mean[j] += samples.at(i, j);
  for (double& m : fit.mean) m /= static_cast<double>(n);

  fit.cov.assign(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double xj = samples.at(i, j) - fit.mean[j];
      for (std::size_t k = j; k < d; ++k) {
        fit.cov[j * d + k] += xj * (samples.at(i, k) - fit.mean[k]);
      }
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j; k < d; ++k) {
      fit.cov[j * d + k] /= denom;
      fit.cov[k * d + j] = fit.cov[j * d + k];
    }
  }
  return fit;
}

namespace {

Eigen::MatrixXd to_eigen(const std::vector<double>& cov, std::size_t d) {
  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = cov[i * d + j];
  return m;
}

// Eigenvalue floor: reject if an eigenvalue sits below -tolerance, clamp the
// small negatives that come from rounding.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, m.trace());
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -kPsdTolerance * scale) {
      throw NumericError("covariance is not PSD: eigenvalue " +
                         std::to_string(ev(i)));
    }
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.dim != b.dim || a.dim == 0) {
    throw DimensionError("frechet_distance: fits have dimensions " +
                         std::to_string(a.dim) + " and " + std::to_string(b.dim));
  }
  const std::size_t d = a.dim;
  double delta = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double dm = a.mean[i] - b.mean[i];
    delta += dm * dm;
  }
  double trace_a = 0.0, trace_b = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    trace_a += a.cov[i * d + i];
    trace_b += b.cov[i * d + i];
  }

  double trace_sqrt_prod = 0.0;
  if (d == 2) {
    // 2x2 closed form: tr((Sa Sb)^{1/2}) = sqrt(tr(M) + 2 sqrt(det M)).
    const double m00 = a.cov[0] * b.cov[0] + a.cov[1] * b.cov[2];
    const double m11 = a.cov[2] * b.cov[1] + a.cov[3] * b.cov[3];
    const double det_a = a.cov[0] * a.cov[3] - a.cov[1] * a.cov[2];
    const double det_b = b.cov[0] * b.cov[3] - b.cov[1] * b.cov[2];
    const double tol = kPsdTolerance * std::max(1.0, trace_a * trace_b);
    double det_m = det_a * det_b;
    if (det_m < -tol) {
      throw NumericError("frechet_distance: negative product determinant");
    }
    det_m = std::max(0.0, det_m);
    const double inner = std::max(0.0, m00 + m11 + 2.0 * std::sqrt(det_m));
    trace_sqrt_prod = std::sqrt(inner);
  } else {
    const Eigen::MatrixXd sa = to_eigen(a.cov, d);
    const Eigen::MatrixXd sb = to_eigen(b.cov, d);
    const Eigen::MatrixXd root_a = psd_sqrt(sa);
    trace_sqrt_prod = psd_sqrt(root_a * sb * root_a).trace();
  }

  return std::max(0.0, delta + trace_a + trace_b - 2.0 * trace_sqrt_prod);
}

namespace {

Range2D auto_range(const Tensor& p, const Tensor& q) {
  Range2D r;
  r.x_min = r.y_min = std::numeric_limits<double>::infinity();
  r.x_max = r.y_max = -std::numeric_limits<double>::infinity();
  for (const Tensor* t : {&p, &q}) {
    for (std::size_t i = 0; i < t->rows(); ++i) {
      r.x_min = std::min(r.x_min, t->at(i, 0));
      r.x_max = std::max(r.x_max, t->at(i, 0));
      r.y_min = std::min(r.y_min, t->at(i, 1));
      r.y_max = std::max(r.y_max, t->at(i, 1));
    }
  }
  // Expand 5%; degenerate widths get a fixed pad so binning stays defined.
  const double wx = r.x_max - r.x_min, wy = r.y_max - r.y_min;
  const double px = wx > 0.0 ? 0.05 * wx : 0.5;
  const double py = wy > 0.0 ? 0.05 * wy : 0.5;
  r.x_min -= px;
  r.x_max += px;
  r.y_min -= py;
  r.y_max += py;
  return r;
}

}  // namespace

Histogram2D histogram2d(const Tensor& samples, const Range2D& range,
                        std::size_t bins) {
  if (samples.rank() != 2 || samples.cols() != 2) {
    throw DimensionError("histogram2d expects [N, 2] samples");
  }
  if (bins < 1) throw ContractError("histogram2d: bins must be >= 1");
  Histogram2D h;
  h.range = range;
  h.bins = bins;
  h.mass.assign(bins * bins, 0.0);
  const double wx = range.x_max - range.x_min;
  const double wy = range.y_max - range.y_min;
  std::size_t in_range = 0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const double x = samples.at(i, 0), y = samples.at(i, 1);
    if (x < range.x_min || x > range.x_max || y < range.y_min || y > range.y_max)
      continue;
    auto clamp_bin = [bins](double f) {
      auto b = static_cast<std::size_t>(f);
      return b >= bins ? bins - 1 : b;
    };
    const std::size_t bx = clamp_bin((x - range.x_min) / wx * static_cast<double>(bins));
    const std::size_t by = clamp_bin((y - range.y_min) / wy * static_cast<double>(bins));
    h.mass[bx * bins + by] += 1.0;
    ++in_range;
  }
  if (in_range > 0) {
    for (double& m : h.mass) m /= static_cast<double>(in_range);
  }
  return h;
}

double js_divergence(const Tensor& p_samples, const Tensor& q_samples,
                     std::size_t bins, const std::optional<Range2D>& range) {
  if (p_samples.rows() < 1 || q_samples.rows() < 1) {
    throw DimensionError("js_divergence: sample sets must be nonempty");
  }
  const Range2D r = range ? *range : auto_range(p_samples, q_samples);
  Histogram2D hp = histogram2d(p_samples, r, bins);
  Histogram2D hq = histogram2d(q_samples, r, bins);

  // Add-epsilon smoothing, then renormalize.
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < hp.mass.size(); ++i) {
    hp.mass[i] += kJsSmoothingEps;
    hq.mass[i] += kJsSmoothingEps;
    sp += hp.mass[i];
    sq += hq.mass[i];
  }
  double js = 0.0;
  for (std::size_t i = 0; i < hp.mass.size(); ++i) {
    const double p = hp.mass[i] / sp;
    const double q = hq.mass[i] / sq;
    const double m = 0.5 * (p + q);
    js += 0.5 * p * std::log(p / m) + 0.5 * q * std::log(q / m);
  }
  return std::clamp(js, 0.0, kLn2);
}

Coverage star_coverage(const Tensor& samples, const StarSpec& spec) {
  if (samples.rank() != 2 || samples.cols() != 2 || samples.rows() < 1) {
    throw DimensionError("star_coverage expects nonempty [N, 2] samples");
  }
  Coverage c;
  c.per_arm_mass.assign(spec.arms, 0.0);
  const std::size_t n = samples.rows();
  const double sector = 2.0 * kPi / static_cast<double>(spec.arms);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p{samples.at(i, 0), samples.at(i, 1)};
    if (!inside_star(spec, p)) continue;
    ++inside;
    const double dx = p[0] - spec.center[0], dy = p[1] - spec.center[1];
    double angle = std::atan2(dy, dx) - spec.rotation + 0.5 * sector;
    angle = std::fmod(angle, 2.0 * kPi);
    if (angle < 0.0) angle += 2.0 * kPi;
    auto arm = static_cast<std::size_t>(angle / sector);
    if (arm >= spec.arms) arm = spec.arms - 1;
    c.per_arm_mass[arm] += 1.0;
  }
  c.inside_fraction = static_cast<double>(inside) / static_cast<double>(n);
  for (double& m : c.per_arm_mass) m /= static_cast<double>(n);
  return c;
}

// ---- Report ----

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(xs.size() - 1))};
}

}  // namespace

void MetricsReport::aggregate() {
  std::vector<double> fds, jsds, insides, min_arms;
  for (const auto& e : per_seed) {
    fds.push_back(e.frechet_distance);
    jsds.push_back(e.js_divergence);
    insides.push_back(e.inside_fraction);
    if (!e.per_arm_mass.empty()) {
      min_arms.push_back(
          *std::min_element(e.per_arm_mass.begin(), e.per_arm_mass.end()));
    }
  }
  std::tie(fd_mean, fd_std) = mean_std(fds);
  std::tie(jsd_mean, jsd_std) = mean_std(jsds);
  std::tie(inside_mean, inside_std) = mean_std(insides);
  min_arm_mass_mean = mean_std(min_arms).first;
}

std::string MetricsReport::to_json_string() const {
  json j;
  j["label"] = label;
  j["bins"] = bins;
  j["smoothing_eps"] = smoothing_eps;
  json seeds = json::array();
  for (const auto& e : per_seed) {
    seeds.push_back({{"frechet_distance", e.frechet_distance},
                     {"js_divergence", e.js_divergence},
                     {"inside_fraction", e.inside_fraction},
                     {"per_arm_mass", e.per_arm_mass}});
  }
  j["per_seed"] = seeds;
  j["fd_mean"] = fd_mean;
  j["fd_std"] = fd_std;
  j["jsd_mean"] = jsd_mean;
  j["jsd_std"] = jsd_std;
  j["inside_mean"] = inside_mean;
  j["inside_std"] = inside_std;
  j["min_arm_mass_mean"] = min_arm_mass_mean;
  return j.dump(2);
}

MetricsReport MetricsReport::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("metrics report: ") + e.what());
  }
  MetricsReport r;
  r.label = j.value("label", "");
  r.bins = j.value("bins", kJsBinsDefault);
  r.smoothing_eps = j.value("smoothing_eps", kJsSmoothingEps);
  for (const auto& e : j.value("per_seed", json::array())) {
    EvalResult res;
    res.frechet_distance = e.value("frechet_distance", 0.0);
    res.js_divergence = e.value("js_divergence", 0.0);
    res.inside_fraction = e.value("inside_fraction", 0.0);
    res.per_arm_mass = e.value("per_arm_mass", std::vector<double>{});
    r.per_seed.push_back(std::move(res));
  }
  r.aggregate();
  return r;
}

std::string MetricsReport::csv_header() {
  return "label,seeds,fd_mean,fd_std,jsd_mean,jsd_std,inside_mean,inside_std,"
         "min_arm_mass_mean";
}

std::string MetricsReport::csv_row() const {
  std::string row = label;
  row += ',' + std::to_string(per_seed.size());
  for (double v : {fd_mean, fd_std, jsd_mean, jsd_std, inside_mean, inside_std,
                   min_arm_mass_mean}) {
    row += ',' + format_double(v);
  }
  return row;
}

}  // namespace divgen
