// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "divgen/data.hpp"
#include "divgen/losses.hpp"
#include "divgen/metrics.hpp"
#include "divgen/nets.hpp"

namespace divgen {

struct TrainConfig {
  std::uint64_t seed = 0;
  std::int64_t steps = 20000;
  std::size_t batch_states = 16;  // degenerates to 1 when all states coincide
  std::size_t n_div_samples = 10;  // N generator samples per diversity batch
  double alpha = 0.8;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
  double lr_f = 1e-3;
  double w_adv = 1.0;
  double w_ndiv = 1.0;
  double w_ae = 1.0;
  int d_steps_per_g = 1;
  std::size_t real_batch = 10;  // real-action minibatch per discriminator step

  // Re-evaluates the discriminator objective after each D step and counts
  // increases beyond 1e-6 (diagnostic; costs one extra forward pair).
  bool check_d_descent = false;

  void validate() const;
  std::string to_json_string() const;
  static TrainConfig from_json_string(const std::string& text);
};

struct TrainReport {
  std::vector<std::string> trace_columns;
  std::vector<std::vector<double>> trace;  // one row per step
  std::int64_t collapse_warnings = 0;      // degenerate action-distance rows
  std::int64_t d_descent_violations = 0;   // only counted when enabled
  double holdout_error = -1.0;             // forward model only
  double wall_clock_sec = 0.0;
  std::string checkpoint_path;

  // Degenerate-row warnings within the trailing `window` steps.
  std::int64_t collapse_warnings_in_last(std::size_t window) const;

  std::string to_json_string() const;
  void save_trace_csv(const std::string& path) const;
};

// Adversarial training with the normalized diversity term and the state
// auto-encoder (alternating D/G updates, uniform latents).
std::pair<ModelBundle, TrainReport> train_ours(const Dataset& train,
                                               const TrainConfig& cfg);

// Same loop with w_ndiv = 0 and no auto-encoder term.
std::pair<ModelBundle, TrainReport> train_gan_baseline(const Dataset& train,
                                                       const TrainConfig& cfg);

std::pair<VaeModel, TrainReport> train_vae_baseline(const Dataset& train,
                                                    const TrainConfig& cfg);

// Regresses predicted next states to ground truth. When a holdout set is
// given, its mean Euclidean error is reported after training.
std::pair<ModelBundle, TrainReport> train_forward_model(
    const Dataset& train, const TrainConfig& cfg,
    const Dataset* holdout = nullptr);

// n i.i.d. latent draws U(0,1)^latent_dim mapped through the action decoder,
// conditioned on state s_t ([1, state_dim]).
Tensor sample_actions(const ModelBundle& m, const Tensor& s_t, std::size_t n,
                      std::uint64_t seed);

// VAE sampling path: decode z ~ N(0, I).
Tensor sample_actions(const VaeModel& m, std::size_t n, std::uint64_t seed);

using ActionSampler = std::function<Tensor(std::size_t n, std::uint64_t seed)>;

// FD/JSD between sampled actions and fresh ground-truth star draws plus
// coverage, aggregated mean +- std over `seeds` sampling repetitions.
MetricsReport evaluate_sampler(const ActionSampler& sampler,
                               const StarSpec& spec, std::size_t n,
                               std::size_t seeds);

MetricsReport evaluate(const ModelBundle& m, const Dataset& test,
                       const StarSpec& spec, std::size_t n = 10000,
                       std::size_t seeds = 5);
MetricsReport evaluate(const VaeModel& m, const Dataset& test,
                       const StarSpec& spec, std::size_t n = 10000,
                       std::size_t seeds = 5);

}  // namespace divgen
