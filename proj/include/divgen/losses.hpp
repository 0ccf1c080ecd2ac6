// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "divgen/diffcore.hpp"

namespace divgen {

// Euclidean distances between sample rows; symmetric, zero diagonal.
struct PairwiseDistanceMatrix {
  std::size_t n = 0;
  Tensor entries;  // [n, n]
};

// Row-normalized distances: entry (i,j) = d(i,j) / sum_j d(i,j).
// All-zero rows are left as zeros and flagged instead of divided.
struct RowNormalizedMatrix {
  std::size_t n = 0;
  Tensor entries;  // [n, n]
  std::vector<std::uint8_t> degenerate_rows;
  std::size_t degenerate_count = 0;
};

struct NdivConfig {
  double alpha = 0.8;        // diversity margin multiplier
  std::size_t n_samples = 10;  // N latent/action samples per batch
  void validate() const;
};

// samples is [N, d] with N >= 2.
PairwiseDistanceMatrix pairwise_distances(const Tensor& samples);

// When stop_gradient_normalizer is set, the per-row sum is detached so the
// backward pass treats it as a constant and only the numerator distances
// receive gradient.
RowNormalizedMatrix normalize_rows(const PairwiseDistanceMatrix& d,
                                   bool stop_gradient_normalizer);

// mean over off-diagonal pairs of max(0, alpha * Dz(i,j) - Da(i,j)).
// Terms from degenerate rows of either matrix are skipped; the divisor stays
// N^2 - N.
Tensor ndiv_loss(const RowNormalizedMatrix& dz, const RowNormalizedMatrix& da,
                 const NdivConfig& cfg);

// mean(max(0, 1 - real)) + mean(max(0, 1 + fake)); raw scores, no sigmoid.
Tensor hinge_discriminator_loss(const Tensor& real_scores,
                                const Tensor& fake_scores);

// -mean(fake).
Tensor hinge_generator_loss(const Tensor& fake_scores);

// Euclidean norm of (target - predicted); mean over rows for a batch.
Tensor reconstruction_loss(const Tensor& predicted, const Tensor& target);

// Squared-error reconstruction plus beta * KL(N(mu, diag(exp(logvar))) || N(0, I)).
Tensor vae_elbo_loss(const Tensor& recon, const Tensor& target,
                     const Tensor& mu, const Tensor& logvar, double beta);

}  // namespace divgen
