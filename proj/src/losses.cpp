// SPDX-License-Identifier: Apache-2.0
#include "divgen/losses.hpp"

namespace divgen {

void NdivConfig::validate() const {
  if (alpha <= 0.0) throw ContractError("NdivConfig: alpha must be > 0");
  if (n_samples < 2) throw ContractError("NdivConfig: n_samples must be >= 2");
}

PairwiseDistanceMatrix pairwise_distances(const Tensor& samples) {
  if (samples.rank() != 2 || samples.rows() < 2) {
    throw DimensionError("pairwise_distances needs [N, d] samples with N >= 2, got " +
                         shape_str(samples.shape()));
  }
  PairwiseDistanceMatrix out;
  out.n = samples.rows();
  out.entries = pairwise_euclidean(samples);
  return out;
}

RowNormalizedMatrix normalize_rows(const PairwiseDistanceMatrix& d,
                                   bool stop_gradient_normalizer) {
  const std::size_t n = d.n;
  RowNormalizedMatrix out;
  out.n = n;
  out.degenerate_rows.assign(n, 0);

  Tensor row_sums = sum(d.entries, 1);  // [n, 1]
  for (std::size_t i = 0; i < n; ++i) {
    if (row_sums.at(i) <= 0.0) {
      out.degenerate_rows[i] = 1;
      ++out.degenerate_count;
    }
  }

  if (stop_gradient_normalizer) {
    // Normalizer is a constant for the backward pass; degenerate rows divide
    // by 1 so they stay all-zero.
    Tensor safe = detach(row_sums);
    for (std::size_t i = 0; i < n; ++i) {
      if (out.degenerate_rows[i]) safe.values()[i] = 1.0;
    }
    Tensor expanded = matmul(safe, Tensor::full({1, n}, 1.0));
    out.entries = div(d.entries, expanded);
    return out;
  }

  // Gradient flows through the normalizer. Degenerate rows get +1 in the
  // denominator, keeping them all-zero without dividing by zero.
  Tensor bump = Tensor::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    if (out.degenerate_rows[i]) bump.values()[i] = 1.0;
  }
  Tensor expanded = matmul(add(row_sums, bump), Tensor::full({1, n}, 1.0));
  out.entries = div(d.entries, expanded);
  return out;
}

Tensor ndiv_loss(const RowNormalizedMatrix& dz, const RowNormalizedMatrix& da,
                 const NdivConfig& cfg) {
  cfg.validate();
  const std::size_t n = dz.n;
  if (n != da.n) {
    throw DimensionError("ndiv_loss: matrices have different sample counts " +
                         std::to_string(n) + " vs " + std::to_string(da.n));
  }
  if (n < 2) throw DimensionError("ndiv_loss needs n >= 2");

  // Zero out the diagonal and every pair whose row is degenerate in either
  // matrix; the averaging divisor stays n^2 - n.
  auto row_bad = [](const RowNormalizedMatrix& m, std::size_t i) {
    return i < m.degenerate_rows.size() && m.degenerate_rows[i] != 0;
  };
  Tensor mask = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    if (row_bad(dz, i) || row_bad(da, i)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) mask.values()[i * n + j] = 1.0;
    }
  }

  Tensor hinge = max0(sub(mul(Tensor::scalar(cfg.alpha), dz.entries), da.entries));
  Tensor total = sum(mul(hinge, mask));
  return mul(total, Tensor::scalar(1.0 / static_cast<double>(n * n - n)));
}

Tensor hinge_discriminator_loss(const Tensor& real_scores,
                                const Tensor& fake_scores) {
  if (real_scores.size() == 0 || fake_scores.size() == 0) {
    throw ContractError("hinge_discriminator_loss: empty scores");
  }
  Tensor real_term = mean(max0(sub(Tensor::scalar(1.0), real_scores)));
  Tensor fake_term = mean(max0(add(Tensor::scalar(1.0), fake_scores)));
  return add(real_term, fake_term);
}

Tensor hinge_generator_loss(const Tensor& fake_scores) {
  if (fake_scores.size() == 0) {
    throw ContractError("hinge_generator_loss: empty scores");
  }
  return neg(mean(fake_scores));
}

Tensor reconstruction_loss(const Tensor& predicted, const Tensor& target) {
  if (predicted.shape() != target.shape()) {
    throw DimensionError("reconstruction_loss: shapes " +
                         shape_str(predicted.shape()) + " vs " +
                         shape_str(target.shape()));
  }
  Tensor diff = sub(target, predicted);
  if (diff.rank() == 2 && diff.rows() > 1) {
    return mean(euclidean_norm(diff, 1));
  }
  return euclidean_norm(diff);
}

Tensor vae_elbo_loss(const Tensor& recon, const Tensor& target,
                     const Tensor& mu, const Tensor& logvar, double beta) {
  if (recon.shape() != target.shape()) {
    throw DimensionError("vae_elbo_loss: recon/target shapes differ");
  }
  if (mu.shape() != logvar.shape()) {
    throw DimensionError("vae_elbo_loss: mu/logvar shapes differ");
  }

  Tensor sq = square(sub(target, recon));
  Tensor recon_term = (sq.rank() == 2 && sq.rows() > 1)
                          ? mean(sum(sq, 1))
                          : sum(sq);

  // KL(N(mu, diag(exp(logvar))) || N(0, I))
  //   = 1/2 * sum(exp(logvar) + mu^2 - 1 - logvar)
  Tensor kl_terms = sub(sub(add(exp(logvar), square(mu)), Tensor::scalar(1.0)),
                        logvar);
  Tensor kl = (kl_terms.rank() == 2 && kl_terms.rows() > 1)
                  ? mean(sum(kl_terms, 1))
                  : sum(kl_terms);
  kl = mul(kl, Tensor::scalar(0.5));

  return add(recon_term, mul(Tensor::scalar(beta), kl));
}

}  // namespace divgen
