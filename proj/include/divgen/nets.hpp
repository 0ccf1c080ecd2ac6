// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divgen/diffcore.hpp"
#include "divgen/rng.hpp"

namespace divgen {

enum class Activation { kRelu, kTanh };
enum class OutputActivation { kIdentity, kTanh, kSigmoid };

struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation hidden_activation = Activation::kRelu;
  OutputActivation output_activation = OutputActivation::kIdentity;

  void validate() const;  // at least 2 widths, all >= 1
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
};

// Hands out stable parameter ids within one model.
class ParamIdGen {
 public:
  int next() { return next_++; }
  int peek() const { return next_; }

 private:
  int next_ = 0;
};

// Weight/bias handles for one forward pass; tracked when obtained through
// watch(), plain values otherwise.
struct MlpHandles {
  std::vector<Tensor> w;  // [in, out] per layer
  std::vector<Tensor> b;  // [1, out] per layer
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, std::string name, Rng& init_rng, ParamIdGen& ids);

  const MlpSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }
  std::size_t layer_count() const { return spec_.layer_widths.size() - 1; }

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  void collect_params(std::vector<Parameter*>& out);

  MlpHandles watch(Graph& g) const;  // register params as differentiable leaves
  MlpHandles handles() const;        // plain copies for eager evaluation

  // x is [batch, input_width]. Biases broadcast over the batch.
  Tensor forward(const MlpHandles& h, const Tensor& x) const;
  Tensor forward(const Tensor& x) const { return forward(handles(), x); }

  const Tensor& weight(std::size_t layer) const { return params_[2 * layer].value; }
  Tensor& weight(std::size_t layer) { return params_[2 * layer].value; }
  const Tensor& bias(std::size_t layer) const { return params_[2 * layer + 1].value; }

 private:
  MlpSpec spec_;
  std::string name_;
  std::vector<Parameter> params_;  // w0, b0, w1, b1, ...
};

// ---- Spectral normalization ----

struct SpectralNormState {
  std::vector<double> u;  // persistent unit vector, length = weight cols
  int power_iterations = 1;
};

// Runs power iteration (updating s.u in place) and returns the largest
// singular value estimate, clamped below at 1e-12. The estimate is a plain
// number: gradient never flows through it.
double spectral_sigma(const Tensor& weight, SpectralNormState& s);

// weight / sigma as a plain value tensor.
Tensor spectral_normalize(const Tensor& weight, SpectralNormState& s);

// MLP whose weight matrices are divided by their largest singular value
// before every forward.
struct Discriminator {
  Mlp net;
  std::vector<SpectralNormState> sn;  // one per layer

  // Normalized weight handles. Power-iterates each layer once per call.
  MlpHandles watch_normalized(Graph& g);
  MlpHandles normalized_handles();

  Tensor forward(const MlpHandles& h, const Tensor& x) const {
    return net.forward(h, x);
  }
};

// ---- Model bundle ----

struct BundleSpec {
  std::size_t state_dim = 2;
  std::size_t action_dim = 2;
  std::size_t latent_dim = 2;
  std::size_t embed_dim = 8;
  MlpSpec state_encoder;
  MlpSpec state_decoder;
  MlpSpec action_decoder;
  MlpSpec discriminator;
  MlpSpec forward_model;

  static BundleSpec defaults();
  void validate() const;
};

// State auto-encoder, action decoder (generator), spectral-norm
// discriminator, and forward kinematics model.
struct ModelBundle {
  BundleSpec spec;
  Mlp state_encoder;
  Mlp state_decoder;
  Mlp action_decoder;
  Mlp forward_model;
  Discriminator discriminator;

  static ModelBundle create(const BundleSpec& spec, std::uint64_t seed);

  // Eager single-graph-free evaluation paths.
  Tensor encode_state(const Tensor& s) const;
  Tensor decode_state(const Tensor& e) const;
  // z must lie in [0,1]^latent_dim (rows of a [n, latent_dim] batch).
  Tensor generate_action(const Tensor& e, const Tensor& z) const;
  Tensor discriminate(const Tensor& a, const Tensor& e);
  Tensor predict_next_state(const Tensor& s, const Tensor& a) const;

  std::vector<Parameter*> generator_params();  // encoder + decoder + action decoder
  std::vector<Parameter*> discriminator_params();
  std::vector<Parameter*> forward_params();
  std::vector<Parameter*> all_params();
};

// ---- VAE baseline ----

struct VaeModel {
  std::size_t action_dim = 2;
  std::size_t latent_dim = 2;
  Mlp enc_mu;
  Mlp enc_logvar;
  Mlp decoder;

  static VaeModel create(std::size_t action_dim, std::size_t latent_dim,
                         std::uint64_t seed);
  Tensor decode(const Tensor& z) const { return decoder.forward(z); }
  std::vector<Parameter*> params();
};

// ---- Checkpoints ----
// JSON map from parameter name to shape + row-major values, with a
// format-version field and the persistent spectral-norm vectors.

void save_checkpoint(const ModelBundle& m, const std::string& trained_as,
                     const std::string& path);
void save_checkpoint(const VaeModel& m, const std::string& path);
std::string checkpoint_kind(const std::string& path);  // "bundle" or "vae"
ModelBundle load_bundle_checkpoint(const std::string& path,
                                   std::string* trained_as = nullptr);
VaeModel load_vae_checkpoint(const std::string& path);

}  // namespace divgen
