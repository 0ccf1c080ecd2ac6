// SPDX-License-Identifier: Apache-2.0
#include "divgen/nets.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include "json.hpp"

namespace divgen {

using nlohmann::json;

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw ContractError("MlpSpec needs at least 2 layer widths");
  }
  for (auto w : layer_widths) {
    if (w < 1) throw ContractError("MlpSpec layer width must be >= 1");
  }
}

Mlp::Mlp(MlpSpec spec, std::string name, Rng& init_rng, ParamIdGen& ids)
    : spec_(std::move(spec)), name_(std::move(name)) {
  spec_.validate();
  const auto& w = spec_.layer_widths;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const std::size_t fan_in = w[l], fan_out = w[l + 1];
    const bool last = (l + 2 == w.size());
    // He scaling for relu hidden layers, Xavier-style for the rest.
    const double stddev =
        (!last && spec_.hidden_activation == Activation::kRelu)
            ? std::sqrt(2.0 / static_cast<double>(fan_in))
            : std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> wv(fan_in * fan_out);
    for (auto& x : wv) x = stddev * init_rng.normal();
    params_.push_back(
        {ids.next(), name_ + ".w" + std::to_string(l),
         Tensor({fan_in, fan_out}, std::move(wv))});
    params_.push_back({ids.next(), name_ + ".b" + std::to_string(l),
                       Tensor::zeros({1, fan_out})});
  }
}

void Mlp::collect_params(std::vector<Parameter*>& out) {
  for (auto& p : params_) out.push_back(&p);
}

MlpHandles Mlp::watch(Graph& g) const {
  MlpHandles h;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    h.w.push_back(g.param(params_[2 * l].id, params_[2 * l].value));
    h.b.push_back(g.param(params_[2 * l + 1].id, params_[2 * l + 1].value));
  }
  return h;
}

MlpHandles Mlp::handles() const {
  MlpHandles h;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    h.w.push_back(params_[2 * l].value);
    h.b.push_back(params_[2 * l + 1].value);
  }
  return h;
}

namespace {

// bias [1, out] broadcast over a batch of n rows.
Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.rows();
  if (n == 1) return add(x, bias);
  return add(x, matmul(Tensor::full({n, 1}, 1.0), bias));
}

Tensor apply_hidden(Activation a, const Tensor& t) {
  return a == Activation::kRelu ? relu(t) : tanh(t);
}

Tensor apply_output(OutputActivation a, const Tensor& t) {
  switch (a) {
    case OutputActivation::kIdentity: return t;
    case OutputActivation::kTanh: return tanh(t);
    case OutputActivation::kSigmoid: return sigmoid(t);
  }
  return t;
}

}  // namespace

Tensor Mlp::forward(const MlpHandles& h, const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != spec_.input_width()) {
    throw DimensionError(name_ + ": input " + shape_str(x.shape()) +
                         " does not match width " +
                         std::to_string(spec_.input_width()));
  }
  Tensor cur = x;
  for (std::size_t l = 0; l < h.w.size(); ++l) {
    cur = add_bias(matmul(cur, h.w[l]), h.b[l]);
    if (l + 1 < h.w.size()) {
      cur = apply_hidden(spec_.hidden_activation, cur);
    } else {
      cur = apply_output(spec_.output_activation, cur);
    }
  }
  return cur;
}

// ---- Spectral normalization ----

namespace {

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double spectral_sigma(const Tensor& weight, SpectralNormState& s) {
  if (weight.rank() != 2) {
    throw DimensionError("spectral_sigma: weight must be rank-2, got " +
                         shape_str(weight.shape()));
  }
  const std::size_t in = weight.rows(), out = weight.cols();
  if (s.u.size() != out) {
    throw ContractError("spectral_sigma: u has length " +
                        std::to_string(s.u.size()) + ", weight has " +
                        std::to_string(out) + " columns");
  }
  const auto& w = weight.values();
  std::vector<double> v(in, 0.0);
  for (int it = 0; it < s.power_iterations; ++it) {
    // v = W u, normalized
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < out; ++j) acc += w[i * out + j] * s.u[j];
      v[i] = acc;
    }
    const double nv = vec_norm(v);
    if (nv > 0.0) {
      for (double& x : v) x /= nv;
    }
    // u = W^T v, normalized
    std::vector<double> unew(out, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      const double vi = v[i];
      if (vi == 0.0) continue;
      for (std::size_t j = 0; j < out; ++j) unew[j] += w[i * out + j] * vi;
    }
    const double nu = vec_norm(unew);
    if (nu > 0.0) {
      for (std::size_t j = 0; j < out; ++j) s.u[j] = unew[j] / nu;
    }
  }
  // Rayleigh quotient v^T W u with the final vectors.
  double sigma = 0.0;
  for (std::size_t i = 0; i < in; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < out; ++j) acc += w[i * out + j] * s.u[j];
    sigma += v[i] * acc;
  }
  return sigma > 1e-12 ? sigma : 1e-12;
}

Tensor spectral_normalize(const Tensor& weight, SpectralNormState& s) {
  const double sigma = spectral_sigma(weight, s);
  std::vector<double> out = weight.values();
  for (double& x : out) x /= sigma;
  return Tensor(weight.shape(), std::move(out));
}

MlpHandles Discriminator::watch_normalized(Graph& g) {
  MlpHandles h;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double sigma = spectral_sigma(net.weight(l), sn[l]);
    Tensor w = g.param(net.params()[2 * l].id, net.weight(l));
    h.w.push_back(mul(w, Tensor::scalar(1.0 / sigma)));
    h.b.push_back(g.param(net.params()[2 * l + 1].id, net.bias(l)));
  }
  return h;
}

MlpHandles Discriminator::normalized_handles() {
  MlpHandles h;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    h.w.push_back(spectral_normalize(net.weight(l), sn[l]));
    h.b.push_back(net.bias(l));
  }
  return h;
}

// ---- Model bundle ----

BundleSpec BundleSpec::defaults() {
  BundleSpec s;
  s.state_encoder = {{2, 32, 8}, Activation::kRelu, OutputActivation::kIdentity};
  s.state_decoder = {{8, 32, 2}, Activation::kRelu, OutputActivation::kIdentity};
  s.action_decoder = {{10, 64, 64, 2}, Activation::kRelu, OutputActivation::kIdentity};
  s.discriminator = {{10, 64, 64, 1}, Activation::kRelu, OutputActivation::kIdentity};
  s.forward_model = {{4, 64, 64, 2}, Activation::kRelu, OutputActivation::kIdentity};
  return s;
}

void BundleSpec::validate() const {
  state_encoder.validate();
  state_decoder.validate();
  action_decoder.validate();
  discriminator.validate();
  forward_model.validate();
  if (state_encoder.input_width() != state_dim ||
      state_encoder.output_width() != embed_dim) {
    throw ContractError("state encoder widths do not match state/embed dims");
  }
  if (state_decoder.input_width() != embed_dim ||
      state_decoder.output_width() != state_dim) {
    throw ContractError("state decoder widths do not match embed/state dims");
  }
  if (action_decoder.input_width() != embed_dim + latent_dim ||
      action_decoder.output_width() != action_dim) {
    throw ContractError("action decoder input must be embed_dim + latent_dim");
  }
  if (discriminator.input_width() != action_dim + embed_dim ||
      discriminator.output_width() != 1) {
    throw ContractError("discriminator input must be action_dim + embed_dim");
  }
  if (forward_model.input_width() != state_dim + action_dim ||
      forward_model.output_width() != state_dim) {
    throw ContractError("forward model input must be state_dim + action_dim");
  }
}

ModelBundle ModelBundle::create(const BundleSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelBundle m;
  m.spec = spec;
  ParamIdGen ids;
  Rng r_enc(derive_seed(seed, 10)), r_dec(derive_seed(seed, 11));
  Rng r_act(derive_seed(seed, 12)), r_dsc(derive_seed(seed, 13));
  Rng r_fwd(derive_seed(seed, 14)), r_u(derive_seed(seed, 15));
  m.state_encoder = Mlp(spec.state_encoder, "state_encoder", r_enc, ids);
  m.state_decoder = Mlp(spec.state_decoder, "state_decoder", r_dec, ids);
  m.action_decoder = Mlp(spec.action_decoder, "action_decoder", r_act, ids);
  m.forward_model = Mlp(spec.forward_model, "forward_model", r_fwd, ids);
  m.discriminator.net = Mlp(spec.discriminator, "discriminator", r_dsc, ids);
  for (std::size_t l = 0; l < m.discriminator.net.layer_count(); ++l) {
    SpectralNormState st;
    st.power_iterations = 1;
    st.u.resize(spec.discriminator.layer_widths[l + 1]);
    for (auto& x : st.u) x = r_u.normal();
    const double n = vec_norm(st.u);
    for (auto& x : st.u) x /= n;
    m.discriminator.sn.push_back(std::move(st));
  }
  return m;
}

Tensor ModelBundle::encode_state(const Tensor& s) const {
  return state_encoder.forward(s);
}

Tensor ModelBundle::decode_state(const Tensor& e) const {
  return state_decoder.forward(e);
}

Tensor ModelBundle::generate_action(const Tensor& e, const Tensor& z) const {
  if (z.rank() != 2 || z.cols() != spec.latent_dim) {
    throw DimensionError("generate_action: z must be [n, latent_dim]");
  }
  for (double x : z.values()) {
    if (x < 0.0 || x > 1.0) {
      throw ContractError("generate_action: latent sample outside [0,1]");
    }
  }
  Tensor emb = e;
  if (e.rows() == 1 && z.rows() > 1) {
    emb = matmul(Tensor::full({z.rows(), 1}, 1.0), e);
  }
  return action_decoder.forward(concat_cols(emb, z));
}

Tensor ModelBundle::discriminate(const Tensor& a, const Tensor& e) {
  Tensor emb = e;
  if (e.rows() == 1 && a.rows() > 1) {
    emb = matmul(Tensor::full({a.rows(), 1}, 1.0), e);
  }
  return discriminator.forward(discriminator.normalized_handles(),
                               concat_cols(a, emb));
}

Tensor ModelBundle::predict_next_state(const Tensor& s, const Tensor& a) const {
  Tensor st = s;
  if (s.rows() == 1 && a.rows() > 1) {
    st = matmul(Tensor::full({a.rows(), 1}, 1.0), s);
  }
  return forward_model.forward(concat_cols(st, a));
}

std::vector<Parameter*> ModelBundle::generator_params() {
  std::vector<Parameter*> out;
  state_encoder.collect_params(out);
  state_decoder.collect_params(out);
  action_decoder.collect_params(out);
  return out;
}

std::vector<Parameter*> ModelBundle::discriminator_params() {
  std::vector<Parameter*> out;
  discriminator.net.collect_params(out);
  return out;
}

std::vector<Parameter*> ModelBundle::forward_params() {
  std::vector<Parameter*> out;
  forward_model.collect_params(out);
  return out;
}

std::vector<Parameter*> ModelBundle::all_params() {
  auto out = generator_params();
  discriminator.net.collect_params(out);
  forward_model.collect_params(out);
  return out;
}

// ---- VAE ----

VaeModel VaeModel::create(std::size_t action_dim, std::size_t latent_dim,
                          std::uint64_t seed) {
  VaeModel m;
  m.action_dim = action_dim;
  m.latent_dim = latent_dim;
  ParamIdGen ids;
  Rng r_mu(derive_seed(seed, 20)), r_lv(derive_seed(seed, 21)),
      r_de(derive_seed(seed, 22));
  MlpSpec enc{{action_dim, 64, 64, latent_dim}, Activation::kRelu,
              OutputActivation::kIdentity};
  MlpSpec dec{{latent_dim, 64, 64, action_dim}, Activation::kRelu,
              OutputActivation::kIdentity};
  m.enc_mu = Mlp(enc, "enc_mu", r_mu, ids);
  m.enc_logvar = Mlp(enc, "enc_logvar", r_lv, ids);
  m.decoder = Mlp(dec, "decoder", r_de, ids);
  return m;
}

std::vector<Parameter*> VaeModel::params() {
  std::vector<Parameter*> out;
  enc_mu.collect_params(out);
  enc_logvar.collect_params(out);
  decoder.collect_params(out);
  return out;
}

// ---- Checkpoints ----

namespace {

constexpr int kCheckpointVersion = 1;

json mlp_spec_to_json(const MlpSpec& s) {
  json j;
  j["widths"] = s.layer_widths;
  j["hidden"] = s.hidden_activation == Activation::kRelu ? "relu" : "tanh";
  switch (s.output_activation) {
    case OutputActivation::kIdentity: j["output"] = "identity"; break;
    case OutputActivation::kTanh: j["output"] = "tanh"; break;
    case OutputActivation::kSigmoid: j["output"] = "sigmoid"; break;
  }
  return j;
}

MlpSpec mlp_spec_from_json(const json& j) {
  MlpSpec s;
  s.layer_widths = j.at("widths").get<std::vector<std::size_t>>();
  s.hidden_activation =
      j.at("hidden") == "tanh" ? Activation::kTanh : Activation::kRelu;
  const std::string out = j.at("output");
  s.output_activation = out == "tanh"      ? OutputActivation::kTanh
                        : out == "sigmoid" ? OutputActivation::kSigmoid
                                           : OutputActivation::kIdentity;
  return s;
}

void params_to_json(json& dst, const std::vector<Parameter>& params) {
  for (const auto& p : params) {
    dst[p.name] = {{"shape", p.value.shape()}, {"values", p.value.values()}};
  }
}

void params_from_json(const json& src, std::vector<Parameter>& params) {
  for (auto& p : params) {
    const auto& e = src.at(p.name);
    Shape shape = e.at("shape").get<Shape>();
    auto values = e.at("values").get<std::vector<double>>();
    p.value = Tensor(std::move(shape), std::move(values));
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

void save_checkpoint(const ModelBundle& m, const std::string& trained_as,
                     const std::string& path) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "bundle";
  j["trained_as"] = trained_as;
  json spec;
  spec["state_dim"] = m.spec.state_dim;
  spec["action_dim"] = m.spec.action_dim;
  spec["latent_dim"] = m.spec.latent_dim;
  spec["embed_dim"] = m.spec.embed_dim;
  spec["state_encoder"] = mlp_spec_to_json(m.spec.state_encoder);
  spec["state_decoder"] = mlp_spec_to_json(m.spec.state_decoder);
  spec["action_decoder"] = mlp_spec_to_json(m.spec.action_decoder);
  spec["discriminator"] = mlp_spec_to_json(m.spec.discriminator);
  spec["forward_model"] = mlp_spec_to_json(m.spec.forward_model);
  j["bundle_spec"] = spec;
  json params;
  params_to_json(params, m.state_encoder.params());
  params_to_json(params, m.state_decoder.params());
  params_to_json(params, m.action_decoder.params());
  params_to_json(params, m.forward_model.params());
  params_to_json(params, m.discriminator.net.params());
  j["params"] = params;
  json sn;
  sn["power_iterations"] =
      m.discriminator.sn.empty() ? 1 : m.discriminator.sn[0].power_iterations;
  json us = json::array();
  for (const auto& s : m.discriminator.sn) us.push_back(s.u);
  sn["u"] = us;
  j["spectral_norm"] = sn;
  write_json_file(path, j);
}

void save_checkpoint(const VaeModel& m, const std::string& path) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "vae";
  j["action_dim"] = m.action_dim;
  j["latent_dim"] = m.latent_dim;
  j["enc_spec"] = mlp_spec_to_json(m.enc_mu.spec());
  j["dec_spec"] = mlp_spec_to_json(m.decoder.spec());
  json params;
  params_to_json(params, m.enc_mu.params());
  params_to_json(params, m.enc_logvar.params());
  params_to_json(params, m.decoder.params());
  j["params"] = params;
  write_json_file(path, j);
}

std::string checkpoint_kind(const std::string& path) {
  return read_json_file(path).at("kind").get<std::string>();
}

ModelBundle load_bundle_checkpoint(const std::string& path,
                                   std::string* trained_as) {
  json j = read_json_file(path);
  if (j.at("format_version").get<int>() != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version");
  }
  if (j.at("kind") != "bundle") {
    throw ParseError(path + ": not a model-bundle checkpoint");
  }
  const json& spec = j.at("bundle_spec");
  BundleSpec bs;
  bs.state_dim = spec.at("state_dim").get<std::size_t>();
  bs.action_dim = spec.at("action_dim").get<std::size_t>();
  bs.latent_dim = spec.at("latent_dim").get<std::size_t>();
  bs.embed_dim = spec.at("embed_dim").get<std::size_t>();
  bs.state_encoder = mlp_spec_from_json(spec.at("state_encoder"));
  bs.state_decoder = mlp_spec_from_json(spec.at("state_decoder"));
  bs.action_decoder = mlp_spec_from_json(spec.at("action_decoder"));
  bs.discriminator = mlp_spec_from_json(spec.at("discriminator"));
  bs.forward_model = mlp_spec_from_json(spec.at("forward_model"));
  ModelBundle m = ModelBundle::create(bs, 0);
  const json& params = j.at("params");
  params_from_json(params, m.state_encoder.params());
  params_from_json(params, m.state_decoder.params());
  params_from_json(params, m.action_decoder.params());
  params_from_json(params, m.forward_model.params());
  params_from_json(params, m.discriminator.net.params());
  const json& sn = j.at("spectral_norm");
  const auto us = sn.at("u").get<std::vector<std::vector<double>>>();
  if (us.size() != m.discriminator.sn.size()) {
    throw ParseError(path + ": spectral_norm u count mismatch");
  }
  for (std::size_t l = 0; l < us.size(); ++l) {
    m.discriminator.sn[l].u = us[l];
    m.discriminator.sn[l].power_iterations = sn.at("power_iterations").get<int>();
  }
  if (trained_as) *trained_as = j.value("trained_as", "");
  return m;
}

VaeModel load_vae_checkpoint(const std::string& path) {
  json j = read_json_file(path);
  if (j.at("format_version").get<int>() != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version");
  }
  if (j.at("kind") != "vae") {
    throw ParseError(path + ": not a vae checkpoint");
  }
  VaeModel m = VaeModel::create(j.at("action_dim").get<std::size_t>(),
                                j.at("latent_dim").get<std::size_t>(), 0);
  const json& params = j.at("params");
  params_from_json(params, m.enc_mu.params());
  params_from_json(params, m.enc_logvar.params());
  params_from_json(params, m.decoder.params());
  return m;
}

}  // namespace divgen
