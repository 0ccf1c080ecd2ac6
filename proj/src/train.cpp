// SPDX-License-Identifier: Apache-2.0
#include "divgen/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace divgen {

using nlohmann::json;

void TrainConfig::validate() const {
  if (steps < 0) throw ContractError("TrainConfig: steps must be >= 0");
  if (batch_states < 1) throw ContractError("TrainConfig: batch_states must be >= 1");
  if (n_div_samples < 2) throw ContractError("TrainConfig: n_div_samples must be >= 2");
  if (alpha <= 0.0) throw ContractError("TrainConfig: alpha must be > 0");
  if (lr_g <= 0.0 || lr_d <= 0.0 || lr_f <= 0.0) {
    throw ContractError("TrainConfig: learning rates must be > 0");
  }
  if (w_adv < 0.0 || w_ndiv < 0.0 || w_ae < 0.0) {
    throw ContractError("TrainConfig: loss weights must be >= 0");
  }
  if (d_steps_per_g < 1) throw ContractError("TrainConfig: d_steps_per_g must be >= 1");
  if (real_batch < 1) throw ContractError("TrainConfig: real_batch must be >= 1");
}

std::string TrainConfig::to_json_string() const {
  json j;
  j["schema_version"] = 1;
  j["seed"] = seed;
  j["steps"] = steps;
  j["batch_states"] = batch_states;
  j["n_div_samples"] = n_div_samples;
  j["alpha"] = alpha;
  j["lr_g"] = lr_g;
  j["lr_d"] = lr_d;
  j["lr_f"] = lr_f;
  j["w_adv"] = w_adv;
  j["w_ndiv"] = w_ndiv;
  j["w_ae"] = w_ae;
  j["d_steps_per_g"] = d_steps_per_g;
  j["real_batch"] = real_batch;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  TrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.steps = j.value("steps", c.steps);
  c.batch_states = j.value("batch_states", c.batch_states);
  c.n_div_samples = j.value("n_div_samples", c.n_div_samples);
  c.alpha = j.value("alpha", c.alpha);
  c.lr_g = j.value("lr_g", c.lr_g);
  c.lr_d = j.value("lr_d", c.lr_d);
  c.lr_f = j.value("lr_f", c.lr_f);
  c.w_adv = j.value("w_adv", c.w_adv);
  c.w_ndiv = j.value("w_ndiv", c.w_ndiv);
  c.w_ae = j.value("w_ae", c.w_ae);
  c.d_steps_per_g = j.value("d_steps_per_g", c.d_steps_per_g);
  c.real_batch = j.value("real_batch", c.real_batch);
  c.validate();
  return c;
}

std::int64_t TrainReport::collapse_warnings_in_last(std::size_t window) const {
  std::size_t col = trace_columns.size();
  for (std::size_t i = 0; i < trace_columns.size(); ++i) {
    if (trace_columns[i] == "collapse_rows") col = i;
  }
  if (col == trace_columns.size()) return 0;
  std::int64_t total = 0;
  const std::size_t start = trace.size() > window ? trace.size() - window : 0;
  for (std::size_t i = start; i < trace.size(); ++i) {
    total += static_cast<std::int64_t>(trace[i][col]);
  }
  return total;
}

std::string TrainReport::to_json_string() const {
  json j;
  j["steps"] = trace.size();
  j["collapse_warnings"] = collapse_warnings;
  j["d_descent_violations"] = d_descent_violations;
  j["wall_clock_sec"] = wall_clock_sec;
  if (holdout_error >= 0.0) j["holdout_error"] = holdout_error;
  if (!checkpoint_path.empty()) j["checkpoint"] = checkpoint_path;
  if (!trace.empty()) {
    json final_row;
    for (std::size_t i = 0; i < trace_columns.size(); ++i) {
      final_row[trace_columns[i]] = trace.back()[i];
    }
    j["final"] = final_row;
  }
  return j.dump(2);
}

void TrainReport::save_trace_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < trace_columns.size(); ++i) {
    if (i) out << ',';
    out << trace_columns[i];
  }
  out << '\n';
  for (const auto& row : trace) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

namespace {

// rng stream indices off the config seed
constexpr std::uint64_t kStreamInit = 0;
constexpr std::uint64_t kStreamLatent = 1;
constexpr std::uint64_t kStreamData = 2;
// evaluation bases (fixed so eval is deterministic for a given seed index)
constexpr std::uint64_t kEvalGenBase = 0x5eed0001;
constexpr std::uint64_t kEvalTruthBase = 0x5eed0002;

Tensor uniform_latents(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.uniform01();
  return Tensor({n, d}, std::move(v));
}

Tensor normal_matrix(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.normal();
  return Tensor({n, d}, std::move(v));
}

void check_finite(double value, const char* name, std::int64_t step) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(name) + " is not finite at step " +
                       std::to_string(step));
  }
}

bool all_states_equal(const Dataset& d) {
  for (const auto& t : d.transitions) {
    if (t.s_t != d.transitions.front().s_t) return false;
  }
  return true;
}

Tensor tile_rows(const Tensor& row, std::size_t n) {
  if (n == 1) return row;
  return matmul(Tensor::full({n, 1}, 1.0), row);
}

struct RealBatch {
  Tensor states;
  Tensor actions;
  Tensor next_states;
};

RealBatch draw_real(const Dataset& d, Rng& rng, std::size_t count) {
  std::vector<double> s, a, ns;
  s.reserve(count * 2);
  a.reserve(count * 2);
  ns.reserve(count * 2);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& t = d.transitions[rng.below(d.size())];
    s.insert(s.end(), {t.s_t[0], t.s_t[1]});
    a.insert(a.end(), {t.a_t[0], t.a_t[1]});
    ns.insert(ns.end(), {t.s_next[0], t.s_next[1]});
  }
  return {Tensor({count, 2}, std::move(s)), Tensor({count, 2}, std::move(a)),
          Tensor({count, 2}, std::move(ns))};
}

double elapsed_sec(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::pair<ModelBundle, TrainReport> train_adversarial(const Dataset& train,
                                                      const TrainConfig& cfg,
                                                      bool with_ndiv,
                                                      bool with_ae) {
  cfg.validate();
  if (train.size() == 0) throw ContractError("training dataset is empty");
  const auto t0 = std::chrono::steady_clock::now();

  ModelBundle m =
      ModelBundle::create(BundleSpec::defaults(), derive_seed(cfg.seed, kStreamInit));
  Rng latent_rng(derive_seed(cfg.seed, kStreamLatent));
  Rng data_rng(derive_seed(cfg.seed, kStreamData));

  auto gen_params = m.generator_params();
  auto d_params = m.discriminator_params();
  AdamState adam_g, adam_d;
  adam_g.beta1 = adam_d.beta1 = 0.0;
  adam_g.beta2 = adam_d.beta2 = 0.9;

  const std::size_t state_batch = all_states_equal(train) ? 1 : cfg.batch_states;
  const std::size_t n = cfg.n_div_samples;
  NdivConfig ndiv_cfg{cfg.alpha, n};

  TrainReport rep;
  rep.trace_columns = {"step",    "loss_d",  "loss_g_adv",
                       "loss_ndiv", "loss_ae", "collapse_rows"};
  rep.trace.reserve(static_cast<std::size_t>(cfg.steps));

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    double ld_val = 0.0, ladv_val = 0.0, lndiv_val = 0.0, lae_val = 0.0;
    std::size_t collapse_this_step = 0;

    for (std::size_t bs = 0; bs < state_batch; ++bs) {
      // (1) sample a state (the fixed origin for the synthetic task)
      const auto& chosen = train.transitions[data_rng.below(train.size())];
      Tensor s_t = Tensor::row({chosen.s_t[0], chosen.s_t[1]});

      // (2) draw N latents
      Tensor z = uniform_latents(latent_rng, n, m.spec.latent_dim);

      // (3) discriminator update(s); generator outputs are constants here
      for (int ds = 0; ds < cfg.d_steps_per_g; ++ds) {
        RealBatch rb = draw_real(train, data_rng, cfg.real_batch);
        Tensor e_real = m.encode_state(rb.states);
        Tensor e_state = m.encode_state(s_t);
        Tensor fake = m.generate_action(e_state, z);

        Graph g;
        MlpHandles dh = m.discriminator.watch_normalized(g);
        Tensor real_scores =
            m.discriminator.forward(dh, concat_cols(rb.actions, e_real));
        Tensor fake_scores = m.discriminator.forward(
            dh, concat_cols(fake, tile_rows(e_state, n)));
        Tensor ld = hinge_discriminator_loss(real_scores, fake_scores);
        ld_val = ld.item();
        check_finite(ld_val, "L_D", step);
        GradientMap grads = g.backward(ld);
        adam_step(d_params, grads, adam_d, cfg.lr_d);

        if (cfg.check_d_descent) {
          // Re-evaluate on the same minibatch with the updated weights;
          // sigma comes from a copy so the persistent u stays untouched.
          auto sn_copy = m.discriminator.sn;
          MlpHandles fh;
          for (std::size_t l = 0; l < m.discriminator.net.layer_count(); ++l) {
            fh.w.push_back(
                spectral_normalize(m.discriminator.net.weight(l), sn_copy[l]));
            fh.b.push_back(m.discriminator.net.bias(l));
          }
          Tensor post = hinge_discriminator_loss(
              m.discriminator.forward(fh, concat_cols(rb.actions, e_real)),
              m.discriminator.forward(fh,
                                      concat_cols(fake, tile_rows(e_state, n))));
          if (post.item() > ld_val + 1e-6) ++rep.d_descent_violations;
        }
      }

      // (4) generator update
      {
        Graph g;
        MlpHandles enc = m.state_encoder.watch(g);
        Tensor e = m.state_encoder.forward(enc, s_t);
        Tensor e_tiled = tile_rows(e, n);
        MlpHandles ad = m.action_decoder.watch(g);
        Tensor actions =
            m.action_decoder.forward(ad, concat_cols(e_tiled, z));
        MlpHandles dh = m.discriminator.watch_normalized(g);
        Tensor fake_scores =
            m.discriminator.forward(dh, concat_cols(actions, e_tiled));
        Tensor l_adv = hinge_generator_loss(fake_scores);
        ladv_val = l_adv.item();
        check_finite(ladv_val, "L_G", step);
        Tensor total = mul(Tensor::scalar(cfg.w_adv), l_adv);

        if (with_ndiv) {
          auto dz = normalize_rows(pairwise_distances(z), true);
          auto da = normalize_rows(pairwise_distances(actions), true);
          collapse_this_step += da.degenerate_count;
          Tensor l_ndiv = ndiv_loss(dz, da, ndiv_cfg);
          lndiv_val = l_ndiv.item();
          check_finite(lndiv_val, "L_ndiv", step);
          total = add(total, mul(Tensor::scalar(cfg.w_ndiv), l_ndiv));
        }
        if (with_ae) {
          MlpHandles dec = m.state_decoder.watch(g);
          Tensor recon = m.state_decoder.forward(dec, e);
          Tensor l_ae = reconstruction_loss(recon, s_t);
          lae_val = l_ae.item();
          check_finite(lae_val, "L_ae", step);
          total = add(total, mul(Tensor::scalar(cfg.w_ae), l_ae));
        }
        GradientMap grads = g.backward(total);
        adam_step(gen_params, grads, adam_g, cfg.lr_g);
      }
    }

    rep.collapse_warnings += static_cast<std::int64_t>(collapse_this_step);
    rep.trace.push_back({static_cast<double>(step), ld_val, ladv_val, lndiv_val,
                         lae_val, static_cast<double>(collapse_this_step)});
  }

  rep.wall_clock_sec = elapsed_sec(t0);
  return {std::move(m), std::move(rep)};
}

}  // namespace

std::pair<ModelBundle, TrainReport> train_ours(const Dataset& train,
                                               const TrainConfig& cfg) {
  return train_adversarial(train, cfg, /*with_ndiv=*/cfg.w_ndiv > 0.0,
                           /*with_ae=*/cfg.w_ae > 0.0);
}

std::pair<ModelBundle, TrainReport> train_gan_baseline(const Dataset& train,
                                                       const TrainConfig& cfg) {
  return train_adversarial(train, cfg, /*with_ndiv=*/false, /*with_ae=*/false);
}

std::pair<VaeModel, TrainReport> train_vae_baseline(const Dataset& train,
                                                    const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw ContractError("training dataset is empty");
  const auto t0 = std::chrono::steady_clock::now();

  VaeModel m = VaeModel::create(2, 2, derive_seed(cfg.seed, kStreamInit));
  Rng latent_rng(derive_seed(cfg.seed, kStreamLatent));
  Rng data_rng(derive_seed(cfg.seed, kStreamData));
  auto params = m.params();
  AdamState adam;

  TrainReport rep;
  rep.trace_columns = {"step", "loss_elbo"};
  rep.trace.reserve(static_cast<std::size_t>(cfg.steps));

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    RealBatch rb = draw_real(train, data_rng, cfg.real_batch);
    Tensor eps = normal_matrix(latent_rng, cfg.real_batch, m.latent_dim);

    Graph g;
    MlpHandles mu_h = m.enc_mu.watch(g);
    MlpHandles lv_h = m.enc_logvar.watch(g);
    MlpHandles dec_h = m.decoder.watch(g);
    Tensor mu = m.enc_mu.forward(mu_h, rb.actions);
    Tensor logvar = m.enc_logvar.forward(lv_h, rb.actions);
    Tensor z = add(mu, mul(exp(mul(Tensor::scalar(0.5), logvar)), eps));
    Tensor recon = m.decoder.forward(dec_h, z);
    Tensor loss = vae_elbo_loss(recon, rb.actions, mu, logvar, 1.0);
    const double lv = loss.item();
    check_finite(lv, "L_elbo", step);
    GradientMap grads = g.backward(loss);
    adam_step(params, grads, adam, cfg.lr_g);
    rep.trace.push_back({static_cast<double>(step), lv});
  }

  rep.wall_clock_sec = elapsed_sec(t0);
  return {std::move(m), std::move(rep)};
}

std::pair<ModelBundle, TrainReport> train_forward_model(const Dataset& train,
                                                        const TrainConfig& cfg,
                                                        const Dataset* holdout) {
  cfg.validate();
  if (train.size() == 0) throw ContractError("training dataset is empty");
  const auto t0 = std::chrono::steady_clock::now();

  ModelBundle m =
      ModelBundle::create(BundleSpec::defaults(), derive_seed(cfg.seed, kStreamInit));
  Rng data_rng(derive_seed(cfg.seed, kStreamData));
  auto params = m.forward_params();
  AdamState adam;

  TrainReport rep;
  rep.trace_columns = {"step", "loss_recon"};
  rep.trace.reserve(static_cast<std::size_t>(cfg.steps));

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    RealBatch rb = draw_real(train, data_rng, cfg.real_batch);
    Graph g;
    MlpHandles fm = m.forward_model.watch(g);
    Tensor pred =
        m.forward_model.forward(fm, concat_cols(rb.states, rb.actions));
    Tensor loss = reconstruction_loss(pred, rb.next_states);
    const double lv = loss.item();
    check_finite(lv, "L_recon", step);
    GradientMap grads = g.backward(loss);
    adam_step(params, grads, adam, cfg.lr_f);
    rep.trace.push_back({static_cast<double>(step), lv});
  }

  if (holdout && holdout->size() > 0) {
    std::vector<double> s, a;
    for (const auto& t : holdout->transitions) {
      s.insert(s.end(), {t.s_t[0], t.s_t[1]});
      a.insert(a.end(), {t.a_t[0], t.a_t[1]});
    }
    Tensor pred = m.predict_next_state(Tensor({holdout->size(), 2}, std::move(s)),
                                       Tensor({holdout->size(), 2}, std::move(a)));
    double err = 0.0;
    for (std::size_t i = 0; i < holdout->size(); ++i) {
      const auto& truth = holdout->transitions[i].s_next;
      err += std::hypot(pred.at(i, 0) - truth[0], pred.at(i, 1) - truth[1]);
    }
    rep.holdout_error = err / static_cast<double>(holdout->size());
  }

  rep.wall_clock_sec = elapsed_sec(t0);
  return {std::move(m), std::move(rep)};
}

Tensor sample_actions(const ModelBundle& m, const Tensor& s_t, std::size_t n,
                      std::uint64_t seed) {
  Rng rng(seed);
  Tensor z = uniform_latents(rng, n, m.spec.latent_dim);
  Tensor e = m.encode_state(s_t);
  return m.generate_action(e, z);
}

Tensor sample_actions(const VaeModel& m, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Tensor z = normal_matrix(rng, n, m.latent_dim);
  return m.decode(z);
}

MetricsReport evaluate_sampler(const ActionSampler& sampler,
                               const StarSpec& spec, std::size_t n,
                               std::size_t seeds) {
  if (n < 3) throw ContractError("evaluate_sampler: n must be >= 3");
  if (seeds < 1) throw ContractError("evaluate_sampler: seeds must be >= 1");
  MetricsReport rep;
  for (std::size_t s = 0; s < seeds; ++s) {
    Tensor gen = sampler(n, derive_seed(kEvalGenBase, s));
    Rng truth_rng(derive_seed(kEvalTruthBase, s));
    std::vector<double> tv;
    tv.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p = sample_star_action(spec, truth_rng);
      tv.insert(tv.end(), {p[0], p[1]});
    }
    Tensor truth({n, 2}, std::move(tv));

    EvalResult e;
    e.frechet_distance = frechet_distance(fit_gaussian(gen), fit_gaussian(truth));
    e.js_divergence = js_divergence(gen, truth);
    Coverage cov = star_coverage(gen, spec);
    e.inside_fraction = cov.inside_fraction;
    e.per_arm_mass = cov.per_arm_mass;
    rep.per_seed.push_back(std::move(e));
  }
  rep.aggregate();
  return rep;
}

MetricsReport evaluate(const ModelBundle& m, const Dataset& test,
                       const StarSpec& spec, std::size_t n, std::size_t seeds) {
  (void)test;
  Tensor s_t = Tensor::row({spec.center[0], spec.center[1]});
  return evaluate_sampler(
      [&](std::size_t count, std::uint64_t seed) {
        return sample_actions(m, s_t, count, seed);
      },
      spec, n, seeds);
}

MetricsReport evaluate(const VaeModel& m, const Dataset& test,
                       const StarSpec& spec, std::size_t n, std::size_t seeds) {
  (void)test;
  return evaluate_sampler(
      [&](std::size_t count, std::uint64_t seed) {
        return sample_actions(m, count, seed);
      },
      spec, n, seeds);
}

}  // namespace divgen
