// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_MOTIFS_HPP_
#define HYDRA_MOTIFS_HPP_

// Two-variable toy SCMs for erasure and self-repair, and hand-built two-layer
// transformers whose weights realise each motif.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/effects.hpp"
#include "hydra/error.hpp"
#include "hydra/intervene.hpp"
#include "hydra/model.hpp"

namespace hydra {

enum class Motif { erasure, self_repair };

constexpr std::string_view to_string(Motif m) noexcept {
  return m == Motif::erasure ? "erasure" : "self_repair";
}

inline Motif parse_motif(std::string_view s) {
  if (s == "erasure") return Motif::erasure;
  if (s == "self_repair") return Motif::self_repair;
  throw Error(ErrorKind::ConfigError, "unknown motif '" + std::string(s) + "'");
}

// y = x(u) + f(x, u) with x(u) = u.
struct ToySCM {
  Motif motif = Motif::self_repair;
  double u = 0.0;

  double f(double x) const {
    if (motif == Motif::erasure) return -x;
    return x == u ? 0.0 : u;
  }
};

struct ToyValues {
  double x = 0.0;
  double y = 0.0;
};

struct ToyEffects {
  double total = 0.0;
  double direct = 0.0;
  double indirect = 0.0;
};

inline ToyValues toy_evaluate(const ToySCM& scm) {
  const double x = scm.u;
  return {x, x + scm.f(x)};
}

/// Effects of do(x = x_new) on y. The direct effect holds f at its clean
/// value; the indirect effect restores x and holds f at its ablated value.
inline ToyEffects toy_effects(const ToySCM& scm, double x_new = 0.0) {
  const ToyValues clean = toy_evaluate(scm);
  const double f_clean = scm.f(clean.x);
  const double f_ablated = scm.f(x_new);
  return {(x_new + f_ablated) - clean.y, (x_new + f_clean) - clean.y,
          (clean.x + f_ablated) - clean.y};
}

inline constexpr double kDefaultTheta = 5.0;
inline constexpr double kDefaultAlpha = 0.5;
inline constexpr int kDefaultExhibitPrompts = 20;
// Weight of the carrier direction in the target token's unembedding column.
// Keeps the target logit positive for erasure coefficients up to 1.
inline constexpr double kCarrierReadout = 0.25;

struct ExhibitNet {
  Motif motif = Motif::self_repair;
  Parameters params;
  double theta = kDefaultTheta;
  double alpha = 0.0;
  std::uint64_t d_seed = 0;
  Vector direction;  // logit direction d written by layer-1 attention
  Vector carrier;    // direction e in the embedding that carries the strength
  TokenId target_token = 0;
  std::vector<Tokens> prompts;   // single-token prompts
  std::vector<double> strengths;  // per-prompt strength written along d

  const ModelConfig& config() const { return params.config; }

  nlohmann::json metadata() const {
    std::vector<int> tokens;
    for (const auto& p : prompts) tokens.push_back(p.front());
    nlohmann::json m = {{"motif", std::string(to_string(motif))},
                        {"theta", theta},
                        {"alpha", alpha},
                        {"d_seed", d_seed},
                        {"target_token", target_token},
                        {"prompt_tokens", tokens},
                        {"strengths", strengths}};
    if (motif == Motif::self_repair) {
      m["gate"] =
          "layer-2 MLP writes (relu(p) - relu(-p)) * d with p = <z,e> - <z,d>; closed (p = 0) "
          "on clean runs, linear in p on both sides of 0, restoring the strength along d after "
          "any replacement of the layer-1 attention output";
    } else {
      m["gate"] = "layer-2 MLP writes -alpha * (relu(<z,d>) - relu(-<z,d>)) * d, exact over all of R";
    }
    return m;
  }
};

namespace detail {

inline void check_exhibit_template(const ModelConfig& cfg, int n_prompts) {
  cfg.validate();
  if (cfg.n_layers != 2 || cfg.norm_mode != NormMode::identity ||
      cfg.block_order != BlockOrder::sequential) {
    throw Error(ErrorKind::InvalidConfig,
                "exhibit networks need L=2, norm_mode=identity, block_order=sequential");
  }
  if (cfg.d_model < 3 || cfg.d_mlp < 2 || cfg.vocab_size < n_prompts + 2 || n_prompts < 1) {
    throw Error(ErrorKind::InvalidConfig, "exhibit template too small for the requested prompts");
  }
}

inline Vector project_out(Vector v, const Vector& a, const Vector& b) {
  v -= v.dot(a) * a;
  v -= v.dot(b) * b;
  return v;
}

// Shared skeleton: zero weights except layer-1 attention copying <z,e> along d.
inline ExhibitNet exhibit_skeleton(Motif motif, const ModelConfig& cfg, double theta,
                                   std::uint64_t d_seed, int n_prompts) {
  check_exhibit_template(cfg, n_prompts);
  if (!(theta > 0.0)) throw Error(ErrorKind::InvalidConfig, "theta must be positive");
  const Eigen::Index dm = cfg.d_model;
  std::mt19937_64 rng(d_seed);
  const Matrix basis = orthogonal_matrix(rng, dm, dm);
  ExhibitNet net;
  net.motif = motif;
  net.theta = theta;
  net.d_seed = d_seed;
  net.direction = basis.col(0);
  net.carrier = basis.col(1);
  net.target_token = 0;

  Parameters& p = net.params;
  p.config = cfg;
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dm)));
  auto random_in_complement = [&] {
    Vector v(dm);
    for (Eigen::Index i = 0; i < dm; ++i) v[i] = normal(rng);
    return project_out(v, net.direction, net.carrier);
  };

  p.embed = Matrix::Zero(cfg.vocab_size, dm);
  const int first_prompt = cfg.vocab_size - n_prompts;
  for (int tok = 0; tok < first_prompt; ++tok) p.embed.row(tok) = random_in_complement().transpose();
  for (int k = 0; k < n_prompts; ++k) {
    const double s = n_prompts == 1 ? theta
                                    : theta * (0.5 + static_cast<double>(k) / (n_prompts - 1));
    p.embed.row(first_prompt + k) = (s * net.carrier).transpose();
    net.prompts.push_back({first_prompt + k});
    net.strengths.push_back(s);
  }
  p.pos_embed = Matrix::Zero(cfg.max_seq_len, dm);

  p.layers.resize(2);
  for (auto& layer : p.layers) {
    layer.w_q = Matrix::Zero(dm, dm);
    layer.w_k = Matrix::Zero(dm, dm);
    layer.w_v = Matrix::Zero(dm, dm);
    layer.w_o = Matrix::Zero(dm, dm);
    layer.attn_gain = Vector::Ones(dm);
    layer.mlp_gain = Vector::Ones(dm);
    layer.w_in = Matrix::Zero(dm, cfg.d_mlp);
    layer.w_out = Matrix::Zero(cfg.d_mlp, dm);
  }
  // Head 0, channel 0 carries <z,e>; the output projection writes it along d.
  p.layers[0].w_v.col(0) = net.carrier;
  p.layers[0].w_o.row(0) = net.direction.transpose();

  p.final_gain = Vector::Ones(dm);
  p.unembed = Matrix::Zero(dm, cfg.vocab_size);
  p.unembed.col(net.target_token) = net.direction + kCarrierReadout * net.carrier;
  for (int tok = 1; tok < cfg.vocab_size; ++tok) p.unembed.col(tok) = random_in_complement();
  return net;
}

struct ExhibitCheck {
  LayerProfile clean;
  AblationProfiles ablated;
  CompensationRecord record;
  double total = 0.0;
  double direct = 0.0;
};

inline ExhibitCheck zero_ablate_attention(const ExhibitNet& net, const Tokens& prompt) {
  const auto clean = forward(net.params, prompt);
  const NodeRef node{1, NodeKind::attn, clean.length()};
  const Vector zero = Vector::Zero(net.config().d_model);
  ExhibitCheck c;
  c.clean = layer_profile(net.params, clean);
  const std::vector<Vector> values{zero};
  c.ablated = ablated_profile(net.params, clean, node, values);
  c.record = compensatory_effect(c.clean, c.ablated.mean);
  c.total = total_effect(net.params, clean, node, zero);
  c.direct = direct_effect(net.params, clean, node, zero);
  return c;
}

inline void require_exhibit(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::ExhibitInvalid, what);
}

}  // namespace detail

/// Runs the exhibit's acceptance bounds on every prompt; throws ExhibitInvalid.
inline void verify_exhibit(const ExhibitNet& net) {
  for (const auto& prompt : net.prompts) {
    const auto clean = forward(net.params, prompt);
    const std::string where = " (prompt token " + std::to_string(prompt.front()) + ")";
    detail::require_exhibit(clean.final_top_token() == net.target_token &&
                                !argmax_is_tied(clean.logits.back()),
                            "target token is not the unique argmax" + where);
    const auto c = detail::zero_ablate_attention(net, prompt);
    const double de = std::abs(c.direct);
    detail::require_exhibit(de > 0.0, "ablated layer has no direct effect" + where);
    if (net.motif == Motif::self_repair) {
      detail::require_exhibit(std::abs(c.total) <= 0.05 * de, "total effect not repaired" + where);
      detail::require_exhibit(c.record.ce >= 0.95 * de && c.record.ce <= de * (1.0 + 1e-9),
                              "compensation outside [0.95, 1] of the direct effect" + where);
      detail::require_exhibit(std::abs(c.clean.mlp[1]) <= 1e-9 * net.theta,
                              "gate is open on the clean run" + where);
    } else {
      detail::require_exhibit(std::abs(c.clean.mlp[1] + net.alpha * c.clean.attn[0]) <= 1e-6,
                              "clean erasure is not -alpha times the attention readout" + where);
      detail::require_exhibit(std::abs(c.ablated.mean.mlp[1]) <= 1e-6,
                              "erasure persists after ablation" + where);
      detail::require_exhibit(std::abs(c.record.delta_de_mlp[1] - net.alpha * de) <= 1e-6,
                              "erasure release is not alpha times the direct effect" + where);
    }
  }
}

/// Layer-1 attention writes s * d (s = per-prompt strength around theta read
/// from the embedding's carrier direction e). The layer-2 MLP gate reads
/// <z,e> - <z,d>, which is zero on a clean run, and writes it back along d, so
/// any replacement of the attention output is compensated in full.
inline ExhibitNet build_self_repair_net(const ModelConfig& config_template,
                                        double theta = kDefaultTheta, std::uint64_t d_seed = 0,
                                        int n_prompts = kDefaultExhibitPrompts) {
  ExhibitNet net = detail::exhibit_skeleton(Motif::self_repair, config_template, theta, d_seed,
                                            n_prompts);
  auto& mlp = net.params.layers[1];
  const Vector gate = net.carrier - net.direction;
  mlp.w_in.col(0) = gate;
  mlp.w_in.col(1) = -gate;
  mlp.w_out.row(0) = net.direction.transpose();
  mlp.w_out.row(1) = -net.direction.transpose();
  verify_exhibit(net);
  return net;
}

/// Layer-2 MLP writes -alpha * <z,d> * d through a ReLU pair, cancelling a
/// fixed fraction of whatever the attention layer contributed along d.
inline ExhibitNet build_erasure_net(const ModelConfig& config_template,
                                    double theta = kDefaultTheta, double alpha = kDefaultAlpha,
                                    std::uint64_t d_seed = 0,
                                    int n_prompts = kDefaultExhibitPrompts) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "erasure coefficient must lie in (0, 1]");
  }
  ExhibitNet net = detail::exhibit_skeleton(Motif::erasure, config_template, theta, d_seed,
                                            n_prompts);
  net.alpha = alpha;
  auto& mlp = net.params.layers[1];
  mlp.w_in.col(0) = net.direction;
  mlp.w_in.col(1) = -net.direction;
  mlp.w_out.row(0) = -alpha * net.direction.transpose();
  mlp.w_out.row(1) = alpha * net.direction.transpose();
  verify_exhibit(net);
  return net;
}

/// Reference exhibit template: d_model 64, 4 heads, d_mlp 128, V 100.
inline ModelConfig exhibit_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.norm_mode = NormMode::identity;
  c.block_order = BlockOrder::sequential;
  return c;
}

}  // namespace hydra

#endif  // HYDRA_MOTIFS_HPP_
