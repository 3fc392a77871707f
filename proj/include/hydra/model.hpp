// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_MODEL_HPP_
#define HYDRA_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/error.hpp"
#include "hydra/linalg.hpp"

namespace hydra {

// Sequential: the MLP reads z^{l-1} + a^l. Parallel: both sublayers read z^{l-1}.
enum class BlockOrder { sequential, parallel };
// Identity disables every normalization (gains are still applied) and pins
// the final-norm scale to 1, which makes the readout exactly linear.
enum class NormMode { rms, identity };
enum class NodeKind { attn, mlp };
enum class InitScheme { gaussian, orthogonal };

constexpr std::string_view to_string(BlockOrder v) noexcept {
  return v == BlockOrder::sequential ? "sequential" : "parallel";
}
constexpr std::string_view to_string(NormMode v) noexcept {
  return v == NormMode::rms ? "rms" : "identity";
}
constexpr std::string_view to_string(NodeKind v) noexcept {
  return v == NodeKind::attn ? "attn" : "mlp";
}
constexpr std::string_view to_string(InitScheme v) noexcept {
  return v == InitScheme::gaussian ? "gaussian" : "orthogonal";
}

inline BlockOrder parse_block_order(std::string_view s) {
  if (s == "sequential") return BlockOrder::sequential;
  if (s == "parallel") return BlockOrder::parallel;
  throw Error(ErrorKind::ConfigError, "unknown block_order '" + std::string(s) + "'");
}
inline NormMode parse_norm_mode(std::string_view s) {
  if (s == "rms") return NormMode::rms;
  if (s == "identity") return NormMode::identity;
  throw Error(ErrorKind::ConfigError, "unknown norm_mode '" + std::string(s) + "'");
}
inline NodeKind parse_node_kind(std::string_view s) {
  if (s == "attn") return NodeKind::attn;
  if (s == "mlp") return NodeKind::mlp;
  throw Error(ErrorKind::ConfigError, "unknown node kind '" + std::string(s) + "'");
}
inline InitScheme parse_init_scheme(std::string_view s) {
  if (s == "gaussian") return InitScheme::gaussian;
  if (s == "orthogonal") return InitScheme::orthogonal;
  throw Error(ErrorKind::ConfigError, "unknown init scheme '" + std::string(s) + "'");
}

struct ModelConfig {
  int n_layers = 4;
  int d_model = 64;
  int n_heads = 4;
  int d_head = 16;
  int d_mlp = 128;
  int vocab_size = 100;
  int max_seq_len = 16;
  BlockOrder block_order = BlockOrder::sequential;
  NormMode norm_mode = NormMode::rms;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw Error(ErrorKind::InvalidConfig, what);
    };
    require(n_layers >= 1, "n_layers must be >= 1");
    require(d_model >= 1, "d_model must be >= 1");
    require(n_heads >= 1, "n_heads must be >= 1");
    require(d_head >= 1, "d_head must be >= 1");
    require(n_heads * d_head == d_model, "n_heads * d_head must equal d_model");
    require(d_mlp >= 1, "d_mlp must be >= 1");
    require(vocab_size >= 1, "vocab_size must be >= 1");
    require(max_seq_len >= 1, "max_seq_len must be >= 1");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerParams {
  Matrix w_q, w_k, w_v, w_o;  // d_model x d_model, heads are column blocks
  Vector attn_gain;           // pre-attention norm gain
  Vector mlp_gain;            // pre-MLP norm gain
  Matrix w_in;                // d_model x d_mlp
  Matrix w_out;               // d_mlp x d_model
};

/// Structural functions of the model. Token and learned absolute position
/// embeddings are summed to form the layer-0 residual.
struct Parameters {
  ModelConfig config;
  Matrix embed;      // V x d_model
  Matrix pos_embed;  // max_seq_len x d_model
  std::vector<LayerParams> layers;
  Vector final_gain;  // d_model
  Matrix unembed;     // d_model x V

  void validate() const {
    config.validate();
    const Eigen::Index d = config.d_model;
    auto shape = [](const Matrix& m, Eigen::Index r, Eigen::Index c, const std::string& name) {
      if (m.rows() != r || m.cols() != c) {
        throw Error(ErrorKind::ShapeMismatch,
                    name + " has shape " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" +
                        std::to_string(c));
      }
      if (!m.allFinite()) throw Error(ErrorKind::ShapeMismatch, name + " has non-finite entries");
    };
    auto vshape = [](const Vector& v, Eigen::Index n, const std::string& name) {
      if (v.size() != n) {
        throw Error(ErrorKind::ShapeMismatch, name + " has length " + std::to_string(v.size()) +
                                                  ", expected " + std::to_string(n));
      }
      if (!v.allFinite()) throw Error(ErrorKind::ShapeMismatch, name + " has non-finite entries");
    };
    shape(embed, config.vocab_size, d, "embed");
    shape(pos_embed, config.max_seq_len, d, "pos_embed");
    if (static_cast<int>(layers.size()) != config.n_layers) {
      throw Error(ErrorKind::ShapeMismatch, "layer count does not match n_layers");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& p = layers[l];
      const std::string prefix = "blocks." + std::to_string(l) + ".";
      shape(p.w_q, d, d, prefix + "w_q");
      shape(p.w_k, d, d, prefix + "w_k");
      shape(p.w_v, d, d, prefix + "w_v");
      shape(p.w_o, d, d, prefix + "w_o");
      vshape(p.attn_gain, d, prefix + "attn_gain");
      vshape(p.mlp_gain, d, prefix + "mlp_gain");
      shape(p.w_in, d, config.d_mlp, prefix + "w_in");
      shape(p.w_out, config.d_mlp, d, prefix + "w_out");
    }
    vshape(final_gain, d, "final_gain");
    shape(unembed, d, config.vocab_size, "unembed");
  }
};

/// A node of the compute graph. Layer and position are 1-based.
struct NodeRef {
  int layer = 1;
  NodeKind kind = NodeKind::attn;
  int position = 1;

  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

inline std::string to_string(const NodeRef& n) {
  return std::string(to_string(n.kind)) + "@L" + std::to_string(n.layer) + "/t" +
         std::to_string(n.position);
}

/// Every endogenous value of one forward evaluation. Containers are 0-based:
/// attn[l-1][t-1] holds a^l_t and resid[l][t-1] holds z^l_t with resid[0]
/// equal to the embedding.
struct ForwardTrace {
  Tokens tokens;
  std::vector<Vector> embed;
  std::vector<std::vector<Vector>> attn;
  std::vector<std::vector<Vector>> mlp;
  std::vector<std::vector<Vector>> resid;
  std::vector<double> sigma_final;
  std::vector<Vector> logits;
  std::vector<Vector> centred_logits;
  std::vector<TokenId> top_token;

  int length() const { return static_cast<int>(tokens.size()); }
  int n_layers() const { return static_cast<int>(attn.size()); }

  const Vector& node(const NodeRef& n) const {
    const auto& table = n.kind == NodeKind::attn ? attn : mlp;
    return table.at(static_cast<std::size_t>(n.layer - 1)).at(static_cast<std::size_t>(n.position - 1));
  }
  const Vector& final_resid(int position) const {
    return resid.back().at(static_cast<std::size_t>(position - 1));
  }
  const Vector& final_centred_logits() const { return centred_logits.back(); }
  TokenId final_top_token() const { return top_token.back(); }
};

struct ReadoutVector {
  Vector values;
  bool centred = false;
};

/// sqrt of the mean of squares.
inline double rms(const Vector& z) {
  return std::sqrt(z.squaredNorm() / static_cast<double>(z.size()));
}

inline Vector rms_norm(const Vector& z, const Vector& gain, NormMode mode = NormMode::rms) {
  if (mode == NormMode::identity) return z.cwiseProduct(gain);
  const double sigma = rms(z);
  if (!(sigma > 0.0)) throw Error(ErrorKind::DegenerateNorm, "rms_norm of an all-zero vector");
  return (z / sigma).cwiseProduct(gain);
}

namespace detail {

inline void check_node(const ModelConfig& cfg, const NodeRef& n, int length) {
  if (n.layer < 1 || n.layer > cfg.n_layers || n.position < 1 || n.position > length) {
    throw Error(ErrorKind::InvalidNode, "node " + to_string(n) + " out of bounds (L=" +
                                            std::to_string(cfg.n_layers) +
                                            ", t=" + std::to_string(length) + ")");
  }
}

// (v / sigma) * G, shared by the full and the frozen readouts.
inline Vector scaled_for_unembed(const Vector& v, double sigma, const Vector& gain) {
  return (v / sigma).cwiseProduct(gain);
}

inline double final_sigma(const Vector& z, NormMode mode) {
  if (mode == NormMode::identity) return 1.0;
  const double sigma = rms(z);
  if (!(sigma > 0.0)) throw Error(ErrorKind::DegenerateNorm, "final residual is all zero");
  return sigma;
}

struct KeyValue {
  Vector key;
  Vector value;
};

inline KeyValue project_key_value(const Vector& normed, const LayerParams& p) {
  return {p.w_k.transpose() * normed, p.w_v.transpose() * normed};
}

// Multi-head causal attention for one query over kv[0..count).
inline Vector attend(const Vector& query, std::span<const KeyValue> kv, const LayerParams& p,
                     const ModelConfig& cfg) {
  const Eigen::Index dh = cfg.d_head;
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_head));
  Vector heads = Vector::Zero(cfg.d_model);
  std::vector<double> weights(kv.size());
  for (int h = 0; h < cfg.n_heads; ++h) {
    const Eigen::Index off = h * dh;
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < kv.size(); ++j) {
      weights[j] = query.segment(off, dh).dot(kv[j].key.segment(off, dh)) * scale;
      max_score = std::max(max_score, weights[j]);
    }
    double total = 0.0;
    for (double& w : weights) {
      w = std::exp(w - max_score);
      total += w;
    }
    for (std::size_t j = 0; j < kv.size(); ++j) {
      heads.segment(off, dh) += (weights[j] / total) * kv[j].value.segment(off, dh);
    }
  }
  return p.w_o.transpose() * heads;
}

struct ForwardHooks {
  // Replacement values for node outputs, applied before they enter the residual.
  const std::map<NodeRef, Vector>* assignments = nullptr;
  // Replacement for the layer-0 residual at every position.
  const std::vector<Vector>* embed_override = nullptr;
};

}  // namespace detail

/// Output of the attention sublayer at the last position of `prefix`. Each
/// prefix entry is a residual vector z^{l-1}_s; pre-norm is applied here.
inline Vector attention_layer(std::span<const Vector> prefix, const LayerParams& p,
                              const ModelConfig& cfg) {
  if (prefix.empty()) throw Error(ErrorKind::SequenceTooLong, "empty attention prefix");
  if (static_cast<int>(prefix.size()) > cfg.max_seq_len) {
    throw Error(ErrorKind::SequenceTooLong,
                "prefix of length " + std::to_string(prefix.size()) + " exceeds max_seq_len " +
                    std::to_string(cfg.max_seq_len));
  }
  std::vector<detail::KeyValue> kv;
  kv.reserve(prefix.size());
  Vector query;
  for (std::size_t s = 0; s < prefix.size(); ++s) {
    const Vector normed = rms_norm(prefix[s], p.attn_gain, cfg.norm_mode);
    kv.push_back(detail::project_key_value(normed, p));
    if (s + 1 == prefix.size()) query = p.w_q.transpose() * normed;
  }
  return detail::attend(query, kv, p, cfg);
}

/// Pre-norm ReLU MLP.
inline Vector mlp_layer(const Vector& x, const LayerParams& p, const ModelConfig& cfg) {
  if (!x.allFinite()) throw Error(ErrorKind::DegenerateNorm, "non-finite MLP input");
  const Vector normed = rms_norm(x, p.mlp_gain, cfg.norm_mode);
  const Vector hidden = (p.w_in.transpose() * normed).cwiseMax(0.0);
  return p.w_out.transpose() * hidden;
}

/// centred((v / sigma) * G * W_U). Linear in v for fixed sigma.
inline ReadoutVector unembed_frozen(const Vector& v, double sigma, const Parameters& params) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::DegenerateNorm, "frozen sigma must be positive");
  const Vector raw =
      params.unembed.transpose() * detail::scaled_for_unembed(v, sigma, params.final_gain);
  return {centred(raw), true};
}

namespace detail {

inline void check_tokens(const Parameters& params, const Tokens& tokens) {
  const auto& cfg = params.config;
  if (tokens.empty()) throw Error(ErrorKind::SequenceTooLong, "empty token sequence");
  if (static_cast<int>(tokens.size()) > cfg.max_seq_len) {
    throw Error(ErrorKind::SequenceTooLong, "sequence of length " + std::to_string(tokens.size()) +
                                                " exceeds max_seq_len " +
                                                std::to_string(cfg.max_seq_len));
  }
  for (TokenId id : tokens) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw Error(ErrorKind::BadToken, "token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

inline ForwardTrace run_forward(const Parameters& params, const Tokens& tokens,
                                const ForwardHooks& hooks) {
  check_tokens(params, tokens);
  const auto& cfg = params.config;
  const int T = static_cast<int>(tokens.size());
  const auto L = static_cast<std::size_t>(cfg.n_layers);

  auto lookup = [&](int layer, NodeKind kind, int pos) -> const Vector* {
    if (hooks.assignments == nullptr) return nullptr;
    auto it = hooks.assignments->find(NodeRef{layer, kind, pos});
    return it == hooks.assignments->end() ? nullptr : &it->second;
  };

  ForwardTrace tr;
  tr.tokens = tokens;
  tr.embed.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    if (hooks.embed_override != nullptr) {
      tr.embed[static_cast<std::size_t>(t)] = hooks.embed_override->at(static_cast<std::size_t>(t));
    } else {
      tr.embed[static_cast<std::size_t>(t)] =
          params.embed.row(tokens[static_cast<std::size_t>(t)]).transpose() +
          params.pos_embed.row(t).transpose();
    }
  }
  tr.attn.assign(L, std::vector<Vector>(static_cast<std::size_t>(T)));
  tr.mlp.assign(L, std::vector<Vector>(static_cast<std::size_t>(T)));
  tr.resid.assign(L + 1, std::vector<Vector>(static_cast<std::size_t>(T)));
  tr.resid[0] = tr.embed;

  std::vector<KeyValue> kv(static_cast<std::size_t>(T));
  std::vector<Vector> queries(static_cast<std::size_t>(T));
  for (std::size_t l = 0; l < L; ++l) {
    const LayerParams& p = params.layers[l];
    const auto& prev = tr.resid[l];
    for (int t = 0; t < T; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      const Vector normed = rms_norm(prev[ut], p.attn_gain, cfg.norm_mode);
      kv[ut] = project_key_value(normed, p);
      queries[ut] = p.w_q.transpose() * normed;
    }
    for (int t = 0; t < T; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      const int layer = static_cast<int>(l) + 1;
      if (const Vector* v = lookup(layer, NodeKind::attn, t + 1)) {
        tr.attn[l][ut] = *v;
      } else {
        tr.attn[l][ut] = attend(queries[ut], std::span<const KeyValue>(kv.data(), ut + 1), p, cfg);
      }
      if (const Vector* v = lookup(layer, NodeKind::mlp, t + 1)) {
        tr.mlp[l][ut] = *v;
      } else if (cfg.block_order == BlockOrder::sequential) {
        tr.mlp[l][ut] = mlp_layer(prev[ut] + tr.attn[l][ut], p, cfg);
      } else {
        tr.mlp[l][ut] = mlp_layer(prev[ut], p, cfg);
      }
      tr.resid[l + 1][ut] = prev[ut] + tr.attn[l][ut] + tr.mlp[l][ut];
    }
  }

  tr.sigma_final.resize(static_cast<std::size_t>(T));
  tr.logits.resize(static_cast<std::size_t>(T));
  tr.centred_logits.resize(static_cast<std::size_t>(T));
  tr.top_token.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const Vector& z = tr.resid[L][ut];
    const double sigma = final_sigma(z, cfg.norm_mode);
    tr.sigma_final[ut] = sigma;
    tr.logits[ut] = params.unembed.transpose() * scaled_for_unembed(z, sigma, params.final_gain);
    tr.centred_logits[ut] = centred(tr.logits[ut]);
    tr.top_token[ut] = static_cast<TokenId>(argmax(tr.logits[ut]));
  }
  return tr;
}

}  // namespace detail

/// Clean forward evaluation with the full residual-stream trace.
inline ForwardTrace forward(const Parameters& params, const Tokens& tokens) {
  return detail::run_forward(params, tokens, {});
}

namespace detail {

inline Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng) * scale;
  }
  return m;
}

// Orthonormal columns when rows >= cols, orthonormal rows otherwise.
inline Matrix orthogonal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index tall = std::max(rows, cols);
  const Eigen::Index wide = std::min(rows, cols);
  Matrix g(tall, wide);
  for (Eigen::Index r = 0; r < tall; ++r) {
    for (Eigen::Index c = 0; c < wide; ++c) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(tall, wide);
  // Fix the sign ambiguity so the result is a deterministic function of g.
  const Matrix rr = qr.matrixQR().topRows(wide).template triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < wide; ++c) {
    if (rr(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  if (rows >= cols) return q;
  return q.transpose();
}

inline Vector gain_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = 1.0 + 0.1 * normal(rng);
  return g;
}

}  // namespace detail

/// Reproducible pseudo-random weights. Gaussian entries are scaled by
/// 1/sqrt(fan-in) where fan-in is the input (row) dimension of the matrix.
inline Parameters gen_params(const ModelConfig& config, std::uint64_t seed,
                             InitScheme scheme = InitScheme::gaussian) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto mat = [&](Eigen::Index r, Eigen::Index c) {
    return scheme == InitScheme::gaussian ? detail::gaussian_matrix(rng, r, c)
                                          : detail::orthogonal_matrix(rng, r, c);
  };
  const Eigen::Index d = config.d_model;
  Parameters p;
  p.config = config;
  p.embed = mat(config.vocab_size, d);
  p.pos_embed = mat(config.max_seq_len, d);
  p.layers.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& layer : p.layers) {
    layer.w_q = mat(d, d);
    layer.w_k = mat(d, d);
    layer.w_v = mat(d, d);
    layer.w_o = mat(d, d);
    layer.attn_gain = detail::gain_vector(rng, d);
    layer.mlp_gain = detail::gain_vector(rng, d);
    layer.w_in = mat(d, config.d_mlp);
    layer.w_out = mat(config.d_mlp, d);
  }
  p.final_gain = detail::gain_vector(rng, d);
  p.unembed = mat(d, config.vocab_size);
  return p;
}

}  // namespace hydra

#endif  // HYDRA_MODEL_HPP_
