// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_INTERVENE_HPP_
#define HYDRA_INTERVENE_HPP_

// The do-operator on transformer nodes: ablation values, intervened forward
// evaluation, and total / direct / indirect effect estimators. All effects are
// measured on the centred logit of the clean maximum-likelihood token at the
// final position.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/error.hpp"
#include "hydra/linalg.hpp"
#include "hydra/model.hpp"

namespace hydra {

enum class AblationMethod { zero, mean, noise, resample };

constexpr std::string_view to_string(AblationMethod m) noexcept {
  switch (m) {
    case AblationMethod::zero: return "zero";
    case AblationMethod::mean: return "mean";
    case AblationMethod::noise: return "noise";
    case AblationMethod::resample: return "resample";
  }
  return "zero";
}

inline AblationMethod parse_ablation_method(std::string_view s) {
  if (s == "zero") return AblationMethod::zero;
  if (s == "mean") return AblationMethod::mean;
  if (s == "noise") return AblationMethod::noise;
  if (s == "resample") return AblationMethod::resample;
  throw Error(ErrorKind::ConfigError, "unknown ablation method '" + std::string(s) + "'");
}

inline constexpr int kDefaultPoolSize = 15;
inline constexpr double kNoiseSigmaMultiplier = 3.0;

struct AblationSpec {
  AblationMethod method = AblationMethod::resample;
  // Unset means 3x the empirical std of embedding entries over the pool.
  std::optional<double> noise_sigma;
  int pool_size = kDefaultPoolSize;
  std::uint64_t pool_seed = 0;
  std::uint64_t noise_seed = 0;

  bool needs_pool() const {
    return method == AblationMethod::mean || method == AblationMethod::resample ||
           (method == AblationMethod::noise && !noise_sigma);
  }

  void validate() const {
    if (noise_sigma && !(*noise_sigma > 0.0)) {
      throw Error(ErrorKind::InvalidAblation, "noise_sigma must be > 0");
    }
    if (needs_pool() && pool_size < 1) {
      throw Error(ErrorKind::InvalidAblation, "pool_size must be >= 1");
    }
  }
};

/// Prompts sampled from P(u) together with their cached clean traces.
class PatchPool {
 public:
  PatchPool() = default;

  static PatchPool build(const Parameters& params, std::vector<Tokens> prompts) {
    if (prompts.empty()) throw Error(ErrorKind::EmptyPool, "patch pool needs at least one prompt");
    PatchPool pool;
    pool.traces_.reserve(prompts.size());
    for (const auto& p : prompts) pool.traces_.push_back(forward(params, p));
    pool.prompts_ = std::move(prompts);
    return pool;
  }

  std::size_t size() const noexcept { return prompts_.size(); }
  bool empty() const noexcept { return prompts_.empty(); }
  const std::vector<Tokens>& prompts() const noexcept { return prompts_; }
  const ForwardTrace& trace(std::size_t i) const { return traces_.at(i); }

 private:
  std::vector<Tokens> prompts_;
  std::vector<ForwardTrace> traces_;
};

/// Samples `pool_size` distinct indices from [0, n) excluding `current`,
/// uniformly without replacement. Deterministic in (seed, current).
inline std::vector<std::size_t> sample_pool_indices(std::size_t n, std::size_t current,
                                                    int pool_size, std::uint64_t seed) {
  if (pool_size < 1 || n <= static_cast<std::size_t>(pool_size)) {
    throw Error(ErrorKind::PoolTooSmall, "need more than " + std::to_string(pool_size) +
                                             " records to build a pool, have " + std::to_string(n));
  }
  std::vector<std::size_t> candidates;
  candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != current) candidates.push_back(i);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(current)};
  std::mt19937_64 rng(seq);
  // Partial Fisher-Yates: the first pool_size slots are the sample, in draw order.
  for (std::size_t i = 0; i < static_cast<std::size_t>(pool_size); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(static_cast<std::size_t>(pool_size));
  return candidates;
}

/// Position in a source prompt whose value is patched into `target_position`
/// of a target prompt. Final positions align with final positions; other
/// positions keep their index, clipped to the source length.
inline int patch_source_position(int target_position, int target_length, int source_length) {
  if (target_position == target_length) return source_length;
  return std::min(target_position, source_length);
}

inline NodeRef aligned_node(const NodeRef& node, int target_length, int source_length) {
  return {node.layer, node.kind, patch_source_position(node.position, target_length, source_length)};
}

inline double resolve_noise_sigma(const AblationSpec& spec, const PatchPool* pool) {
  if (spec.noise_sigma) return *spec.noise_sigma;
  if (pool == nullptr || pool->empty()) {
    throw Error(ErrorKind::EmptyPool, "noise ablation without noise_sigma needs a patch pool");
  }
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pool->size(); ++i) {
    for (const Vector& e : pool->trace(i).embed) {
      sum += e.sum();
      sum_sq += e.squaredNorm();
      count += static_cast<std::size_t>(e.size());
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double var = std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
  const double sigma = kNoiseSigmaMultiplier * std::sqrt(var);
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidAblation, "pool embeddings have zero variance");
  return sigma;
}

/// Replacement value(s) for `node`. Resample yields one value per pool prompt;
/// every other method yields exactly one.
inline std::vector<Vector> ablation_value(const Parameters& params, const AblationSpec& spec,
                                          const NodeRef& node, const PatchPool* pool,
                                          const Tokens& context, std::uint64_t rng_seed) {
  spec.validate();
  const int length = static_cast<int>(context.size());
  detail::check_node(params.config, node, length);
  switch (spec.method) {
    case AblationMethod::zero:
      return {Vector::Zero(params.config.d_model)};
    case AblationMethod::mean:
    case AblationMethod::resample: {
      if (pool == nullptr || pool->empty()) {
        throw Error(ErrorKind::EmptyPool, std::string(to_string(spec.method)) +
                                              " ablation needs a nonempty patch pool");
      }
      std::vector<Vector> values;
      values.reserve(pool->size());
      for (std::size_t i = 0; i < pool->size(); ++i) {
        const auto& tr = pool->trace(i);
        values.push_back(tr.node(aligned_node(node, length, tr.length())));
      }
      if (spec.method == AblationMethod::resample) return values;
      Vector mean = Vector::Zero(params.config.d_model);
      for (const auto& v : values) mean += v;
      mean /= static_cast<double>(values.size());
      return {mean};
    }
    case AblationMethod::noise: {
      const double sigma = resolve_noise_sigma(spec, pool);
      const ForwardTrace clean = forward(params, context);
      std::mt19937_64 rng(rng_seed);
      std::normal_distribution<double> normal(0.0, sigma);
      std::vector<Vector> noisy = clean.embed;
      for (auto& e : noisy) {
        for (Eigen::Index i = 0; i < e.size(); ++i) e[i] += normal(rng);
      }
      detail::ForwardHooks hooks;
      hooks.embed_override = &noisy;
      return {detail::run_forward(params, context, hooks).node(node)};
    }
  }
  throw Error(ErrorKind::InvalidAblation, "unhandled ablation method");
}

struct Assignment {
  NodeRef node;
  Vector value;
};

/// Forward pass with each assigned node's output replaced by its value before
/// it enters the residual stream; everything downstream is recomputed.
inline ForwardTrace forward_do(const Parameters& params, const Tokens& tokens,
                               std::span<const Assignment> assignments) {
  detail::check_tokens(params, tokens);
  std::map<NodeRef, Vector> table;
  for (const auto& a : assignments) {
    detail::check_node(params.config, a.node, static_cast<int>(tokens.size()));
    if (a.value.size() != params.config.d_model) {
      throw Error(ErrorKind::ShapeMismatch, "assigned value for " + to_string(a.node) +
                                                " has wrong dimension");
    }
    if (!table.emplace(a.node, a.value).second) {
      throw Error(ErrorKind::ConflictingIntervention,
                  "node " + to_string(a.node) + " assigned more than once");
    }
  }
  detail::ForwardHooks hooks;
  hooks.assignments = &table;
  return detail::run_forward(params, tokens, hooks);
}

inline ForwardTrace forward_do(const Parameters& params, const Tokens& tokens,
                               std::initializer_list<Assignment> assignments) {
  return forward_do(params, tokens, std::span<const Assignment>(assignments.begin(), assignments.size()));
}

/// True when `other` is causally downstream of `node` (excluding `node`).
inline bool is_downstream(const NodeRef& node, const NodeRef& other, BlockOrder order) {
  if (other.position < node.position) return false;
  if (other.position > node.position) return other.layer > node.layer;
  if (other.layer > node.layer) return true;
  return other.layer == node.layer && node.kind == NodeKind::attn &&
         other.kind == NodeKind::mlp && order == BlockOrder::sequential;
}

namespace detail {

inline void require_final_position(const ForwardTrace& clean, const NodeRef& node) {
  if (node.position != clean.length()) {
    throw Error(ErrorKind::InvalidNode, "effect estimators read out at the final position; node " +
                                            to_string(node) + " is not final");
  }
}

inline double target_value(const ForwardTrace& tr, TokenId i) {
  return tr.final_centred_logits()[i];
}

}  // namespace detail

/// Y(do(Z=z')) - Y(do(Z=z)) on the centred target logit.
inline double total_effect(const Parameters& params, const ForwardTrace& clean, const NodeRef& node,
                           const Vector& value) {
  detail::require_final_position(clean, node);
  const TokenId i = clean.final_top_token();
  const auto ablated = forward_do(params, clean.tokens, {Assignment{node, value}});
  const auto restored = forward_do(params, clean.tokens, {Assignment{node, clean.node(node)}});
  return detail::target_value(ablated, i) - detail::target_value(restored, i);
}

inline double total_effect(const Parameters& params, const Tokens& tokens, const NodeRef& node,
                           const Vector& value) {
  return total_effect(params, forward(params, tokens), node, value);
}

/// Ablation impact: [centred(do) - centred(clean)]_i against the clean run.
inline double delta_ablate(const Parameters& params, const ForwardTrace& clean, const NodeRef& node,
                           const Vector& value) {
  detail::require_final_position(clean, node);
  const auto ablated = forward_do(params, clean.tokens, {Assignment{node, value}});
  const Vector diff = ablated.final_centred_logits() - clean.final_centred_logits();
  return diff[clean.final_top_token()];
}

/// Replay route for the direct effect: assign the node, clamp every other
/// layer output at every position to its clean value, and read the final
/// residual out with the clean sigma.
inline double direct_effect_replay(const Parameters& params, const ForwardTrace& clean,
                                   const NodeRef& node, const Vector& value) {
  detail::require_final_position(clean, node);
  std::vector<Assignment> clamps;
  clamps.reserve(static_cast<std::size_t>(2 * clean.n_layers() * clean.length()));
  for (int l = 1; l <= clean.n_layers(); ++l) {
    for (NodeKind kind : {NodeKind::attn, NodeKind::mlp}) {
      for (int t = 1; t <= clean.length(); ++t) {
        const NodeRef n{l, kind, t};
        clamps.push_back({n, n == node ? value : clean.node(n)});
      }
    }
  }
  const auto run = forward_do(params, clean.tokens, clamps);
  const int T = clean.length();
  const double sigma = clean.sigma_final.back();
  const TokenId i = clean.final_top_token();
  return unembed_frozen(run.final_resid(T), sigma, params).values[i] -
         unembed_frozen(clean.final_resid(T), sigma, params).values[i];
}

/// Closed form u(value)_i - u(clean value)_i with the clean sigma. In debug
/// builds the replay route is checked to agree within 1e-9.
inline double direct_effect(const Parameters& params, const ForwardTrace& clean, const NodeRef& node,
                            const Vector& value) {
  detail::require_final_position(clean, node);
  const double sigma = clean.sigma_final.back();
  const TokenId i = clean.final_top_token();
  const double de = unembed_frozen(value, sigma, params).values[i] -
                    unembed_frozen(clean.node(node), sigma, params).values[i];
#ifndef NDEBUG
  const double replay = direct_effect_replay(params, clean, node, value);
  if (std::abs(replay - de) > 1e-9) {
    throw Error(ErrorKind::VerificationFailed,
                "direct effect routes disagree at " + to_string(node) + ": " +
                    std::to_string(de) + " vs " + std::to_string(replay));
  }
#endif
  return de;
}

inline double direct_effect(const Parameters& params, const Tokens& tokens, const NodeRef& node,
                            const Vector& value) {
  return direct_effect(params, forward(params, tokens), node, value);
}

/// Restores the node to its clean value while every downstream layer output
/// (mediator) keeps the value it took in the ablated run.
inline double indirect_effect(const Parameters& params, const ForwardTrace& clean,
                              const NodeRef& node, const Vector& value) {
  detail::require_final_position(clean, node);
  const auto ablated = forward_do(params, clean.tokens, {Assignment{node, value}});
  std::vector<Assignment> clamps{{node, clean.node(node)}};
  for (int l = 1; l <= clean.n_layers(); ++l) {
    for (NodeKind kind : {NodeKind::attn, NodeKind::mlp}) {
      for (int t = 1; t <= clean.length(); ++t) {
        const NodeRef n{l, kind, t};
        if (is_downstream(node, n, params.config.block_order)) {
          clamps.push_back({n, ablated.node(n)});
        }
      }
    }
  }
  const auto restored = forward_do(params, clean.tokens, clamps);
  const TokenId i = clean.final_top_token();
  return detail::target_value(restored, i) - detail::target_value(clean, i);
}

inline double indirect_effect(const Parameters& params, const Tokens& tokens, const NodeRef& node,
                              const Vector& value) {
  return indirect_effect(params, forward(params, tokens), node, value);
}

struct EffectResult {
  double total = 0.0;
  double direct = 0.0;
  double indirect = 0.0;
  std::vector<double> per_patch;  // total effect of each ablation value
  TokenId target_token = 0;
  bool tied_argmax = false;
  std::string context_id;
};

/// Averages the three effects over the given ablation values (one per patch
/// for resample ablation).
inline EffectResult estimate_effects(const Parameters& params, const ForwardTrace& clean,
                                     const NodeRef& node, std::span<const Vector> values,
                                     std::string context_id = {}) {
  if (values.empty()) throw Error(ErrorKind::EmptyPool, "no ablation values");
  EffectResult r;
  r.target_token = clean.final_top_token();
  r.tied_argmax = argmax_is_tied(clean.logits.back());
  r.context_id = std::move(context_id);
  for (const auto& v : values) {
    const double te = total_effect(params, clean, node, v);
    r.per_patch.push_back(te);
    r.total += te;
    r.direct += direct_effect(params, clean, node, v);
    r.indirect += indirect_effect(params, clean, node, v);
  }
  const auto n = static_cast<double>(values.size());
  r.total /= n;
  r.direct /= n;
  r.indirect /= n;
  return r;
}

}  // namespace hydra

#endif  // HYDRA_INTERVENE_HPP_
