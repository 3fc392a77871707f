// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_EFFECTS_HPP_
#define HYDRA_EFFECTS_HPP_

// Per-layer readout profiles before and after an ablation, the compensatory
// effect that downstream layers mount in response, and dataset sweeps that
// aggregate both into per-layer statistics.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hydra/error.hpp"
#include "hydra/intervene.hpp"
#include "hydra/model.hpp"
#include "hydra/stats.hpp"

namespace hydra {

/// Which final-norm scale the ablated-run readouts are divided by. `clean`
/// keeps readouts of layers upstream of the ablation identical to the clean
/// profile; `ablated` makes each ablated profile additive to its own logits.
enum class SigmaPolicy { clean, ablated };

constexpr std::string_view to_string(SigmaPolicy p) noexcept {
  return p == SigmaPolicy::clean ? "clean" : "ablated";
}

inline SigmaPolicy parse_sigma_policy(std::string_view s) {
  if (s == "clean") return SigmaPolicy::clean;
  if (s == "ablated") return SigmaPolicy::ablated;
  throw Error(ErrorKind::ConfigError, "unknown sigma policy '" + std::string(s) + "'");
}

struct LayerProfile {
  std::string context_id;
  TokenId target_token = 0;
  bool tied_argmax = false;
  double sigma = 1.0;
  double embed = 0.0;
  std::vector<double> attn;  // index l-1
  std::vector<double> mlp;
  double target_logit = 0.0;  // centred final logit of the target token
};

namespace detail {

inline void fill_readouts(const Parameters& params, const ForwardTrace& run, double sigma,
                          TokenId target, double& embed, std::vector<double>& attn,
                          std::vector<double>& mlp) {
  const int T = run.length();
  const auto L = static_cast<std::size_t>(run.n_layers());
  embed = unembed_frozen(run.embed[static_cast<std::size_t>(T - 1)], sigma, params).values[target];
  attn.assign(L, 0.0);
  mlp.assign(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    const int layer = static_cast<int>(l) + 1;
    attn[l] = unembed_frozen(run.node({layer, NodeKind::attn, T}), sigma, params).values[target];
    mlp[l] = unembed_frozen(run.node({layer, NodeKind::mlp, T}), sigma, params).values[target];
  }
}

}  // namespace detail

/// Frozen-sigma readout of every layer output at the final position onto the
/// clean maximum-likelihood token.
inline LayerProfile layer_profile(const Parameters& params, const ForwardTrace& clean,
                                  std::string context_id = {}) {
  LayerProfile p;
  p.context_id = std::move(context_id);
  p.target_token = clean.final_top_token();
  p.tied_argmax = argmax_is_tied(clean.logits.back());
  p.sigma = clean.sigma_final.back();
  p.target_logit = clean.final_centred_logits()[p.target_token];
  detail::fill_readouts(params, clean, p.sigma, p.target_token, p.embed, p.attn, p.mlp);
  return p;
}

struct AblatedProfile {
  NodeRef node;
  std::optional<int> patch_index;  // empty for the mean over patches
  std::string context_id;
  TokenId target_token = 0;
  double sigma = 1.0;
  double embed = 0.0;
  std::vector<double> attn;
  std::vector<double> mlp;
  double total_effect = 0.0;
};

struct AblationProfiles {
  AblatedProfile mean;
  std::vector<AblatedProfile> patches;
};

/// Re-reads every layer after ablating `node` with each of `values`. The
/// target token stays the clean argmax.
inline AblationProfiles ablated_profile(const Parameters& params, const ForwardTrace& clean,
                                        const NodeRef& node, std::span<const Vector> values,
                                        const std::string& context_id = {},
                                        SigmaPolicy policy = SigmaPolicy::clean) {
  if (values.empty()) throw Error(ErrorKind::EmptyPool, "no ablation values");
  detail::require_final_position(clean, node);
  const TokenId target = clean.final_top_token();
  const double clean_target = clean.final_centred_logits()[target];
  AblationProfiles out;
  const auto L = static_cast<std::size_t>(clean.n_layers());
  out.mean.node = node;
  out.mean.context_id = context_id;
  out.mean.target_token = target;
  out.mean.attn.assign(L, 0.0);
  out.mean.mlp.assign(L, 0.0);
  double sigma_sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto run = forward_do(params, clean.tokens, {Assignment{node, values[k]}});
    AblatedProfile p;
    p.node = node;
    p.patch_index = static_cast<int>(k);
    p.context_id = context_id;
    p.target_token = target;
    p.sigma = policy == SigmaPolicy::clean ? clean.sigma_final.back() : run.sigma_final.back();
    detail::fill_readouts(params, run, p.sigma, target, p.embed, p.attn, p.mlp);
    p.total_effect = run.final_centred_logits()[target] - clean_target;
    out.mean.embed += p.embed;
    for (std::size_t l = 0; l < L; ++l) {
      out.mean.attn[l] += p.attn[l];
      out.mean.mlp[l] += p.mlp[l];
    }
    out.mean.total_effect += p.total_effect;
    sigma_sum += p.sigma;
    out.patches.push_back(std::move(p));
  }
  const auto n = static_cast<double>(values.size());
  out.mean.embed /= n;
  for (std::size_t l = 0; l < L; ++l) {
    out.mean.attn[l] /= n;
    out.mean.mlp[l] /= n;
  }
  out.mean.total_effect /= n;
  out.mean.sigma = sigma_sum / n;
  return out;
}

inline AblationProfiles ablated_profile(const Parameters& params, const ForwardTrace& clean,
                                        const NodeRef& node, const AblationSpec& spec,
                                        const PatchPool* pool, std::uint64_t rng_seed,
                                        const std::string& context_id = {},
                                        SigmaPolicy policy = SigmaPolicy::clean) {
  const auto values = ablation_value(params, spec, node, pool, clean.tokens, rng_seed);
  return ablated_profile(params, clean, node, values, context_id, policy);
}

struct CompensationRecord {
  std::string context_id;
  NodeRef node;
  std::optional<int> patch_index;  // empty for the patch mean
  double de = 0.0;  // clean readout of the ablated layer
  double te = 0.0;  // total effect of the ablation
  double ce = 0.0;
  std::vector<double> delta_de_attn;
  std::vector<double> delta_de_mlp;
};

/// Sum of downstream changes in direct effect. Attention terms start one layer
/// past the ablation; MLP terms start at the ablated layer for an attention
/// ablation (the MLP follows it) and one layer past it for an MLP ablation.
inline CompensationRecord compensatory_effect(const LayerProfile& clean,
                                              const AblatedProfile& ablated) {
  if (clean.context_id != ablated.context_id || clean.target_token != ablated.target_token ||
      clean.attn.size() != ablated.attn.size()) {
    throw Error(ErrorKind::ContextMismatch, "clean profile '" + clean.context_id +
                                                "' does not match ablated profile '" +
                                                ablated.context_id + "'");
  }
  const std::size_t L = clean.attn.size();
  const int m = ablated.node.layer;
  CompensationRecord r;
  r.context_id = clean.context_id;
  r.node = ablated.node;
  r.patch_index = ablated.patch_index;
  r.te = ablated.total_effect;
  r.delta_de_attn.resize(L);
  r.delta_de_mlp.resize(L);
  for (std::size_t i = 0; i < L; ++i) {
    r.delta_de_attn[i] = ablated.attn[i] - clean.attn[i];
    r.delta_de_mlp[i] = ablated.mlp[i] - clean.mlp[i];
  }
  const auto idx = static_cast<std::size_t>(m - 1);
  r.de = ablated.node.kind == NodeKind::attn ? clean.attn.at(idx) : clean.mlp.at(idx);
  const int mlp_start = ablated.node.kind == NodeKind::attn ? m : m + 1;
  for (int l = m + 1; l <= static_cast<int>(L); ++l) {
    r.ce += r.delta_de_attn[static_cast<std::size_t>(l - 1)];
  }
  for (int l = mlp_start; l <= static_cast<int>(L); ++l) {
    r.ce += r.delta_de_mlp[static_cast<std::size_t>(l - 1)];
  }
  return r;
}

/// Regression of CE on DE over one layer's records.
inline stats::Regression regress_ce_on_de(std::span<const CompensationRecord> records) {
  std::vector<double> de, ce;
  de.reserve(records.size());
  ce.reserve(records.size());
  for (const auto& r : records) {
    de.push_back(r.de);
    ce.push_back(r.ce);
  }
  return stats::ols(de, ce);
}

struct SweepPrompt {
  std::string context_id;
  Tokens tokens;
};

struct SweepOptions {
  AblationSpec spec;
  SigmaPolicy sigma_policy = SigmaPolicy::clean;
  unsigned threads = 1;
};

struct SkippedPrompt {
  std::string context_id;
  std::string reason;
};

struct LayerStats {
  int layer = 1;
  std::optional<double> corr_unembed_ablate;
  std::optional<double> frac_unembed_gt_ablate;
  std::optional<stats::Regression> regression;
  std::size_t n_prompts = 0;
};

struct SweepReport {
  std::vector<LayerStats> attn;
  std::vector<LayerStats> mlp;
  std::size_t prompt_count = 0;
  std::vector<SkippedPrompt> skipped;
};

struct SweepResult {
  std::vector<CompensationRecord> records;
  std::vector<SkippedPrompt> skipped;
  SweepReport report;
};

/// Per-layer aggregates over the patch-mean records. The ablation measure is
/// compared as the logit drop -TE so both measures share a sign convention.
inline SweepReport aggregate(std::span<const CompensationRecord> records, int n_layers,
                             std::vector<SkippedPrompt> skipped = {}) {
  SweepReport rep;
  rep.skipped = std::move(skipped);
  std::vector<std::string> contexts;
  for (const auto& r : records) {
    if (!r.patch_index && std::find(contexts.begin(), contexts.end(), r.context_id) == contexts.end()) {
      contexts.push_back(r.context_id);
    }
  }
  rep.prompt_count = contexts.size();
  for (NodeKind kind : {NodeKind::attn, NodeKind::mlp}) {
    auto& table = kind == NodeKind::attn ? rep.attn : rep.mlp;
    for (int l = 1; l <= n_layers; ++l) {
      std::vector<CompensationRecord> layer_records;
      for (const auto& r : records) {
        if (!r.patch_index && r.node.kind == kind && r.node.layer == l) layer_records.push_back(r);
      }
      LayerStats s;
      s.layer = l;
      s.n_prompts = layer_records.size();
      std::vector<double> unembed, drop;
      std::size_t greater = 0;
      for (const auto& r : layer_records) {
        unembed.push_back(r.de);
        drop.push_back(-r.te);
        if (r.de > -r.te) ++greater;
      }
      s.corr_unembed_ablate = stats::pearson(unembed, drop);
      if (!layer_records.empty()) {
        s.frac_unembed_gt_ablate =
            static_cast<double>(greater) / static_cast<double>(layer_records.size());
      }
      try {
        s.regression = regress_ce_on_de(layer_records);
      } catch (const Error&) {
        s.regression.reset();
      }
      table.push_back(s);
    }
  }
  return rep;
}

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  std::mt19937_64 rng(seq);
  return rng();
}

struct PromptOutcome {
  std::vector<CompensationRecord> records;
  std::optional<SkippedPrompt> skipped;
};

inline PromptOutcome sweep_one(const Parameters& params, std::span<const SweepPrompt> dataset,
                               std::size_t index, const SweepOptions& opt) {
  PromptOutcome out;
  const auto& prompt = dataset[index];
  try {
    const ForwardTrace clean = forward(params, prompt.tokens);
    if (argmax_is_tied(clean.logits.back())) {
      out.skipped = SkippedPrompt{prompt.context_id, "tied argmax"};
      return out;
    }
    std::optional<PatchPool> pool;
    if (opt.spec.needs_pool()) {
      const auto idx =
          sample_pool_indices(dataset.size(), index, opt.spec.pool_size, opt.spec.pool_seed);
      std::vector<Tokens> prompts;
      prompts.reserve(idx.size());
      for (auto i : idx) prompts.push_back(dataset[i].tokens);
      pool = PatchPool::build(params, std::move(prompts));
    }
    const LayerProfile profile = layer_profile(params, clean, prompt.context_id);
    const int T = clean.length();
    for (int l = 1; l <= params.config.n_layers; ++l) {
      for (NodeKind kind : {NodeKind::attn, NodeKind::mlp}) {
        const NodeRef node{l, kind, T};
        const auto seed = derive_seed(opt.spec.noise_seed, index, static_cast<std::uint64_t>(l),
                                      kind == NodeKind::attn ? 0U : 1U);
        const auto profiles = ablated_profile(params, clean, node, opt.spec,
                                              pool ? &*pool : nullptr, seed, prompt.context_id,
                                              opt.sigma_policy);
        out.records.push_back(compensatory_effect(profile, profiles.mean));
        if (opt.spec.method == AblationMethod::resample) {
          for (const auto& p : profiles.patches) out.records.push_back(compensatory_effect(profile, p));
        }
      }
    }
  } catch (const Error& e) {
    out.records.clear();
    out.skipped = SkippedPrompt{prompt.context_id, e.what()};
  }
  return out;
}

}  // namespace detail

/// Ablates every attention and MLP layer at the final position of every
/// prompt. Prompts may be evaluated concurrently; results are assembled in
/// prompt order so the output does not depend on scheduling.
inline SweepResult sweep(const Parameters& params, std::span<const SweepPrompt> dataset,
                         const SweepOptions& opt) {
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "sweep needs at least one prompt");
  opt.spec.validate();
  std::vector<detail::PromptOutcome> outcomes(dataset.size());
  const unsigned threads = std::max(1U, std::min<unsigned>(opt.threads,
                                                           static_cast<unsigned>(dataset.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      outcomes[i] = detail::sweep_one(params, dataset, i, opt);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < dataset.size(); i = next++) {
          outcomes[i] = detail::sweep_one(params, dataset, i, opt);
        }
      });
    }
  }
  SweepResult result;
  for (auto& o : outcomes) {
    if (o.skipped) result.skipped.push_back(*o.skipped);
    for (auto& r : o.records) result.records.push_back(std::move(r));
  }
  result.report = aggregate(result.records, params.config.n_layers, result.skipped);
  return result;
}

}  // namespace hydra

#endif  // HYDRA_EFFECTS_HPP_
