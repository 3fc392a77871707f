// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hydra/cli.hpp"
#include "hydra/hydra.hpp"
#include "oracle.hpp"

using namespace hydra;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

constexpr int kCases = 50;

Tokens random_tokens(std::mt19937_64& rng, int vocab, int n) {
  std::uniform_int_distribution<TokenId> tok(0, vocab - 1);
  Tokens t(static_cast<std::size_t>(n));
  for (auto& x : t) x = tok(rng);
  return t;
}

struct Case {
  Parameters params;
  ForwardTrace clean;
  NodeRef node;
};

// Random reference-size net (all four block/norm modes) with a prompt and a
// final-position node.
Case random_case(std::uint64_t seed, std::optional<NormMode> norm = std::nullopt) {
  std::mt19937_64 rng(seed * 7919 + 13);
  ModelConfig cfg;
  cfg.block_order = seed % 2 ? BlockOrder::parallel : BlockOrder::sequential;
  cfg.norm_mode = norm ? *norm : ((seed / 2) % 2 ? NormMode::identity : NormMode::rms);
  Case c{gen_params(cfg, seed), {}, {}};
  const int len = std::uniform_int_distribution<int>(1, cfg.max_seq_len)(rng);
  c.clean = forward(c.params, random_tokens(rng, cfg.vocab_size, len));
  c.node = {std::uniform_int_distribution<int>(1, cfg.n_layers)(rng),
            seed % 3 ? NodeKind::attn : NodeKind::mlp, len};
  return c;
}

Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome unrolled_additivity() {
  double worst = 0.0;
  for (int s = 0; s < kCases; ++s) {
    const auto c = random_case(static_cast<std::uint64_t>(s));
    const int T = c.clean.length();
    const double sigma = c.clean.sigma_final.back();
    Vector sum = unembed_frozen(c.clean.embed.back(), sigma, c.params).values;
    for (int l = 1; l <= c.clean.n_layers(); ++l) {
      sum += unembed_frozen(c.clean.node({l, NodeKind::attn, T}), sigma, c.params).values;
      sum += unembed_frozen(c.clean.node({l, NodeKind::mlp, T}), sigma, c.params).values;
    }
    worst = std::max(worst, (sum - c.clean.final_centred_logits()).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, fmt("max |logit - sum of readouts| = %.3g", worst)};
}

Outcome te_equals_delta_ablate() {
  double worst = 0.0, worst_oracle = 0.0;
  for (int s = 0; s < kCases; ++s) {
    const auto c = random_case(static_cast<std::uint64_t>(100 + s));
    std::mt19937_64 rng(static_cast<std::uint64_t>(s));
    const Vector v = random_vector(rng, c.params.config.d_model);
    const double te = total_effect(c.params, c.clean, c.node, v);
    worst = std::max(worst, std::abs(te - delta_ablate(c.params, c.clean, c.node, v)));
    // Same quantity through the naive reference forward pass.
    const auto i = static_cast<std::size_t>(c.clean.final_top_token());
    const auto base = oracle::forward(c.params, c.clean.tokens);
    const auto spliced = oracle::forward(
        c.params, c.clean.tokens,
        {{{c.node.layer, c.node.kind == NodeKind::attn ? 0 : 1, c.node.position}, oracle::to_vec(v)}});
    worst_oracle = std::max(worst_oracle, std::abs(te - (spliced.centred.back()[i] - base.centred.back()[i])));
  }
  return {worst <= 1e-12 && worst_oracle <= 1e-12,
          fmt("max |TE - delta_ablate| = %.3g", worst) + fmt(", vs reference pass %.3g", worst_oracle)};
}

Outcome direct_effect_paths() {
  double worst = 0.0;
  int checked = 0;
  for (int s = 0; s < kCases; ++s) {
    const auto c = random_case(static_cast<std::uint64_t>(200 + s));
    std::mt19937_64 rng(static_cast<std::uint64_t>(s));
    std::vector<Tokens> others;
    for (int k = 0; k < 6; ++k) {
      others.push_back(random_tokens(rng, c.params.config.vocab_size, 2 + (s + k) % 14));
    }
    const auto pool = PatchPool::build(c.params, others);
    for (auto method : {AblationMethod::zero, AblationMethod::mean, AblationMethod::noise,
                        AblationMethod::resample}) {
      AblationSpec spec;
      spec.method = method;
      spec.pool_size = static_cast<int>(others.size());
      for (const auto& v : ablation_value(c.params, spec, c.node, &pool, c.clean.tokens,
                                          static_cast<std::uint64_t>(s))) {
        const double closed = direct_effect(c.params, c.clean, c.node, v);
        const double replay = direct_effect_replay(c.params, c.clean, c.node, v);
        worst = std::max(worst, std::abs(closed - replay));
        ++checked;
      }
    }
  }
  return {worst <= 1e-9, fmt("max |closed - replay| = %.3g", worst) + " over " +
                             std::to_string(checked) + " values"};
}

Outcome null_and_locality() {
  double null_gap = 0.0, upstream_gap = 0.0, prefix_gap = 0.0;
  for (int s = 0; s < kCases; ++s) {
    const auto c = random_case(static_cast<std::uint64_t>(300 + s));
    const int T = c.clean.length();
    std::mt19937_64 rng(static_cast<std::uint64_t>(s));
    const NodeRef mid{c.node.layer, c.node.kind, std::uniform_int_distribution<int>(1, T)(rng)};

    const auto same = forward_do(c.params, c.clean.tokens, {Assignment{mid, c.clean.node(mid)}});
    for (int t = 0; t < T; ++t) {
      null_gap = std::max(null_gap, (same.logits[static_cast<std::size_t>(t)] -
                                     c.clean.logits[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff());
    }

    const auto run = forward_do(c.params, c.clean.tokens,
                                {Assignment{mid, random_vector(rng, c.params.config.d_model, 3.0)}});
    for (std::size_t l = 0; l < run.resid.size(); ++l) {
      for (int t = 0; t < mid.position - 1; ++t) {
        prefix_gap = std::max(prefix_gap, (run.resid[l][static_cast<std::size_t>(t)] -
                                           c.clean.resid[l][static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff());
      }
    }

    const std::vector<Vector> zero{Vector::Zero(c.params.config.d_model)};
    const auto clean_prof = layer_profile(c.params, c.clean);
    const auto ab = ablated_profile(c.params, c.clean, c.node, zero).mean;
    upstream_gap = std::max(upstream_gap, std::abs(ab.embed - clean_prof.embed));
    for (int l = 1; l < c.node.layer; ++l) {
      const auto k = static_cast<std::size_t>(l - 1);
      upstream_gap = std::max({upstream_gap, std::abs(ab.attn[k] - clean_prof.attn[k]),
                               std::abs(ab.mlp[k] - clean_prof.mlp[k])});
    }
    if (c.node.kind == NodeKind::mlp) {
      const auto k = static_cast<std::size_t>(c.node.layer - 1);
      upstream_gap = std::max(upstream_gap, std::abs(ab.attn[k] - clean_prof.attn[k]));
    }
  }
  return {null_gap <= 1e-12 && upstream_gap <= 1e-9 && prefix_gap <= 1e-12,
          fmt("null %.3g", null_gap) + fmt(", upstream readouts %.3g", upstream_gap) +
              fmt(", earlier positions %.3g", prefix_gap)};
}

Outcome zero_self_readout() {
  int nonzero = 0, checked = 0;
  for (int s = 0; s < 10; ++s) {
    const auto c = random_case(static_cast<std::uint64_t>(400 + s));
    const std::vector<Vector> zero{Vector::Zero(c.params.config.d_model)};
    for (int l = 1; l <= c.clean.n_layers(); ++l) {
      for (auto kind : {NodeKind::attn, NodeKind::mlp}) {
        for (auto policy : {SigmaPolicy::clean, SigmaPolicy::ablated}) {
          const NodeRef node{l, kind, c.clean.length()};
          const auto ab = ablated_profile(c.params, c.clean, node, zero, "", policy).mean;
          const auto k = static_cast<std::size_t>(l - 1);
          if ((kind == NodeKind::attn ? ab.attn[k] : ab.mlp[k]) != 0.0) ++nonzero;
          ++checked;
        }
      }
    }
  }
  return {nonzero == 0, std::to_string(nonzero) + " of " + std::to_string(checked) + " self-readouts nonzero"};
}

Outcome te_decomposition() {
  double worst = 0.0, rms_worst = 0.0;
  for (int s = 0; s < kCases; ++s) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(s));
    for (auto mode : {NormMode::identity, NormMode::rms}) {
      const auto c = random_case(static_cast<std::uint64_t>(500 + s), mode);
      const Vector v = random_vector(rng, c.params.config.d_model);
      const double gap = std::abs(total_effect(c.params, c.clean, c.node, v) -
                                  direct_effect(c.params, c.clean, c.node, v) -
                                  indirect_effect(c.params, c.clean, c.node, v));
      double& slot = mode == NormMode::identity ? worst : rms_worst;
      slot = std::max(slot, gap);
    }
  }
  return {worst <= 1e-9, fmt("identity max |TE - DE - IE| = %.3g", worst) +
                             fmt(" (rms, not asserted: %.3g)", rms_worst)};
}

Outcome toy_motifs() {
  bool ok = true;
  for (double u : {-2.0, 0.5, 3.0}) {
    for (auto motif : {Motif::self_repair, Motif::erasure}) {
      const auto e = toy_effects({motif, u});
      ok = ok && e.total == 0.0 && e.direct == -u && e.indirect == u;
    }
  }
  return {ok, "u in {-2, 0.5, 3}, both motifs"};
}

Outcome self_repair_exhibit() {
  const auto net = build_self_repair_net(exhibit_config());
  const NodeRef node{1, NodeKind::attn, 1};
  const std::vector<Vector> zero{Vector::Zero(net.params.config.d_model)};
  double worst_te = 0.0, min_ratio = 1e300, max_ratio = -1e300;
  std::vector<SweepPrompt> data;
  for (std::size_t k = 0; k < net.prompts.size(); ++k) {
    const auto clean = forward(net.params, net.prompts[k]);
    const NodeRef n{node.layer, node.kind, clean.length()};
    const double de = std::abs(direct_effect(net.params, clean, n, zero[0]));
    const double te = total_effect(net.params, clean, n, zero[0]);
    const auto rec = compensatory_effect(layer_profile(net.params, clean),
                                         ablated_profile(net.params, clean, n, zero).mean);
    worst_te = std::max(worst_te, std::abs(te) / de);
    min_ratio = std::min(min_ratio, rec.ce / de);
    max_ratio = std::max(max_ratio, rec.ce / de);
    data.push_back({harness::context_id_for(k), net.prompts[k]});
  }
  SweepOptions opt;
  opt.spec.method = AblationMethod::zero;
  const auto res = sweep(net.params, data, opt);
  const auto& reg = res.report.attn[0].regression;
  const bool reg_ok = reg && reg->slope >= 0.95 && reg->slope <= 1.05 && reg->r2 >= 0.99;
  const bool ok = net.prompts.size() == 20 && worst_te <= 0.05 && min_ratio >= 0.95 &&
                  max_ratio <= 1.0 + 1e-12 && reg_ok && res.skipped.empty();
  std::string d = fmt("max |TE|/|DE| = %.3g", worst_te) + fmt(", CE/|DE| in [%.6f", min_ratio) +
                  fmt(", %.6f]", max_ratio);
  if (reg) d += fmt(", slope %.6f", reg->slope) + fmt(", R2 %.6f", reg->r2);
  return {ok, d};
}

Outcome erasure_exhibit() {
  const auto net = build_erasure_net(exhibit_config(), kDefaultTheta, 0.5);
  double clean_gap = 0.0, delta_gap = 0.0, ratio_gap = 0.0;
  for (const auto& prompt : net.prompts) {
    const auto clean = forward(net.params, prompt);
    const auto prof = layer_profile(net.params, clean);
    const NodeRef node{1, NodeKind::attn, clean.length()};
    const std::vector<Vector> zero{Vector::Zero(net.params.config.d_model)};
    const auto rec = compensatory_effect(prof, ablated_profile(net.params, clean, node, zero).mean);
    clean_gap = std::max(clean_gap, std::abs(prof.mlp[1] + 0.5 * prof.attn[0]));
    delta_gap = std::max(delta_gap, std::abs(rec.delta_de_mlp[1] - 0.5 * std::abs(rec.de)));
    ratio_gap = std::max(ratio_gap, std::abs(rec.ce / std::abs(rec.de) - 0.5));
  }
  return {clean_gap <= 1e-6 && delta_gap <= 1e-6 && ratio_gap <= 1e-9,
          fmt("clean gap %.3g", clean_gap) + fmt(", MLP delta gap %.3g", delta_gap) +
              fmt(", CE ratio gap %.3g", ratio_gap)};
}

Outcome resample_convergence() {
  ModelConfig cfg;
  const auto params = gen_params(cfg, 42);
  std::mt19937_64 rng(42);
  constexpr std::size_t kSources = 400;
  std::vector<Tokens> prompts;
  for (std::size_t k = 0; k <= kSources; ++k) {
    prompts.push_back(random_tokens(rng, cfg.vocab_size, std::uniform_int_distribution<int>(4, 16)(rng)));
  }
  const auto clean = forward(params, prompts[0]);
  const NodeRef node{2, NodeKind::attn, clean.length()};

  // Total effect of every candidate patch once; a pool's patch mean is then an
  // average over its sampled members.
  const std::vector<Tokens> sources(prompts.begin() + 1, prompts.end());
  const auto pool = PatchPool::build(params, sources);
  AblationSpec all;
  all.pool_size = static_cast<int>(kSources);
  const auto profiles = ablated_profile(params, clean, node, all, &pool, 0);
  std::vector<double> te;
  for (const auto& p : profiles.patches) te.push_back(p.total_effect);

  constexpr int kReps = 4000;
  const std::vector<int> sizes{2, 4, 8, 16};
  std::vector<double> se;
  for (int n : sizes) {
    std::vector<double> means;
    for (int r = 0; r < kReps; ++r) {
      const auto idx = sample_pool_indices(kSources + 1, 0, n, detail::derive_seed(7, static_cast<std::uint64_t>(n),
                                                                                  static_cast<std::uint64_t>(r), 0));
      double m = 0.0;
      for (auto i : idx) m += te[i - 1];
      means.push_back(m / n);
    }
    se.push_back(stats::stddev(means));
  }
  double log_c = 0.0;
  for (std::size_t k = 0; k < sizes.size(); ++k) log_c += std::log(se[k] * std::sqrt(sizes[k]));
  const double c = std::exp(log_c / static_cast<double>(sizes.size()));
  bool ok = true;
  std::string d;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const double ratio = se[k] / (c / std::sqrt(sizes[k]));
    ok = ok && ratio >= 0.5 && ratio <= 2.0 && (k == 0 || se[k] < se[k - 1]);
    d += "n=" + std::to_string(sizes[k]) + fmt(" se=%.4g", se[k]) + (k + 1 < sizes.size() ? ", " : "");
  }
  return {ok, d + fmt(", c=%.4g", c)};
}

Outcome sweep_counting() {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "hydra_acceptance_sweep";
  fs::remove_all(dir);
  io::atomic_write(dir / "gen.cfg", "out=model\nn_layers=4\nn_prompts=10\nparam_seed=8\n");
  io::atomic_write(dir / "run.cfg",
                   "model=model/model.json\nvocab=model/vocab.txt\ndataset=model/dataset.jsonl\n"
                   "out=run\nmethod=mean\npool_size=5\npool_seed=3\n");
  std::ostringstream out, err;
  auto cli = [&](std::vector<std::string> args) { return cli::run_cli(args, out, err); };
  if (cli({"gen-model", "--config", (dir / "gen.cfg").string()}) != 0 ||
      cli({"sweep", "--config", (dir / "run.cfg").string()}) != 0) {
    return {false, "cli failed: " + err.str()};
  }
  const auto first = io::read_file(dir / "run" / "records.jsonl");
  if (cli({"sweep", "--config", (dir / "run.cfg").string()}) != 0) return {false, "rerun failed: " + err.str()};
  const auto second = io::read_file(dir / "run" / "records.jsonl");
  const auto parsed = harness::records_from_jsonl(first);
  const auto count = parsed.records.size() + 2 * 4 * parsed.skipped.size();
  return {count == 80 && parsed.skipped.empty() && first == second,
          std::to_string(parsed.records.size()) + " records, " + std::to_string(parsed.skipped.size()) +
              " skipped, rerun " + (first == second ? "byte-identical" : "differs")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"unrolled additivity", unrolled_additivity},
      {"total effect equals ablation impact", te_equals_delta_ablate},
      {"direct effect closed form vs replay", direct_effect_paths},
      {"null intervention and locality", null_and_locality},
      {"zero-ablation self-readout", zero_self_readout},
      {"TE = DE + IE in identity mode", te_decomposition},
      {"toy motifs", toy_motifs},
      {"self-repair exhibit", self_repair_exhibit},
      {"erasure exhibit", erasure_exhibit},
      {"resample Monte-Carlo convergence", resample_convergence},
      {"sweep determinism and counting", sweep_counting},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= 60.0) {
      o.pass = false;
      o.detail += " (over time budget)";
    }
    std::printf("%s %zu %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first,
                o.detail.c_str(), secs);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
