// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_CLI_HPP_
#define HYDRA_CLI_HPP_

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hydra/effects.hpp"
#include "hydra/error.hpp"
#include "hydra/harness/dataset.hpp"
#include "hydra/harness/plots.hpp"
#include "hydra/harness/report_io.hpp"
#include "hydra/harness/run_config.hpp"
#include "hydra/harness/vocab.hpp"
#include "hydra/intervene.hpp"
#include "hydra/io.hpp"
#include "hydra/motifs.hpp"
#include "hydra/weights_io.hpp"

namespace hydra::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int layer = 1;
  std::string kind = "attn";
  std::size_t prompt_index = 0;
  std::optional<std::string> method;
};

namespace detail {

inline harness::RunConfig load_config(const Flags& f) {
  if (!fs::exists(f.config)) throw Error(ErrorKind::ConfigError, "config file does not exist: " + f.config);
  auto cfg = harness::load_run_config(f.config);
  if (f.seed) cfg.set_all_seeds(*f.seed);
  if (f.out) cfg.out = *f.out;
  if (f.method) cfg.method = parse_ablation_method(*f.method);
  return cfg;
}

inline json run_config_json(const harness::RunConfig& cfg, const std::string& command,
                            const std::string& model_hash = {}) {
  json j = cfg.to_json();
  j["command"] = command;
  j["model_hash"] = model_hash;
  return j;
}

struct Inputs {
  Parameters params;
  std::string model_hash;
  harness::Vocabulary vocab;
  std::vector<harness::FactRecord> dataset;
};

inline Inputs load_inputs(const harness::RunConfig& cfg) {
  harness::require_paths_exist(cfg, true, true, true);
  Inputs in;
  auto loaded = load_weights(cfg.model);
  cfg.apply_overrides(loaded.params.config);
  loaded.params.validate();
  in.params = std::move(loaded.params);
  in.model_hash = std::move(loaded.content_hash);
  in.vocab = harness::Vocabulary::load(cfg.vocab);
  if (static_cast<int>(in.vocab.size()) != in.params.config.vocab_size) {
    throw Error(ErrorKind::ShapeMismatch, "vocabulary has " + std::to_string(in.vocab.size()) +
                                              " tokens but the model expects " +
                                              std::to_string(in.params.config.vocab_size));
  }
  in.dataset = harness::load_dataset(cfg.dataset);
  return in;
}

inline const harness::FactRecord& pick_record(const Inputs& in, std::size_t index) {
  if (in.dataset.empty()) throw Error(ErrorKind::EmptyDataset, "dataset is empty");
  if (index >= in.dataset.size()) {
    throw Error(ErrorKind::ConfigError, "prompt index " + std::to_string(index) + " outside dataset of " +
                                            std::to_string(in.dataset.size()));
  }
  return in.dataset[index];
}

/// Replacement values for one node of one dataset prompt, seeded exactly as
/// the sweep seeds them.
inline std::vector<Vector> node_values(const Inputs& in, const harness::RunConfig& cfg,
                                       std::size_t index, const NodeRef& node,
                                       const Tokens& tokens) {
  const auto spec = cfg.ablation_spec();
  std::optional<harness::BuiltPool> pool;
  if (spec.needs_pool()) {
    pool = harness::build_pool(in.params, in.vocab, in.dataset, index, spec.pool_size, spec.pool_seed);
  }
  const auto seed = hydra::detail::derive_seed(spec.noise_seed, index,
                                               static_cast<std::uint64_t>(node.layer),
                                               node.kind == NodeKind::attn ? 0U : 1U);
  return ablation_value(in.params, spec, node, pool ? &pool->pool : nullptr, tokens, seed);
}

inline void write_report(const fs::path& out, const harness::RecordsFile& rf) {
  const auto rep = aggregate(rf.records, rf.n_layers, rf.skipped);
  io::atomic_write(out / "report.json", harness::report_to_json(rep, rf.run_config));
  io::atomic_write(out / "report.csv", harness::report_to_csv(rep.attn, rf.run_config));
  io::atomic_write(out / "report_mlp.csv", harness::report_to_csv(rep.mlp, rf.run_config));
}

inline int cmd_gen_model(const harness::RunConfig& cfg, std::ostream& out) {
  const auto mc = cfg.model_config();
  mc.validate();
  const auto params = gen_params(mc, cfg.param_seed, cfg.init_scheme);
  std::vector<std::string> words;
  for (int i = 0; i < mc.vocab_size; ++i) words.push_back("w" + std::to_string(i));
  const harness::Vocabulary vocab(words);
  const auto records = harness::synthetic_dataset(words, static_cast<std::size_t>(cfg.n_prompts),
                                                  cfg.param_seed, std::min(mc.max_seq_len, 8));
  const fs::path dir = cfg.out;
  save_weights(params, dir / "model.json",
               {{"generator", "gen-model"}, {"run_config", run_config_json(cfg, "gen-model")}});
  io::atomic_write(dir / "vocab.txt", vocab.to_text());
  io::atomic_write(dir / "dataset.jsonl", harness::dataset_to_jsonl(records));
  out << json{{"model", (dir / "model.json").string()},
              {"vocab", (dir / "vocab.txt").string()},
              {"dataset", (dir / "dataset.jsonl").string()}}
             .dump()
      << "\n";
  return 0;
}

inline int cmd_gen_exhibit(const harness::RunConfig& cfg, std::ostream& out) {
  ModelConfig tmpl = exhibit_config();
  tmpl.d_model = cfg.d_model;
  tmpl.n_heads = cfg.n_heads;
  tmpl.d_head = cfg.n_heads > 0 ? cfg.d_model / cfg.n_heads : 0;
  tmpl.d_mlp = cfg.d_mlp;
  tmpl.vocab_size = cfg.vocab_size;
  tmpl.max_seq_len = cfg.max_seq_len;
  const ExhibitNet net = cfg.motif == Motif::self_repair
                             ? build_self_repair_net(tmpl, cfg.theta, cfg.d_seed, cfg.n_prompts)
                             : build_erasure_net(tmpl, cfg.theta, cfg.alpha, cfg.d_seed, cfg.n_prompts);
  std::vector<std::string> words(static_cast<std::size_t>(tmpl.vocab_size));
  for (int i = 0; i < tmpl.vocab_size; ++i) words[static_cast<std::size_t>(i)] = "w" + std::to_string(i);
  words[static_cast<std::size_t>(net.target_token)] = "target";
  std::vector<harness::FactRecord> records;
  for (std::size_t k = 0; k < net.prompts.size(); ++k) {
    const auto subject = "subj" + std::to_string(k);
    words[static_cast<std::size_t>(net.prompts[k].front())] = subject;
    records.push_back({subject, "", "target", "w1", harness::make_prompt(subject, "")});
  }
  const harness::Vocabulary vocab(words);
  json meta = net.metadata();
  meta["generator"] = "gen-exhibit";
  meta["run_config"] = run_config_json(cfg, "gen-exhibit");
  const fs::path dir = cfg.out;
  save_weights(net.params, dir / "model.json", meta);
  io::atomic_write(dir / "vocab.txt", vocab.to_text());
  io::atomic_write(dir / "dataset.jsonl", harness::dataset_to_jsonl(records));
  out << json{{"model", (dir / "model.json").string()},
              {"motif", std::string(to_string(net.motif))},
              {"prompts", net.prompts.size()}}
             .dump()
      << "\n";
  return 0;
}

inline int cmd_ablate(const harness::RunConfig& cfg, const Flags& f, std::ostream& out) {
  const auto in = load_inputs(cfg);
  const auto& rec = pick_record(in, f.prompt_index);
  const Tokens tokens = harness::tokenize(in.vocab, rec.prompt);
  const ForwardTrace clean = forward(in.params, tokens);
  const NodeRef node{f.layer, parse_node_kind(f.kind), clean.length()};
  const auto values = node_values(in, cfg, f.prompt_index, node, tokens);
  const auto context = harness::context_id_for(f.prompt_index);
  const auto eff = estimate_effects(in.params, clean, node, values, context);
  const auto profile = layer_profile(in.params, clean, context);
  const auto ablated = ablated_profile(in.params, clean, node, values, context, cfg.sigma_policy);
  const auto record = compensatory_effect(profile, ablated.mean);
  json j = {{"run_config", run_config_json(cfg, "ablate", in.model_hash)},
            {"context_id", context},
            {"prompt", rec.prompt},
            {"node", {{"layer", node.layer}, {"kind", std::string(to_string(node.kind))},
                      {"position", node.position}}},
            {"target_token", eff.target_token},
            {"target_text", in.vocab.token(eff.target_token)},
            {"tied_argmax", eff.tied_argmax},
            {"total_effect", eff.total},
            {"direct_effect", eff.direct},
            {"indirect_effect", eff.indirect},
            {"per_patch_total_effect", eff.per_patch},
            {"compensation", harness::record_to_json(record)}};
  out << j.dump(2) << "\n";
  return 0;
}

inline int cmd_sweep(const harness::RunConfig& cfg, std::ostream& out) {
  const auto in = load_inputs(cfg);
  if (in.dataset.empty()) throw Error(ErrorKind::EmptyDataset, "dataset is empty");
  std::vector<SweepPrompt> prompts;
  for (std::size_t i = 0; i < in.dataset.size(); ++i) {
    prompts.push_back({harness::context_id_for(i), harness::tokenize(in.vocab, in.dataset[i].prompt)});
  }
  SweepOptions opt;
  opt.spec = cfg.ablation_spec();
  opt.sigma_policy = cfg.sigma_policy;
  opt.threads = cfg.threads;
  auto result = sweep(in.params, prompts, opt);
  harness::RecordsFile rf;
  rf.run_config = run_config_json(cfg, "sweep", in.model_hash);
  rf.n_layers = in.params.config.n_layers;
  rf.skipped = std::move(result.skipped);
  rf.records = std::move(result.records);
  const std::string text = harness::records_to_jsonl(rf);
  const fs::path dir = cfg.out;
  io::atomic_write(dir / "records.jsonl", text);
  // Aggregate from the serialized records so `report` reproduces this byte for byte.
  write_report(dir, harness::records_from_jsonl(text));
  out << json{{"records", rf.records.size()}, {"skipped", rf.skipped.size()},
              {"out", dir.string()}}
             .dump()
      << "\n";
  return 0;
}

inline int cmd_report(const harness::RunConfig& cfg, std::ostream& out) {
  const fs::path dir = cfg.out;
  const auto rf = harness::records_from_jsonl(io::read_file(dir / "records.jsonl"));
  write_report(dir, rf);
  out << json{{"records", rf.records.size()}, {"out", dir.string()}}.dump() << "\n";
  return 0;
}

inline int cmd_plot(const harness::RunConfig& cfg, const Flags& f, std::ostream& out) {
  const auto in = load_inputs(cfg);
  const auto& rec = pick_record(in, f.prompt_index);
  const Tokens tokens = harness::tokenize(in.vocab, rec.prompt);
  const ForwardTrace clean = forward(in.params, tokens);
  const NodeRef node{f.layer, parse_node_kind(f.kind), clean.length()};
  const auto values = node_values(in, cfg, f.prompt_index, node, tokens);
  const auto context = harness::context_id_for(f.prompt_index);
  const auto profile = layer_profile(in.params, clean, context);
  const auto ablated = ablated_profile(in.params, clean, node, values, context, cfg.sigma_policy);
  const auto run_config = run_config_json(cfg, "plot", in.model_hash);
  const fs::path dir = cfg.out;
  const auto profile_csv = svg::to_csv(harness::profile_table(profile, ablated, run_config));
  io::atomic_write(dir / "profile.csv", profile_csv);
  io::atomic_write(dir / "profile.svg", harness::profile_svg_from_csv(profile_csv));
  json summary = {{"profile", (dir / "profile.svg").string()}};
  if (fs::exists(dir / "records.jsonl")) {
    const auto rf = harness::records_from_jsonl(io::read_file(dir / "records.jsonl"));
    const auto table = harness::scatter_table(rf.records, rf.run_config);
    if (!table.rows.empty()) {
      const auto scatter_csv = svg::to_csv(table);
      io::atomic_write(dir / "scatter.csv", scatter_csv);
      io::atomic_write(dir / "scatter.svg", harness::scatter_svg_from_csv(scatter_csv));
      summary["scatter"] = (dir / "scatter.svg").string();
    }
  }
  out << summary.dump() << "\n";
  return 0;
}

inline void print_error(std::ostream& err, std::string_view kind, int code, const std::string& message) {
  err << "error kind=" << kind << " code=" << code << " message=" << json(message).dump() << "\n";
}

}  // namespace detail

/// Runs one subcommand. Returns the process exit code; failures print a single
/// `error kind=... code=... message="..."` line to `err`.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal-effect analysis of small decoder-only transformers", "hydra_cli"};
  app.fallthrough();
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "key=value run configuration")->required();
  app.add_option("--out", f.out, "output directory (overrides config)");
  app.add_option("--seed", f.seed, "overrides every seed in the config");
  auto* gen_model = app.add_subcommand("gen-model", "write a seeded random model, vocabulary and dataset");
  auto* gen_exhibit = app.add_subcommand("gen-exhibit", "write a hand-built motif exhibit network");
  auto* ablate = app.add_subcommand("ablate", "effects of ablating one node of one prompt");
  auto* sweep_cmd = app.add_subcommand("sweep", "ablate every layer of every prompt");
  auto* report = app.add_subcommand("report", "re-aggregate existing raw records");
  auto* plot = app.add_subcommand("plot", "per-layer readout profile and DE/CE scatter");
  for (auto* sub : {ablate, plot}) {
    sub->add_option("--layer", f.layer, "1-based layer")->check(CLI::PositiveNumber);
    sub->add_option("--kind", f.kind, "attn or mlp");
    sub->add_option("--prompt-index", f.prompt_index, "0-based dataset index");
    sub->add_option("--method", f.method, "zero, mean, noise or resample");
  }
  sweep_cmd->add_option("--method", f.method, "zero, mean, noise or resample");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    detail::print_error(err, "UsageError", 2, e.what());
    return 2;
  }

  try {
    const auto cfg = detail::load_config(f);
    if (*gen_model) return detail::cmd_gen_model(cfg, out);
    if (*gen_exhibit) return detail::cmd_gen_exhibit(cfg, out);
    if (*ablate) return detail::cmd_ablate(cfg, f, out);
    if (*sweep_cmd) return detail::cmd_sweep(cfg, out);
    if (*report) return detail::cmd_report(cfg, out);
    if (*plot) return detail::cmd_plot(cfg, f, out);
    detail::print_error(err, "UsageError", 2, "no subcommand");
    return 2;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    detail::print_error(err, to_string(e.kind()), code, e.detail());
    return code;
  } catch (const fs::filesystem_error& e) {
    detail::print_error(err, to_string(ErrorKind::IoError), 3, e.what());
    return 3;
  } catch (const std::exception& e) {
    detail::print_error(err, "Internal", 4, e.what());
    return 4;
  }
}

}  // namespace hydra::cli

#endif  // HYDRA_CLI_HPP_
