// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_HARNESS_RUN_CONFIG_HPP_
#define HYDRA_HARNESS_RUN_CONFIG_HPP_

// Flat UTF-8 key=value configuration. Blank lines and lines starting with '#'
// are ignored; unknown keys are rejected.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "hydra/effects.hpp"
#include "hydra/error.hpp"
#include "hydra/intervene.hpp"
#include "hydra/io.hpp"
#include "hydra/model.hpp"
#include "hydra/motifs.hpp"

namespace hydra::harness {

struct RunConfig {
  // Inputs and outputs.
  std::string model;
  std::string vocab;
  std::string dataset;
  std::string out = "out";

  // Ablation.
  AblationMethod method = AblationMethod::resample;
  std::optional<double> noise_sigma;
  int pool_size = kDefaultPoolSize;
  std::uint64_t pool_seed = 0;
  std::uint64_t noise_seed = 0;
  SigmaPolicy sigma_policy = SigmaPolicy::clean;
  unsigned threads = 1;

  // Model overrides applied after loading.
  std::optional<BlockOrder> block_order;
  std::optional<NormMode> norm_mode;

  // gen-model / gen-exhibit.
  std::uint64_t param_seed = 0;
  InitScheme init_scheme = InitScheme::gaussian;
  int n_layers = 4;
  int d_model = 64;
  int n_heads = 4;
  int d_mlp = 128;
  int vocab_size = 100;
  int max_seq_len = 16;
  int n_prompts = 40;
  Motif motif = Motif::self_repair;
  double theta = kDefaultTheta;
  double alpha = kDefaultAlpha;
  std::uint64_t d_seed = 0;

  AblationSpec ablation_spec() const {
    AblationSpec s;
    s.method = method;
    s.noise_sigma = noise_sigma;
    s.pool_size = pool_size;
    s.pool_seed = pool_seed;
    s.noise_seed = noise_seed;
    return s;
  }

  ModelConfig model_config() const {
    ModelConfig c;
    c.n_layers = n_layers;
    c.d_model = d_model;
    c.n_heads = n_heads;
    c.d_head = n_heads > 0 ? d_model / n_heads : 0;
    c.d_mlp = d_mlp;
    c.vocab_size = vocab_size;
    c.max_seq_len = max_seq_len;
    if (block_order) c.block_order = *block_order;
    if (norm_mode) c.norm_mode = *norm_mode;
    return c;
  }

  void apply_overrides(ModelConfig& c) const {
    if (block_order) c.block_order = *block_order;
    if (norm_mode) c.norm_mode = *norm_mode;
  }

  void set_all_seeds(std::uint64_t seed) {
    pool_seed = noise_seed = param_seed = d_seed = seed;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"model", model},
                        {"vocab", vocab},
                        {"dataset", dataset},
                        {"out", out},
                        {"method", std::string(to_string(method))},
                        {"noise_sigma", noise_sigma ? nlohmann::json(*noise_sigma) : nlohmann::json()},
                        {"pool_size", pool_size},
                        {"pool_seed", pool_seed},
                        {"noise_seed", noise_seed},
                        {"sigma_policy", std::string(to_string(sigma_policy))},
                        {"threads", threads},
                        {"block_order", block_order ? nlohmann::json(std::string(to_string(*block_order)))
                                                    : nlohmann::json()},
                        {"norm_mode", norm_mode ? nlohmann::json(std::string(to_string(*norm_mode)))
                                                : nlohmann::json()},
                        {"param_seed", param_seed},
                        {"init_scheme", std::string(to_string(init_scheme))},
                        {"n_layers", n_layers},
                        {"d_model", d_model},
                        {"n_heads", n_heads},
                        {"d_mlp", d_mlp},
                        {"vocab_size", vocab_size},
                        {"max_seq_len", max_seq_len},
                        {"n_prompts", n_prompts},
                        {"motif", std::string(to_string(motif))},
                        {"theta", theta},
                        {"alpha", alpha},
                        {"d_seed", d_seed}};
    return j;
  }
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw Error(ErrorKind::ConfigError,
                "key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void set_config_value(RunConfig& c, std::string_view key, std::string_view value) {
  using detail::parse_number;
  if (key == "model") c.model = value;
  else if (key == "vocab") c.vocab = value;
  else if (key == "dataset") c.dataset = value;
  else if (key == "out") c.out = value;
  else if (key == "method") c.method = parse_ablation_method(value);
  else if (key == "noise_sigma") {
    const auto v = parse_number<double>(key, value);
    if (!(v > 0.0)) throw Error(ErrorKind::ConfigError, "noise_sigma must be > 0");
    c.noise_sigma = v;
  }
  else if (key == "pool_size") c.pool_size = parse_number<int>(key, value);
  else if (key == "pool_seed") c.pool_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "noise_seed") c.noise_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "sigma_policy") c.sigma_policy = parse_sigma_policy(value);
  else if (key == "threads") c.threads = parse_number<unsigned>(key, value);
  else if (key == "block_order") c.block_order = parse_block_order(value);
  else if (key == "norm_mode") c.norm_mode = parse_norm_mode(value);
  else if (key == "param_seed") c.param_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "init_scheme") c.init_scheme = parse_init_scheme(value);
  else if (key == "n_layers") c.n_layers = parse_number<int>(key, value);
  else if (key == "d_model") c.d_model = parse_number<int>(key, value);
  else if (key == "n_heads") c.n_heads = parse_number<int>(key, value);
  else if (key == "d_mlp") c.d_mlp = parse_number<int>(key, value);
  else if (key == "vocab_size") c.vocab_size = parse_number<int>(key, value);
  else if (key == "max_seq_len") c.max_seq_len = parse_number<int>(key, value);
  else if (key == "n_prompts") c.n_prompts = parse_number<int>(key, value);
  else if (key == "motif") c.motif = parse_motif(value);
  else if (key == "theta") c.theta = parse_number<double>(key, value);
  else if (key == "alpha") c.alpha = parse_number<double>(key, value);
  else if (key == "d_seed") c.d_seed = parse_number<std::uint64_t>(key, value);
  else throw Error(ErrorKind::ConfigError, "unknown config key '" + std::string(key) + "'");
}

inline RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError, "config line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, "config line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return c;
}

/// Relative input paths resolve against the config file's directory.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.detail());
  }
  RunConfig c = parse_run_config(text);
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.model);
  resolve(c.vocab);
  resolve(c.dataset);
  resolve(c.out);
  return c;
}

inline void require_paths_exist(const RunConfig& c, bool model, bool vocab, bool dataset) {
  auto check = [](const std::string& p, const char* key) {
    if (p.empty()) throw Error(ErrorKind::ConfigError, std::string("missing config key '") + key + "'");
    if (!std::filesystem::exists(p)) {
      throw Error(ErrorKind::ConfigError, std::string(key) + " path does not exist: " + p);
    }
  };
  if (model) check(c.model, "model");
  if (vocab) check(c.vocab, "vocab");
  if (dataset) check(c.dataset, "dataset");
}

}  // namespace hydra::harness

#endif  // HYDRA_HARNESS_RUN_CONFIG_HPP_
