// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_HARNESS_DATASET_HPP_
#define HYDRA_HARNESS_DATASET_HPP_

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/error.hpp"
#include "hydra/harness/vocab.hpp"
#include "hydra/intervene.hpp"
#include "hydra/io.hpp"

namespace hydra::harness {

/// Subject / relation / true object / counterfactual object. Only the
/// subject and relation reach the model; the objects are carried for schema
/// fidelity.
struct FactRecord {
  std::string subject;
  std::string relation;
  std::string true_object;
  std::string counter_object;
  std::string prompt;
};

inline std::string make_prompt(const std::string& subject, const std::string& relation) {
  return subject + " " + relation;
}

inline std::vector<FactRecord> parse_dataset(std::string_view text) {
  std::vector<FactRecord> out;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FactRecord r;
      r.subject = j.at("s").get<std::string>();
      r.relation = j.at("r").get<std::string>();
      r.true_object = j.at("o_star").get<std::string>();
      r.counter_object = j.at("o_c").get<std::string>();
      r.prompt = make_prompt(r.subject, r.relation);
      if (r.prompt.find_first_not_of(" \t") == std::string::npos) {
        throw Error(ErrorKind::ParseError, "empty prompt");
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, "dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError,
                  "dataset line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return out;
}

inline std::vector<FactRecord> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(io::read_file(path));
}

inline std::string dataset_to_jsonl(const std::vector<FactRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j = {{"s", r.subject}, {"r", r.relation}, {"o_star", r.true_object},
                        {"o_c", r.counter_object}};
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string context_id_for(std::size_t index) { return "p" + std::to_string(index); }

/// Random subject/relation records over `words`; prompts never exceed
/// `max_prompt_tokens` tokens.
inline std::vector<FactRecord> synthetic_dataset(const std::vector<std::string>& words,
                                                 std::size_t n, std::uint64_t seed,
                                                 int max_prompt_tokens) {
  if (words.empty()) throw Error(ErrorKind::EmptyDataset, "no words to build records from");
  if (max_prompt_tokens < 2) throw Error(ErrorKind::InvalidConfig, "prompts need >= 2 tokens");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, words.size() - 1);
  auto phrase = [&](int len) {
    std::string s;
    for (int i = 0; i < len; ++i) s += (i ? " " : "") + words[word(rng)];
    return s;
  };
  std::vector<FactRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int subject_len = std::uniform_int_distribution<int>(1, std::min(3, max_prompt_tokens - 1))(rng);
    const int relation_len = std::uniform_int_distribution<int>(
        1, std::min(5, max_prompt_tokens - subject_len))(rng);
    FactRecord r;
    r.subject = phrase(subject_len);
    r.relation = phrase(relation_len);
    r.true_object = phrase(1);
    r.counter_object = phrase(1);
    r.prompt = make_prompt(r.subject, r.relation);
    out.push_back(std::move(r));
  }
  return out;
}

struct BuiltPool {
  std::vector<std::size_t> indices;
  PatchPool pool;
};

/// Pool of `pool_size` other prompts sampled without replacement.
inline BuiltPool build_pool(const Parameters& params, const Vocabulary& vocab,
                            const std::vector<FactRecord>& dataset, std::size_t current,
                            int pool_size, std::uint64_t seed) {
  BuiltPool out;
  out.indices = sample_pool_indices(dataset.size(), current, pool_size, seed);
  std::vector<Tokens> prompts;
  prompts.reserve(out.indices.size());
  for (auto i : out.indices) prompts.push_back(tokenize(vocab, dataset[i].prompt));
  out.pool = PatchPool::build(params, std::move(prompts));
  return out;
}

}  // namespace hydra::harness

#endif  // HYDRA_HARNESS_DATASET_HPP_
