// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_HARNESS_VOCAB_HPP_
#define HYDRA_HARNESS_VOCAB_HPP_

#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hydra/error.hpp"
#include "hydra/io.hpp"
#include "hydra/linalg.hpp"

namespace hydra::harness {

/// Ordered list of distinct whitespace-free tokens; a token's id is its index.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const auto& t = tokens_[i];
      if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
        throw Error(ErrorKind::ParseError, "vocabulary line " + std::to_string(i + 1) +
                                               ": tokens must be nonempty and whitespace-free");
      }
      if (!ids_.emplace(t, static_cast<TokenId>(i)).second) {
        throw Error(ErrorKind::ParseError, "vocabulary line " + std::to_string(i + 1) +
                                               ": duplicate token '" + t + "'");
      }
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  TokenId id(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) throw Error(ErrorKind::UnknownToken, "unknown token '" + std::string(token) + "'");
    return it->second;
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw Error(ErrorKind::BadToken, "token id " + std::to_string(id) + " outside vocabulary");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::string to_text() const {
    std::string out;
    for (const auto& t : tokens_) out += t + "\n";
    return out;
  }

  static Vocabulary parse(std::string_view text) {
    std::vector<std::string> tokens;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
  }

  static Vocabulary load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

inline Tokens tokenize(const Vocabulary& vocab, std::string_view text) {
  Tokens ids;
  std::istringstream in{std::string(text)};
  for (std::string word; in >> word;) ids.push_back(vocab.id(word));
  return ids;
}

inline std::string detokenize(const Vocabulary& vocab, const Tokens& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocab.token(ids[i]);
  }
  return out;
}

}  // namespace hydra::harness

#endif  // HYDRA_HARNESS_VOCAB_HPP_
