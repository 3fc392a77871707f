// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_WEIGHTS_IO_HPP_
#define HYDRA_WEIGHTS_IO_HPP_

// Weight file = UTF-8 JSON manifest (config + tensor directory) plus a raw blob
// of little-endian float64 values in row-major order, concatenated in manifest
// order. The blob lives next to the manifest with a ".bin" extension.

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "hydra/error.hpp"
#include "hydra/io.hpp"
#include "hydra/model.hpp"

namespace hydra {

inline constexpr const char* kWeightFormat = "hydra-weights/1";

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers},
          {"d_model", c.d_model},
          {"n_heads", c.n_heads},
          {"d_head", c.d_head},
          {"d_mlp", c.d_mlp},
          {"vocab_size", c.vocab_size},
          {"max_seq_len", c.max_seq_len},
          {"block_order", std::string(to_string(c.block_order))},
          {"norm_mode", std::string(to_string(c.norm_mode))}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_head = j.at("d_head").get<int>();
    c.d_mlp = j.at("d_mlp").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.block_order = parse_block_order(j.at("block_order").get<std::string>());
    c.norm_mode = parse_norm_mode(j.at("norm_mode").get<std::string>());
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("model config: ") + e.what());
  }
}

namespace detail {

struct TensorSlot {
  std::string name;
  std::vector<std::int64_t> shape;
  Matrix* matrix = nullptr;
  Vector* vector = nullptr;
};

inline std::vector<TensorSlot> tensor_slots(Parameters& p) {
  const std::int64_t d = p.config.d_model;
  const std::int64_t V = p.config.vocab_size;
  std::vector<TensorSlot> slots;
  slots.push_back({"embed", {V, d}, &p.embed, nullptr});
  slots.push_back({"pos_embed", {p.config.max_seq_len, d}, &p.pos_embed, nullptr});
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& b = p.layers[l];
    const std::string pre = "blocks." + std::to_string(l) + ".";
    slots.push_back({pre + "w_q", {d, d}, &b.w_q, nullptr});
    slots.push_back({pre + "w_k", {d, d}, &b.w_k, nullptr});
    slots.push_back({pre + "w_v", {d, d}, &b.w_v, nullptr});
    slots.push_back({pre + "w_o", {d, d}, &b.w_o, nullptr});
    slots.push_back({pre + "attn_gain", {d}, nullptr, &b.attn_gain});
    slots.push_back({pre + "mlp_gain", {d}, nullptr, &b.mlp_gain});
    slots.push_back({pre + "w_in", {d, p.config.d_mlp}, &b.w_in, nullptr});
    slots.push_back({pre + "w_out", {p.config.d_mlp, d}, &b.w_out, nullptr});
  }
  slots.push_back({"final_gain", {d}, nullptr, &p.final_gain});
  slots.push_back({"unembed", {d, V}, &p.unembed, nullptr});
  return slots;
}

inline void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

inline std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
  auto blob = manifest;
  blob.replace_extension(".bin");
  return blob;
}

}  // namespace detail

struct EncodedWeights {
  std::string manifest;
  std::string blob;
};

inline EncodedWeights encode_weights(const Parameters& params, const std::string& blob_name,
                                     const nlohmann::json& metadata = nlohmann::json::object()) {
  params.validate();
  Parameters copy = params;
  EncodedWeights out;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& slot : detail::tensor_slots(copy)) {
    const std::size_t offset = out.blob.size();
    if (slot.matrix != nullptr) {
      const Matrix& m = *slot.matrix;
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) detail::append_le(out.blob, m(r, c));
      }
    } else {
      for (Eigen::Index i = 0; i < slot.vector->size(); ++i) {
        detail::append_le(out.blob, (*slot.vector)[i]);
      }
    }
    tensors.push_back({{"name", slot.name},
                       {"shape", slot.shape},
                       {"offset", offset},
                       {"length", out.blob.size() - offset}});
  }
  nlohmann::json manifest = {{"format", kWeightFormat},
                             {"config", config_to_json(params.config)},
                             {"blob", blob_name},
                             {"tensors", tensors},
                             {"metadata", metadata}};
  out.manifest = manifest.dump(2) + "\n";
  return out;
}

/// Writes `<manifest_path>` and its sibling ".bin" blob atomically.
inline void save_weights(const Parameters& params, const std::filesystem::path& manifest_path,
                         const nlohmann::json& metadata = nlohmann::json::object()) {
  const auto blob_path = detail::blob_path_for(manifest_path);
  const auto enc = encode_weights(params, blob_path.filename().string(), metadata);
  io::atomic_write(blob_path, enc.blob);
  io::atomic_write(manifest_path, enc.manifest);
}

struct LoadedWeights {
  Parameters params;
  nlohmann::json metadata;
  std::string content_hash;  // sha256 over manifest bytes followed by blob bytes
};

namespace detail {

inline LoadedWeights decode_weights_unchecked(const std::string& manifest_text,
                                            const std::string& blob) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("weight manifest: ") + e.what());
  }
  if (manifest.value("format", "") != kWeightFormat) {
    throw Error(ErrorKind::ParseError, "weight manifest has unknown format");
  }
  LoadedWeights out;
  out.params.config = config_from_json(manifest.at("config"));
  out.params.layers.resize(static_cast<std::size_t>(out.params.config.n_layers));
  out.metadata = manifest.value("metadata", nlohmann::json::object());

  const auto& entries = manifest.at("tensors");
  auto slots = detail::tensor_slots(out.params);
  if (entries.size() != slots.size()) {
    throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(slots.size()) +
                                              " tensors, manifest lists " +
                                              std::to_string(entries.size()));
  }
  std::size_t expected_offset = 0;
  for (const auto& entry : entries) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto length = entry.at("length").get<std::size_t>();
    auto slot = std::find_if(slots.begin(), slots.end(),
                             [&](const detail::TensorSlot& s) { return s.name == name; });
    if (slot == slots.end()) throw Error(ErrorKind::ShapeMismatch, "unexpected tensor " + name);
    if (shape != slot->shape) throw Error(ErrorKind::ShapeMismatch, "tensor " + name + " shape");
    std::size_t count = 1;
    for (auto s : shape) count *= static_cast<std::size_t>(s);
    if (offset != expected_offset || length != count * 8) {
      throw Error(ErrorKind::ShapeMismatch, "tensor " + name + " offset/length");
    }
    if (offset + length > blob.size()) {
      throw Error(ErrorKind::ShapeMismatch, "tensor " + name + " runs past end of blob");
    }
    const char* base = blob.data() + offset;
    if (slot->matrix != nullptr) {
      Matrix m(shape[0], shape[1]);
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          m(r, c) = detail::read_le(base + 8 * static_cast<std::size_t>(r * m.cols() + c));
        }
      }
      *slot->matrix = std::move(m);
    } else {
      Vector v(shape[0]);
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = detail::read_le(base + 8 * i);
      *slot->vector = std::move(v);
    }
    slot->name.clear();  // each tensor appears once
    expected_offset += length;
  }
  if (expected_offset != blob.size()) {
    throw Error(ErrorKind::ShapeMismatch, "blob has trailing bytes");
  }
  out.params.validate();
  out.content_hash = io::sha256_hex(manifest_text, blob);
  return out;
}

}  // namespace detail

inline LoadedWeights decode_weights(const std::string& manifest_text, const std::string& blob) {
  try {
    return detail::decode_weights_unchecked(manifest_text, blob);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("weight manifest: ") + e.what());
  }
}

inline LoadedWeights load_weights(const std::filesystem::path& manifest_path) {
  const std::string manifest_text = io::read_file(manifest_path);
  std::string blob_name;
  try {
    blob_name = nlohmann::json::parse(manifest_text).at("blob").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("weight manifest: ") + e.what());
  }
  const auto blob = io::read_file(manifest_path.parent_path() / blob_name);
  return decode_weights(manifest_text, blob);
}

}  // namespace hydra

#endif  // HYDRA_WEIGHTS_IO_HPP_
