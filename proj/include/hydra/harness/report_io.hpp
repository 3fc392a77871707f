// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_HARNESS_REPORT_IO_HPP_
#define HYDRA_HARNESS_REPORT_IO_HPP_

// Raw records are JSON lines. The first line is a header object carrying the
// run configuration, the layer count and the skipped prompts, so a report can
// be re-aggregated from the records file alone.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/effects.hpp"
#include "hydra/error.hpp"

namespace hydra::harness {

using nlohmann::json;

inline json record_to_json(const CompensationRecord& r) {
  return {{"context_id", r.context_id},
          {"node", {{"layer", r.node.layer}, {"kind", std::string(to_string(r.node.kind))}}},
          {"patch", r.patch_index ? json(*r.patch_index) : json("mean")},
          {"de", r.de},
          {"te", r.te},
          {"ce", r.ce},
          {"delta_de_attn", r.delta_de_attn},
          {"delta_de_mlp", r.delta_de_mlp}};
}

inline CompensationRecord record_from_json(const json& j) {
  CompensationRecord r;
  r.context_id = j.at("context_id").get<std::string>();
  r.node.layer = j.at("node").at("layer").get<int>();
  r.node.kind = parse_node_kind(j.at("node").at("kind").get<std::string>());
  const auto& patch = j.at("patch");
  if (patch.is_string()) {
    if (patch.get<std::string>() != "mean") throw Error(ErrorKind::ParseError, "bad patch field");
  } else {
    r.patch_index = patch.get<int>();
  }
  r.de = j.at("de").get<double>();
  r.te = j.at("te").get<double>();
  r.ce = j.at("ce").get<double>();
  r.delta_de_attn = j.at("delta_de_attn").get<std::vector<double>>();
  r.delta_de_mlp = j.at("delta_de_mlp").get<std::vector<double>>();
  return r;
}

inline json skipped_to_json(const std::vector<SkippedPrompt>& skipped) {
  json arr = json::array();
  for (const auto& s : skipped) arr.push_back({{"context_id", s.context_id}, {"reason", s.reason}});
  return arr;
}

inline std::vector<SkippedPrompt> skipped_from_json(const json& arr) {
  std::vector<SkippedPrompt> out;
  for (const auto& s : arr) {
    out.push_back({s.at("context_id").get<std::string>(), s.at("reason").get<std::string>()});
  }
  return out;
}

struct RecordsFile {
  json run_config;
  int n_layers = 0;
  std::vector<SkippedPrompt> skipped;
  std::vector<CompensationRecord> records;
};

inline std::string records_to_jsonl(const RecordsFile& f) {
  std::string out;
  json header = {{"header",
                  {{"run_config", f.run_config},
                   {"n_layers", f.n_layers},
                   {"skipped", skipped_to_json(f.skipped)}}}};
  out += header.dump() + "\n";
  for (const auto& r : f.records) out += record_to_json(r).dump() + "\n";
  return out;
}

inline RecordsFile records_from_jsonl(std::string_view text) {
  RecordsFile f;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  bool have_header = false;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (!have_header) {
        const auto& h = j.at("header");
        f.run_config = h.at("run_config");
        f.n_layers = h.at("n_layers").get<int>();
        f.skipped = skipped_from_json(h.at("skipped"));
        have_header = true;
      } else {
        f.records.push_back(record_from_json(j));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, "records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorKind::ParseError, "records file has no header line");
  return f;
}

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(); }

inline json layer_stats_to_json(const LayerStats& s) {
  return {{"layer", s.layer},
          {"corr_unembed_ablate", optional_number(s.corr_unembed_ablate)},
          {"frac_unembed_gt_ablate", optional_number(s.frac_unembed_gt_ablate)},
          {"slope", s.regression ? json(s.regression->slope) : json()},
          {"intercept", s.regression ? json(s.regression->intercept) : json()},
          {"r2", s.regression ? json(s.regression->r2) : json()},
          {"n_prompts", s.n_prompts}};
}

inline std::string csv_number(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

}  // namespace detail

inline std::string report_to_json(const SweepReport& rep, const json& run_config) {
  json attn = json::array(), mlp = json::array();
  for (const auto& s : rep.attn) attn.push_back(detail::layer_stats_to_json(s));
  for (const auto& s : rep.mlp) mlp.push_back(detail::layer_stats_to_json(s));
  json j = {{"run_config", run_config},
            {"prompt_count", rep.prompt_count},
            {"skipped", skipped_to_json(rep.skipped)},
            {"attn", attn},
            {"mlp", mlp}};
  return j.dump(2) + "\n";
}

inline constexpr const char* kReportCsvHeader =
    "layer,corr_unembed_ablate,frac_unembed_gt_ablate,slope,intercept,r2,n_prompts";

/// One row per layer; the run configuration rides along as a '#' comment line.
inline std::string report_to_csv(const std::vector<LayerStats>& layers, const json& run_config) {
  std::string out = "# run_config " + run_config.dump() + "\n";
  out += std::string(kReportCsvHeader) + "\n";
  for (const auto& s : layers) {
    std::optional<double> slope, intercept, r2;
    if (s.regression) {
      slope = s.regression->slope;
      intercept = s.regression->intercept;
      r2 = s.regression->r2;
    }
    out += std::to_string(s.layer) + "," + detail::csv_number(s.corr_unembed_ablate) + "," +
           detail::csv_number(s.frac_unembed_gt_ablate) + "," + detail::csv_number(slope) + "," +
           detail::csv_number(intercept) + "," + detail::csv_number(r2) + "," +
           std::to_string(s.n_prompts) + "\n";
  }
  return out;
}

}  // namespace hydra::harness

#endif  // HYDRA_HARNESS_REPORT_IO_HPP_
