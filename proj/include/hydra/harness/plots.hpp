// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_HARNESS_PLOTS_HPP_
#define HYDRA_HARNESS_PLOTS_HPP_

// Tables behind the two figures, and SVG renderers that read nothing but the
// CSV text of those tables.

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <string_view>

#include "hydra/effects.hpp"
#include "hydra/harness/svg.hpp"

namespace hydra::harness {

/// Per-layer readouts at the final position: clean and ablated (patch mean)
/// series for attention and MLP, plus one faint series per patch.
inline svg::CsvTable profile_table(const LayerProfile& clean, const AblationProfiles& ablated,
                                   const nlohmann::json& run_config) {
  svg::CsvTable t;
  t.comments.push_back(" run_config " + run_config.dump());
  t.comments.push_back(" ablated " + to_string(ablated.mean.node) + " target_token " +
                       std::to_string(clean.target_token));
  t.header = {"layer", "clean_attn", "ablated_attn", "clean_mlp", "ablated_mlp"};
  const bool show_patches = ablated.patches.size() > 1;
  if (show_patches) {
    for (std::size_t k = 0; k < ablated.patches.size(); ++k) {
      t.header.push_back("patch" + std::to_string(k) + "_attn");
      t.header.push_back("patch" + std::to_string(k) + "_mlp");
    }
  }
  for (std::size_t l = 0; l < clean.attn.size(); ++l) {
    std::vector<double> row = {static_cast<double>(l + 1), clean.attn[l], ablated.mean.attn[l],
                               clean.mlp[l], ablated.mean.mlp[l]};
    if (show_patches) {
      for (const auto& p : ablated.patches) {
        row.push_back(p.attn[l]);
        row.push_back(p.mlp[l]);
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// One point per patch-mean record: layer, kind (0 attention, 1 MLP), DE, CE.
inline svg::CsvTable scatter_table(std::span<const CompensationRecord> records,
                                   const nlohmann::json& run_config) {
  svg::CsvTable t;
  t.comments.push_back(" run_config " + run_config.dump());
  t.header = {"layer", "is_mlp", "direct_effect", "compensatory_effect"};
  for (const auto& r : records) {
    if (r.patch_index) continue;
    t.rows.push_back({static_cast<double>(r.node.layer), r.node.kind == NodeKind::mlp ? 1.0 : 0.0,
                      r.de, r.ce});
  }
  return t;
}

namespace detail {

inline std::string with_metadata(std::string svg_text, const svg::CsvTable& t) {
  std::string meta = "<metadata>";
  for (const auto& c : t.comments) meta += svg::detail::escape(c) + "\n";
  meta += "</metadata>\n";
  const auto pos = svg_text.find('\n');
  svg_text.insert(pos + 1, meta);
  return svg_text;
}

}  // namespace detail

inline std::string profile_svg_from_csv(std::string_view csv) {
  const auto t = svg::parse_csv(csv);
  return detail::with_metadata(svg::line_chart(t, "final-position readouts by layer"), t);
}

inline std::string scatter_svg_from_csv(std::string_view csv) {
  const auto t = svg::parse_csv(csv);
  return detail::with_metadata(svg::scatter_chart(t, "compensation against direct effect", 2, 3, 0), t);
}

}  // namespace hydra::harness

#endif  // HYDRA_HARNESS_PLOTS_HPP_
