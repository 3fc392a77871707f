// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_HARNESS_SVG_HPP_
#define HYDRA_HARNESS_SVG_HPP_

// Minimal hand-written SVG charts. Every chart is a pure function of a numeric
// CSV table, so the SVG can always be regenerated from the CSV it ships with.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/error.hpp"

namespace hydra::svg {

struct CsvTable {
  std::vector<std::string> comments;  // without the leading '#'
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  for (const auto& c : t.comments) out += "#" + c + "\n";
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += "\n";
  }
  return out;
}

inline CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    return cells;
  };
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      t.comments.push_back(line.substr(1));
      continue;
    }
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorKind::ParseError, "csv line " + std::to_string(line_no) + ": column count");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(c == "nan" ? std::nan("") : std::stod(c));
      } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, "csv line " + std::to_string(line_no) + ": bad number '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(ErrorKind::ParseError, "csv has no header");
  return t;
}

namespace detail {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline Frame make_frame(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) { x0 -= 0.5; x1 += 0.5; }
  if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
  const double pad = 0.05 * (y1 - y0);
  return {x0, x1, y0 - pad, y1 + pad};
}

inline std::string header(const std::string& title, const std::string& xlabel,
                          const std::string& ylabel, const Frame& f) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
    << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << " " << fmt(kHeight) << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
       "font-family=\"sans-serif\">" << escape(title) << "</text>\n";
  const double xa = f.px(f.x0), xb = f.px(f.x1), ya = f.py(f.y0), yb = f.py(f.y1);
  s << "<rect x=\"" << fmt(xa) << "\" y=\"" << fmt(yb) << "\" width=\"" << fmt(xb - xa)
    << "\" height=\"" << fmt(ya - yb) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  if (f.y0 < 0 && f.y1 > 0) {
    s << "<line x1=\"" << fmt(xa) << "\" y1=\"" << fmt(f.py(0)) << "\" x2=\"" << fmt(xb)
      << "\" y2=\"" << fmt(f.py(0)) << "\" stroke=\"#bbb\" stroke-dasharray=\"2,3\"/>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    char ybuf[32], xbuf[32];
    std::snprintf(ybuf, sizeof ybuf, "%.3g", yv);
    std::snprintf(xbuf, sizeof xbuf, "%.3g", xv);
    s << "<text x=\"" << fmt(xa - 6) << "\" y=\"" << fmt(f.py(yv) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << ybuf << "</text>\n";
    s << "<text x=\"" << fmt(f.px(xv)) << "\" y=\"" << fmt(ya + 16)
      << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << xbuf << "</text>\n";
  }
  s << "<text x=\"" << fmt((xa + xb) / 2) << "\" y=\"" << fmt(kHeight - 12)
    << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << escape(xlabel)
    << "</text>\n";
  s << "<text x=\"16\" y=\"" << fmt((ya + yb) / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
       "font-family=\"sans-serif\" transform=\"rotate(-90 16 " << fmt((ya + yb) / 2) << ")\">"
    << escape(ylabel) << "</text>\n";
  return s.str();
}

struct SeriesStyle {
  std::string color;
  double opacity;
  double width;
  bool dashed;
  bool in_legend;
};

inline SeriesStyle style_for(const std::string& name) {
  const bool mlp = name.find("mlp") != std::string::npos;
  if (name.rfind("patch", 0) == 0) return {"#d62728", 0.25, 1.0, mlp, false};
  if (name.rfind("ablated", 0) == 0) return {"#d62728", 1.0, 2.0, mlp, true};
  return {"#1f77b4", 1.0, 2.0, mlp, true};
}

}  // namespace detail

/// Line chart of every column against column 0. Series names starting with
/// "patch" are drawn faint red, "ablated" solid red, anything else blue;
/// names containing "mlp" are dashed.
inline std::string line_chart(const CsvTable& t, const std::string& title,
                              const std::string& ylabel = "centred logit contribution") {
  if (t.header.size() < 2 || t.rows.empty()) throw Error(ErrorKind::ParseError, "line chart needs data");
  double x0 = t.rows.front()[0], x1 = x0, y0 = 0.0, y1 = 0.0;
  for (const auto& r : t.rows) {
    x0 = std::min(x0, r[0]);
    x1 = std::max(x1, r[0]);
    for (std::size_t c = 1; c < r.size(); ++c) {
      if (std::isnan(r[c])) continue;
      y0 = std::min(y0, r[c]);
      y1 = std::max(y1, r[c]);
    }
  }
  const auto f = detail::make_frame(x0, x1, y0, y1);
  std::string out = detail::header(title, t.header[0], ylabel, f);
  int legend_row = 0;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    const auto st = detail::style_for(t.header[c]);
    std::string points;
    for (const auto& r : t.rows) {
      if (std::isnan(r[c])) continue;
      points += detail::fmt(f.px(r[0])) + "," + detail::fmt(f.py(r[c])) + " ";
    }
    if (!points.empty()) points.pop_back();
    out += "<polyline fill=\"none\" stroke=\"" + st.color + "\" stroke-opacity=\"" +
           detail::fmt(st.opacity) + "\" stroke-width=\"" + detail::fmt(st.width) + "\"" +
           (st.dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + points + "\"/>\n";
    if (st.in_legend) {
      const double ly = detail::kTop + 10 + 18 * legend_row++;
      const double lx = detail::kWidth - detail::kRight + 12;
      out += "<line x1=\"" + detail::fmt(lx) + "\" y1=\"" + detail::fmt(ly) + "\" x2=\"" +
             detail::fmt(lx + 24) + "\" y2=\"" + detail::fmt(ly) + "\" stroke=\"" + st.color +
             "\" stroke-width=\"2\"" + (st.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
      out += "<text x=\"" + detail::fmt(lx + 30) + "\" y=\"" + detail::fmt(ly + 4) +
             "\" font-size=\"11\" font-family=\"sans-serif\">" + detail::escape(t.header[c]) +
             "</text>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

/// Scatter of column `y` against column `x`, coloured by column `group`
/// (depth gradient), with the identity line for reference.
inline std::string scatter_chart(const CsvTable& t, const std::string& title, std::size_t x,
                                 std::size_t y, std::size_t group) {
  if (t.rows.empty() || std::max({x, y, group}) >= t.header.size()) {
    throw Error(ErrorKind::ParseError, "scatter chart needs data");
  }
  double lo = 0.0, hi = 0.0, g0 = t.rows.front()[group], g1 = g0;
  for (const auto& r : t.rows) {
    lo = std::min({lo, r[x], r[y]});
    hi = std::max({hi, r[x], r[y]});
    g0 = std::min(g0, r[group]);
    g1 = std::max(g1, r[group]);
  }
  const auto f = detail::make_frame(lo, hi, lo, hi);
  std::string out = detail::header(title, t.header[x], t.header[y], f);
  out += "<line x1=\"" + detail::fmt(f.px(f.x0)) + "\" y1=\"" + detail::fmt(f.py(f.x0)) +
         "\" x2=\"" + detail::fmt(f.px(f.x1)) + "\" y2=\"" + detail::fmt(f.py(f.x1)) +
         "\" stroke=\"#999\" stroke-dasharray=\"4,4\"/>\n";
  for (const auto& r : t.rows) {
    const double depth = g1 > g0 ? (r[group] - g0) / (g1 - g0) : 0.0;
    char color[16];
    std::snprintf(color, sizeof color, "#%02x%02x%02x", static_cast<int>(40 + 200 * depth), 60,
                  static_cast<int>(220 - 180 * depth));
    out += "<circle cx=\"" + detail::fmt(f.px(r[x])) + "\" cy=\"" + detail::fmt(f.py(r[y])) +
           "\" r=\"3.5\" fill=\"" + color + "\" fill-opacity=\"0.8\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace hydra::svg

#endif  // HYDRA_HARNESS_SVG_HPP_
