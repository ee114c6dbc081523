// Copyright 2026 The splitleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal SVG line plots: axes, one polyline per series, optional error
// bars, a small legend. Enough to eyeball a sweep; nothing interactive.

namespace splitleak {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> yerr;  // empty or one entry per point
};

namespace detail {

inline std::string fmt_coord(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

inline std::string fmt_tick(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<PlotSeries>& series) {
  if (series.empty()) throw std::invalid_argument("write_line_plot: no series");
  constexpr double kW = 640, kH = 420, kL = 64, kR = 24, kT = 40, kB = 48;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double lo = s.yerr.empty() ? s.y[i] : s.y[i] - s.yerr[i];
      const double hi = s.yerr.empty() ? s.y[i] : s.y[i] + s.yerr[i];
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, lo);
      ymax = std::max(ymax, hi);
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double v) { return kL + (v - xmin) / (xmax - xmin) * (kW - kL - kR); };
  auto py = [&](double v) { return kH - kB - (v - ymin) / (ymax - ymin) * (kH - kT - kB); };

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_line_plot: cannot open " + path);
  f << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  f << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  f << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
    << "</text>\n";

  // Axes with four ticks per side.
  f << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
    << kH - kB << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    f << "<line x1=\"" << detail::fmt_coord(px(xv)) << "\" y1=\"" << kH - kB << "\" x2=\""
      << detail::fmt_coord(px(xv)) << "\" y2=\"" << kH - kB + 5 << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << detail::fmt_coord(px(xv)) << "\" y=\"" << kH - kB + 18
      << "\" text-anchor=\"middle\" font-size=\"11\">" << detail::fmt_tick(xv) << "</text>\n";
    f << "<line x1=\"" << kL - 5 << "\" y1=\"" << detail::fmt_coord(py(yv)) << "\" x2=\"" << kL
      << "\" y2=\"" << detail::fmt_coord(py(yv)) << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << kL - 8 << "\" y=\"" << detail::fmt_coord(py(yv) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << detail::fmt_tick(yv) << "</text>\n";
  }
  f << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10
    << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  f << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
    << "transform=\"rotate(-90 16 " << kH / 2 << ")\">" << y_label << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kColors[si % 6];
    f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i)
      f << (i ? " " : "") << detail::fmt_coord(px(s.x[i])) << "," << detail::fmt_coord(py(s.y[i]));
    f << "\"/>\n";
    for (size_t i = 0; i < s.x.size(); ++i) {
      f << "<circle cx=\"" << detail::fmt_coord(px(s.x[i])) << "\" cy=\""
        << detail::fmt_coord(py(s.y[i])) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      if (!s.yerr.empty() && s.yerr[i] > 0.0) {
        const double x0 = px(s.x[i]);
        const double ylo = py(s.y[i] - s.yerr[i]), yhi = py(s.y[i] + s.yerr[i]);
        f << "<line x1=\"" << detail::fmt_coord(x0) << "\" y1=\"" << detail::fmt_coord(ylo)
          << "\" x2=\"" << detail::fmt_coord(x0) << "\" y2=\"" << detail::fmt_coord(yhi)
          << "\" stroke=\"" << color << "\"/>\n";
        f << "<line x1=\"" << detail::fmt_coord(x0 - 3) << "\" y1=\"" << detail::fmt_coord(ylo)
          << "\" x2=\"" << detail::fmt_coord(x0 + 3) << "\" y2=\"" << detail::fmt_coord(ylo)
          << "\" stroke=\"" << color << "\"/>\n";
        f << "<line x1=\"" << detail::fmt_coord(x0 - 3) << "\" y1=\"" << detail::fmt_coord(yhi)
          << "\" x2=\"" << detail::fmt_coord(x0 + 3) << "\" y2=\"" << detail::fmt_coord(yhi)
          << "\" stroke=\"" << color << "\"/>\n";
      }
    }
    const double ly = kT + 16.0 * static_cast<double>(si);
    f << "<line x1=\"" << kW - kR - 130 << "\" y1=\"" << ly << "\" x2=\"" << kW - kR - 110
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    f << "<text x=\"" << kW - kR - 104 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << s.label
      << "</text>\n";
  }
  f << "</svg>\n";
  if (!f) throw std::runtime_error("write_line_plot: write failed for " + path);
}

}  // namespace splitleak
