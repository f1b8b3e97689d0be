// Copyright (c) 2026 sdlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "sdlab/rng.hpp"

namespace sdlab {

// Minimal self-contained scatter plot: two point classes, axes with ticks and
// a legend. Output depends only on the input points, so identical data yields
// identical bytes. Points beyond 2-D are projected onto their first two
// coordinates; 1-D points are drawn on the x axis.

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

inline std::string scatter_svg(const Mat& reference_pts, const Mat& generated_pts,
                               const std::string& reference_label,
                               const std::string& generated_label, const std::string& title) {
  constexpr double kW = 640.0, kH = 480.0;
  constexpr double kLeft = 60.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;

  auto coord = [](const Mat& m, int row, int axis) {
    return m.cols() > axis ? m(row, axis) : 0.0;
  };

  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const Mat* m : {&reference_pts, &generated_pts}) {
    for (int i = 0; i < m->rows(); ++i) {
      x_min = std::min(x_min, coord(*m, i, 0));
      x_max = std::max(x_max, coord(*m, i, 0));
      y_min = std::min(y_min, coord(*m, i, 1));
      y_max = std::max(y_max, coord(*m, i, 1));
    }
  }
  if (!(x_min < x_max)) {
    x_min -= 1.0;
    x_max += 1.0;
  }
  if (!(y_min < y_max)) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double x_pad = 0.05 * (x_max - x_min);
  const double y_pad = 0.05 * (y_max - y_min);
  x_min -= x_pad;
  x_max += x_pad;
  y_min -= y_pad;
  y_max += y_pad;

  auto sx = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * (kW - kLeft - kRight); };
  auto sy = [&](double y) { return kH - kBottom - (y - y_min) / (y_max - y_min) * (kH - kTop - kBottom); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
  out << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  out << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">" << title << "</text>\n";

  // axes
  out << "<line x1=\"" << detail::svg_num(kLeft) << "\" y1=\"" << detail::svg_num(kH - kBottom)
      << "\" x2=\"" << detail::svg_num(kW - kRight) << "\" y2=\"" << detail::svg_num(kH - kBottom)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << detail::svg_num(kLeft) << "\" y1=\"" << detail::svg_num(kTop)
      << "\" x2=\"" << detail::svg_num(kLeft) << "\" y2=\"" << detail::svg_num(kH - kBottom)
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 4.0;
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    out << "<line x1=\"" << detail::svg_num(sx(xv)) << "\" y1=\"" << detail::svg_num(kH - kBottom)
        << "\" x2=\"" << detail::svg_num(sx(xv)) << "\" y2=\"" << detail::svg_num(kH - kBottom + 5)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << detail::svg_num(sx(xv)) << "\" y=\"" << detail::svg_num(kH - kBottom + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::svg_num(xv) << "</text>\n";
    out << "<line x1=\"" << detail::svg_num(kLeft - 5) << "\" y1=\"" << detail::svg_num(sy(yv))
        << "\" x2=\"" << detail::svg_num(kLeft) << "\" y2=\"" << detail::svg_num(sy(yv))
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << detail::svg_num(kLeft - 8) << "\" y=\"" << detail::svg_num(sy(yv) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::svg_num(yv) << "</text>\n";
  }

  auto draw = [&](const Mat& m, const char* color) {
    for (int i = 0; i < m.rows(); ++i)
      out << "<circle cx=\"" << detail::svg_num(sx(coord(m, i, 0))) << "\" cy=\""
          << detail::svg_num(sy(coord(m, i, 1))) << "\" r=\"2\" fill=\"" << color
          << "\" fill-opacity=\"0.6\"/>\n";
  };
  draw(reference_pts, "#1f77b4");
  draw(generated_pts, "#ff7f0e");

  // legend
  out << "<circle cx=\"500\" cy=\"52\" r=\"4\" fill=\"#1f77b4\"/>\n";
  out << "<text x=\"510\" y=\"56\" font-family=\"sans-serif\" font-size=\"12\">"
      << reference_label << "</text>\n";
  out << "<circle cx=\"500\" cy=\"70\" r=\"4\" fill=\"#ff7f0e\"/>\n";
  out << "<text x=\"510\" y=\"74\" font-family=\"sans-serif\" font-size=\"12\">"
      << generated_label << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace sdlab
