// Copyright 2026 The cqed-pairs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Small self-contained SVG plots: bar chart, line plot with error bars,
// heat map. The CSV files are the data of record; these are for looking.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace cqed::svg {

namespace detail {

inline constexpr double kWidth = 640, kHeight = 420;
inline constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const {
    return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

inline void open(std::ostream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title) << "</text>\n";
}

inline void axes(std::ostream& out, const Frame& f, const std::string& xlabel,
                 const std::string& ylabel, bool x_ticks) {
  const double xa = f.px(f.x0), xb = f.px(f.x1), ya = f.py(f.y0), yb = f.py(f.y1);
  out << "<path d=\"M" << num(xa) << ',' << num(yb) << " L" << num(xa) << ',' << num(ya) << " L"
      << num(xb) << ',' << num(ya) << "\" stroke=\"black\" fill=\"none\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out << "<text x=\"" << num(xa - 6) << "\" y=\"" << num(f.py(y) + 4)
        << "\" text-anchor=\"end\">" << tick(y) << "</text>\n";
    out << "<line x1=\"" << num(xa) << "\" x2=\"" << num(xb) << "\" y1=\"" << num(f.py(y))
        << "\" y2=\"" << num(f.py(y)) << "\" stroke=\"#ddd\"/>\n";
  }
  if (x_ticks) {
    for (int i = 0; i <= 4; ++i) {
      const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
      out << "<text x=\"" << num(f.px(x)) << "\" y=\"" << num(ya + 18)
          << "\" text-anchor=\"middle\">" << tick(x) << "</text>\n";
    }
  }
  out << "<text x=\"" << num((xa + xb) / 2) << "\" y=\"" << num(kHeight - 15)
      << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  out << "<text transform=\"translate(18," << num((ya + yb) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
}

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  return palette[i % 5];
}

}  // namespace detail

inline void bar_chart(std::ostream& out, const std::string& title,
                      const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::vector<double>& errors) {
  using namespace detail;
  double top = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    top = std::max(top, values[i] + (i < errors.size() ? errors[i] : 0.0));
  }
  const Frame f{0.0, static_cast<double>(std::max<std::size_t>(1, values.size())), 0.0,
                top > 0.0 ? top * 1.1 : 1.0};
  open(out, title);
  axes(out, f, "event class", "probability", false);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = f.px(i + 0.15), w = f.px(i + 0.85) - x;
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(f.py(values[i])) << "\" width=\""
        << num(w) << "\" height=\"" << num(f.py(0) - f.py(values[i])) << "\" fill=\""
        << color(0) << "\"/>\n";
    if (i < errors.size() && errors[i] > 0.0) {
      const double cx = f.px(i + 0.5);
      out << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\""
          << num(f.py(values[i] - errors[i])) << "\" y2=\"" << num(f.py(values[i] + errors[i]))
          << "\" stroke=\"black\"/>\n";
    }
    out << "<text x=\"" << num(f.px(i + 0.5)) << "\" y=\"" << num(f.py(0) + 18)
        << "\" text-anchor=\"middle\">" << escape(labels[i]) << "</text>\n";
  }
  out << "</svg>\n";
}

struct Series {
  std::string name;
  std::vector<double> x, y, err;
};

inline void line_plot(std::ostream& out, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series) {
  using namespace detail;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - e);
      y1 = std::max(y1, s.y[i] + e);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  const double pad = y1 > y0 ? 0.08 * (y1 - y0) : 0.5;
  const Frame f{x0, x1, y0 - pad, y1 + pad};
  open(out, title);
  axes(out, f, xlabel, ylabel, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    std::string path;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      path += (path.empty() ? "M" : " L") + num(f.px(s.x[i])) + "," + num(f.py(s.y[i]));
      out << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i]))
          << "\" r=\"3\" fill=\"" << color(k) << "\"/>\n";
      if (i < s.err.size() && s.err[i] > 0.0) {
        out << "<line x1=\"" << num(f.px(s.x[i])) << "\" x2=\"" << num(f.px(s.x[i]))
            << "\" y1=\"" << num(f.py(s.y[i] - s.err[i])) << "\" y2=\""
            << num(f.py(s.y[i] + s.err[i])) << "\" stroke=\"" << color(k) << "\"/>\n";
      }
    }
    out << "<path d=\"" << path << "\" stroke=\"" << color(k) << "\" fill=\"none\"/>\n";
    out << "<text x=\"" << num(kWidth - kRight - 4) << "\" y=\"" << num(kTop + 14 * (k + 1))
        << "\" text-anchor=\"end\" fill=\"" << color(k) << "\">" << escape(s.name)
        << "</text>\n";
  }
  out << "</svg>\n";
}

/// z[iy][ix] over the grid xs by ys; non-finite cells are drawn grey.
inline void heat_map(std::ostream& out, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, const std::vector<double>& xs,
                     const std::vector<double>& ys, const std::vector<std::vector<double>>& z) {
  using namespace detail;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& row : z) {
    for (double v : row) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi == lo) hi = lo + 1;
  const Frame f{0.0, static_cast<double>(xs.size()), 0.0, static_cast<double>(ys.size())};
  open(out, title + " (" + tick(lo) + " .. " + tick(hi) + ")");
  for (std::size_t iy = 0; iy < ys.size(); ++iy) {
    for (std::size_t ix = 0; ix < xs.size(); ++ix) {
      const double v = z[iy][ix];
      std::string fill = "#999";
      if (std::isfinite(v)) {
        const double t = (v - lo) / (hi - lo);
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 * t),
                      static_cast<int>(80 + 100 * (1 - std::abs(2 * t - 1))),
                      static_cast<int>(255 * (1 - t)));
        fill = buf;
      }
      out << "<rect x=\"" << num(f.px(ix)) << "\" y=\"" << num(f.py(iy + 1.0)) << "\" width=\""
          << num(f.px(ix + 1.0) - f.px(ix)) << "\" height=\"" << num(f.py(iy) - f.py(iy + 1.0))
          << "\" fill=\"" << fill << "\"/>\n";
    }
  }
  for (std::size_t ix = 0; ix < xs.size(); ++ix) {
    out << "<text x=\"" << num(f.px(ix + 0.5)) << "\" y=\"" << num(f.py(0) + 18)
        << "\" text-anchor=\"middle\">" << tick(xs[ix]) << "</text>\n";
  }
  for (std::size_t iy = 0; iy < ys.size(); ++iy) {
    out << "<text x=\"" << num(f.px(0) - 6) << "\" y=\"" << num(f.py(iy + 0.5) + 4)
        << "\" text-anchor=\"end\">" << tick(ys[iy]) << "</text>\n";
  }
  out << "<text x=\"" << num((f.px(0) + f.px(xs.size())) / 2) << "\" y=\"" << num(kHeight - 15)
      << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  out << "<text transform=\"translate(18," << num((f.py(0) + f.py(ys.size())) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace cqed::svg
