// Copyright 2026 The modecollapse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MODECOLLAPSE_SVG_HPP
#define MODECOLLAPSE_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace modecollapse::svg {

/// Fixed-format number so that identical inputs give identical bytes.
inline std::string num(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  Series(std::string label_, std::string color_)
      : label(std::move(label_)), color(std::move(color_)) {}

  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
  bool markers = false;
};

/// A rectangular plot area with linear axes.
class Panel {
 public:
  Panel(double left, double top, double width, double height)
      : left_(left), top_(top), width_(width), height_(height) {}

  void set_range(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    x0_ = x0;
    x1_ = x1;
    y0_ = y0;
    y1_ = y1;
  }

  /// Range covering every finite point of the series, padded by 5%.
  void fit(const std::vector<Series>& series) {
    double xa = INFINITY, xb = -INFINITY, ya = INFINITY, yb = -INFINITY;
    for (const Series& s : series) {
      for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
        xa = std::min(xa, s.x[k]);
        xb = std::max(xb, s.x[k]);
        ya = std::min(ya, s.y[k]);
        yb = std::max(yb, s.y[k]);
      }
    }
    if (!std::isfinite(xa)) xa = 0.0, xb = 1.0, ya = 0.0, yb = 1.0;
    const double py = 0.05 * std::max(yb - ya, 1e-12);
    set_range(xa, xb, ya - py, yb + py);
  }

  double px(double x) const { return left_ + (x - x0_) / (x1_ - x0_) * width_; }
  double py(double y) const { return top_ + (1.0 - (y - y0_) / (y1_ - y0_)) * height_; }
  double left() const { return left_; }
  double top() const { return top_; }
  double width() const { return width_; }
  double height() const { return height_; }

  std::string axes(const std::string& title, const std::string& xlabel,
                   const std::string& ylabel) const {
    std::string out;
    out += "<rect x=\"" + num(left_) + "\" y=\"" + num(top_) + "\" width=\"" + num(width_) +
           "\" height=\"" + num(height_) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double xv = x0_ + (x1_ - x0_) * k / 4.0;
      const double yv = y0_ + (y1_ - y0_) * k / 4.0;
      out += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(top_ + height_ + 14) +
             "\" font-size=\"10\" text-anchor=\"middle\">" + tick_label(xv) + "</text>\n";
      out += "<text x=\"" + num(left_ - 4) + "\" y=\"" + num(py(yv) + 3) +
             "\" font-size=\"10\" text-anchor=\"end\">" + tick_label(yv) + "</text>\n";
    }
    out += "<text x=\"" + num(left_ + width_ / 2) + "\" y=\"" + num(top_ - 6) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + escape(title) + "</text>\n";
    out += "<text x=\"" + num(left_ + width_ / 2) + "\" y=\"" + num(top_ + height_ + 30) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + escape(xlabel) + "</text>\n";
    out += "<text x=\"" + num(left_ - 40) + "\" y=\"" + num(top_ + height_ / 2) +
           "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 " +
           num(left_ - 40) + " " + num(top_ + height_ / 2) + ")\">" + escape(ylabel) +
           "</text>\n";
    return out;
  }

  std::string line(const Series& s) const {
    std::string out;
    std::string pts;
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      pts += num(px(s.x[k])) + "," + num(py(s.y[k])) + " ";
      if (s.markers)
        out += "<circle cx=\"" + num(px(s.x[k])) + "\" cy=\"" + num(py(s.y[k])) +
               "\" r=\"2.5\" fill=\"" + s.color + "\"/>\n";
    }
    if (!pts.empty() && !s.markers) {
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.2\"" +
             std::string(s.dashed ? " stroke-dasharray=\"4 3\"" : "") + " points=\"" + pts +
             "\"/>\n";
    }
    return out;
  }

  std::string legend(const std::vector<Series>& series) const {
    std::string out;
    double y = top_ + 12;
    for (const Series& s : series) {
      if (s.label.empty()) continue;
      out += "<line x1=\"" + num(left_ + width_ - 70) + "\" y1=\"" + num(y - 4) + "\" x2=\"" +
             num(left_ + width_ - 55) + "\" y2=\"" + num(y - 4) + "\" stroke=\"" + s.color +
             "\" stroke-width=\"2\"/>\n";
      out += "<text x=\"" + num(left_ + width_ - 50) + "\" y=\"" + num(y) +
             "\" font-size=\"10\">" + escape(s.label) + "</text>\n";
      y += 13;
    }
    return out;
  }

 private:
  double left_, top_, width_, height_;
  double x0_ = 0.0, x1_ = 1.0, y0_ = 0.0, y1_ = 1.0;
};

inline std::string document(double width, double height, const std::string& body) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         num(width, 0) + "\" height=\"" + num(height, 0) + "\" viewBox=\"0 0 " + num(width, 0) +
         " " + num(height, 0) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
         body + "</svg>\n";
}

}  // namespace modecollapse::svg

#endif  // MODECOLLAPSE_SVG_HPP
