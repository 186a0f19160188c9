// svg.hpp - minimal self-contained SVG line-plot writer (polylines + axes +
// legend). Deterministic output: numbers go through format_double.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "softret/util.hpp"

namespace softret {

class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_polyline(std::vector<std::pair<double, double>> points, std::string color, std::string label) {
    for (auto [x, y] : points) {
      x_min_ = std::min(x_min_, x);
      x_max_ = std::max(x_max_, x);
      y_min_ = std::min(y_min_, y);
      y_max_ = std::max(y_max_, y);
    }
    series_.push_back({std::move(points), std::move(color), std::move(label)});
  }

  std::string render() const {
    const double width = 640, height = 480;
    const double ml = 70, mr = 20, mt = 40, mb = 50;
    double x0 = x_min_, x1 = x_max_, y0 = y_min_, y1 = y_max_;
    if (!(x1 > x0)) { x0 -= 0.5; x1 += 0.5; }
    if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
    const double xpad = 0.05 * (x1 - x0), ypad = 0.05 * (y1 - y0);
    x0 -= xpad; x1 += xpad; y0 -= ypad; y1 += ypad;
    auto sx = [&](double x) { return ml + (x - x0) / (x1 - x0) * (width - ml - mr); };
    auto sy = [&](double y) { return height - mb - (y - y0) / (y1 - y0) * (height - mt - mb); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_double(width) +
           "\" height=\"" + format_double(height) + "\" viewBox=\"0 0 " + format_double(width) + " " +
           format_double(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + format_double(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           title_ + "</text>\n";
    // Axes.
    out += line(ml, height - mb, width - mr, height - mb);
    out += line(ml, mt, ml, height - mb);
    for (int i = 0; i <= 4; ++i) {
      const double fx = x0 + (x1 - x0) * i / 4.0;
      const double fy = y0 + (y1 - y0) * i / 4.0;
      out += "<text x=\"" + format_double(sx(fx)) + "\" y=\"" + format_double(height - mb + 18) +
             "\" text-anchor=\"middle\" font-size=\"10\">" + short_num(fx) + "</text>\n";
      out += "<text x=\"" + format_double(ml - 6) + "\" y=\"" + format_double(sy(fy) + 3) +
             "\" text-anchor=\"end\" font-size=\"10\">" + short_num(fy) + "</text>\n";
    }
    out += "<text x=\"" + format_double(width / 2) + "\" y=\"" + format_double(height - 12) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + x_label_ + "</text>\n";
    out += "<text x=\"16\" y=\"" + format_double(height / 2) +
           "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " +
           format_double(height / 2) + ")\">" + y_label_ + "</text>\n";
    // Series.
    for (const Series& s : series_) {
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < s.points.size(); ++i) {
        if (i) out += " ";
        out += format_double(sx(s.points[i].first)) + "," + format_double(sy(s.points[i].second));
      }
      out += "\"/>\n";
    }
    // Legend.
    double ly = mt + 6;
    for (const Series& s : series_) {
      out += line(width - mr - 120, ly, width - mr - 100, ly, s.color);
      out += "<text x=\"" + format_double(width - mr - 94) + "\" y=\"" + format_double(ly + 4) +
             "\" font-size=\"11\">" + s.label + "</text>\n";
      ly += 16;
    }
    out += "</svg>\n";
    return out;
  }

 private:
  struct Series {
    std::vector<std::pair<double, double>> points;
    std::string color;
    std::string label;
  };

  static std::string line(double x1, double y1, double x2, double y2, const std::string& color = "black") {
    return "<line x1=\"" + format_double(x1) + "\" y1=\"" + format_double(y1) + "\" x2=\"" +
           format_double(x2) + "\" y2=\"" + format_double(y2) + "\" stroke=\"" + color + "\"/>\n";
  }

  static std::string short_num(double v) {
    if (v != 0.0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e4)) return format_double(v);
    double r = std::round(v * 1000.0) / 1000.0;
    if (r == 0.0) r = 0.0;  // normalize -0
    return format_double(r);
  }

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  double x_min_ = std::numeric_limits<double>::infinity();
  double x_max_ = -std::numeric_limits<double>::infinity();
  double y_min_ = std::numeric_limits<double>::infinity();
  double y_max_ = -std::numeric_limits<double>::infinity();
};

}  // namespace softret
