#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pexsim/format.hpp"

namespace pexsim::svg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class Mark { Points, Line, LineAndPoints };

struct Series {
  std::string name;
  std::string color = "#1f77b4";
  Mark mark = Mark::Points;
  bool dashed = false;
  std::vector<Point> points;
  std::vector<std::string> point_labels;  // optional, same length as points
};

// Axis tick positions at 1, 2 or 5 times a power of ten.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / std::max(target - 1, 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

inline std::string escape(const std::string& s) {
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

// Self-contained 2-D chart: one plot area, linear axes, legend, optional y = x line.
class Chart {
 public:
  Chart(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  Chart& add(Series s) {
    series_.push_back(std::move(s));
    return *this;
  }
  Chart& diagonal(bool on = true) {
    diagonal_ = on;
    return *this;
  }
  Chart& size(int w, int h) {
    width_ = w;
    height_ = h;
    return *this;
  }

  std::string render() const {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series_) {
      for (const auto& p : s.points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
    }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (diagonal_) {
      x0 = y0 = std::min(x0, y0);
      x1 = y1 = std::max(x1, y1);
    }
    pad(x0, x1);
    pad(y0, y1);

    const double left = 70, right = 160, top = 40, bottom = 55;
    const double pw = width_ - left - right, ph = height_ - top - bottom;
    auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
       << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"white\"/>\n";
    os << "<text class=\"title\" x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(title_) << "</text>\n";
    os << "<g class=\"axes\" stroke=\"#333\" stroke-width=\"1\">\n";
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(left + pw) << "\" y2=\""
       << num(top + ph) << "\"/>\n";
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
       << num(top + ph) << "\"/>\n";
    os << "</g>\n";
    os << "<g class=\"x-ticks\" data-min=\"" << format_roundtrip(x0) << "\" data-max=\"" << format_roundtrip(x1)
       << "\">\n";
    for (double t : nice_ticks(x0, x1)) {
      os << "<line x1=\"" << num(sx(t)) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(sx(t)) << "\" y2=\""
         << num(top + ph + 5) << "\" stroke=\"#333\"/>";
      os << "<text x=\"" << num(sx(t)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">"
         << tick_label(t) << "</text>\n";
    }
    os << "</g>\n";
    os << "<g class=\"y-ticks\" data-min=\"" << format_roundtrip(y0) << "\" data-max=\"" << format_roundtrip(y1)
       << "\">\n";
    for (double t : nice_ticks(y0, y1)) {
      os << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(sy(t)) << "\" x2=\"" << num(left) << "\" y2=\""
         << num(sy(t)) << "\" stroke=\"#333\"/>";
      os << "<text x=\"" << num(left - 8) << "\" y=\"" << num(sy(t) + 4) << "\" text-anchor=\"end\">"
         << tick_label(t) << "</text>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height_ - 12.0) << "\" text-anchor=\"middle\">"
       << escape(x_label_) << "</text>\n";
    os << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << num(top + ph / 2) << ")\">" << escape(y_label_) << "</text>\n";

    if (diagonal_) {
      os << "<line class=\"diagonal\" x1=\"" << num(sx(x0)) << "\" y1=\"" << num(sy(x0)) << "\" x2=\""
         << num(sx(x1)) << "\" y2=\"" << num(sy(x1)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }

    for (std::size_t k = 0; k < series_.size(); ++k) {
      const auto& s = series_[k];
      os << "<g class=\"series\" data-name=\"" << escape(s.name) << "\">\n";
      if (s.mark != Mark::Points && s.points.size() > 1) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\""
           << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
        for (std::size_t i = 0; i < s.points.size(); ++i) {
          os << (i ? " " : "") << num(sx(s.points[i].x)) << ',' << num(sy(s.points[i].y));
        }
        os << "\"/>\n";
      }
      if (s.mark != Mark::Line) {
        for (std::size_t i = 0; i < s.points.size(); ++i) {
          const auto& p = s.points[i];
          os << "<circle cx=\"" << num(sx(p.x)) << "\" cy=\"" << num(sy(p.y)) << "\" r=\"4\" fill=\"" << s.color
             << "\">";
          if (i < s.point_labels.size()) os << "<title>" << escape(s.point_labels[i]) << "</title>";
          os << "</circle>\n";
        }
      }
      os << "</g>\n";
      const double ly = top + 10 + 18.0 * static_cast<double>(k);
      os << "<g class=\"legend\"><line x1=\"" << num(left + pw + 15) << "\" y1=\"" << num(ly) << "\" x2=\""
         << num(left + pw + 35) << "\" y2=\"" << num(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"3\""
         << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/><text x=\"" << num(left + pw + 40) << "\" y=\""
         << num(ly + 4) << "\">" << escape(s.name) << "</text></g>\n";
    }
    os << "</svg>\n";
    return os.str();
  }

 private:
  static void pad(double& lo, double& hi) {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
      return;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
  static std::string num(double v) { return format_estimate(v, 2); }
  static std::string tick_label(double v) {
    std::string s = format_roundtrip(v);
    if (s.size() > 8) s = format_estimate(v, 3);
    return s;
  }

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  bool diagonal_ = false;
  int width_ = 640;
  int height_ = 440;
};

}  // namespace pexsim::svg
