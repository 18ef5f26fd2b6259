#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughband/matrix.hpp"

namespace coughband {

// Five-number summary with 1.5*IQR whiskers: quartiles by linear
// interpolation, whiskers at the most extreme data points inside the fences,
// everything beyond listed as outliers.
struct BoxplotSummary {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double whisker_lo = 0.0, whisker_hi = 0.0;
  std::vector<double> outliers;
  int n = 0;
};

inline BoxplotSummary boxplot_summary(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("boxplot of empty sample");
  std::sort(values.begin(), values.end());
  BoxplotSummary s;
  s.n = static_cast<int>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.q1 = interpolated_percentile(values, 25.0);
  s.median = interpolated_percentile(values, 50.0);
  s.q3 = interpolated_percentile(values, 75.0);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_lo = s.max;  // shrink below
  s.whisker_hi = s.min;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      s.outliers.push_back(v);
    } else {
      s.whisker_lo = std::min(s.whisker_lo, v);
      s.whisker_hi = std::max(s.whisker_hi, v);
    }
  }
  if (s.whisker_lo > s.whisker_hi) {  // everything fenced out (cannot happen with iqr >= 0)
    s.whisker_lo = s.median;
    s.whisker_hi = s.median;
  }
  return s;
}

inline nlohmann::json boxplot_json(const BoxplotSummary& s) {
  return {
      {"n", s.n},           {"min", s.min},
      {"q1", s.q1},         {"median", s.median},
      {"q3", s.q3},         {"max", s.max},
      {"whisker_lo", s.whisker_lo}, {"whisker_hi", s.whisker_hi},
      {"outliers", s.outliers},
  };
}

// Minimal standalone SVG with one box per cohort; the JSON data files remain
// the authoritative output.
inline std::string boxplot_svg(const std::string& title, const BoxplotSummary& c1,
                               const BoxplotSummary& c2) {
  const double lo = std::min(c1.outliers.empty() ? c1.whisker_lo : std::min(c1.whisker_lo, *std::min_element(c1.outliers.begin(), c1.outliers.end())),
                             c2.outliers.empty() ? c2.whisker_lo : std::min(c2.whisker_lo, *std::min_element(c2.outliers.begin(), c2.outliers.end())));
  const double hi = std::max(c1.outliers.empty() ? c1.whisker_hi : std::max(c1.whisker_hi, *std::max_element(c1.outliers.begin(), c1.outliers.end())),
                             c2.outliers.empty() ? c2.whisker_hi : std::max(c2.whisker_hi, *std::max_element(c2.outliers.begin(), c2.outliers.end())));
  const double span = hi > lo ? hi - lo : 1.0;
  auto y = [&](double v) { return 320.0 - (v - lo) / span * 280.0; };
  auto box = [&](double cx, const BoxplotSummary& s, const char* color) {
    std::string out;
    auto line = [&](double x1, double y1, double x2, double y2) {
      out += "<line x1=\"" + format_double(x1) + "\" y1=\"" + format_double(y1) + "\" x2=\"" +
             format_double(x2) + "\" y2=\"" + format_double(y2) +
             "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    };
    out += "<rect x=\"" + format_double(cx - 40) + "\" y=\"" + format_double(y(s.q3)) +
           "\" width=\"80\" height=\"" + format_double(y(s.q1) - y(s.q3)) + "\" fill=\"" + color +
           "\" stroke=\"black\"/>\n";
    line(cx - 40, y(s.median), cx + 40, y(s.median));
    line(cx, y(s.q3), cx, y(s.whisker_hi));
    line(cx, y(s.q1), cx, y(s.whisker_lo));
    line(cx - 20, y(s.whisker_hi), cx + 20, y(s.whisker_hi));
    line(cx - 20, y(s.whisker_lo), cx + 20, y(s.whisker_lo));
    for (double o : s.outliers)
      out += "<circle cx=\"" + format_double(cx) + "\" cy=\"" + format_double(y(o)) +
             "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
    return out;
  };
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" height=\"380\" "
      "viewBox=\"0 0 360 380\">\n<text x=\"180\" y=\"20\" text-anchor=\"middle\" "
      "font-size=\"13\" font-family=\"sans-serif\">" + title + "</text>\n";
  svg += box(120, c1, "#e88");
  svg += box(260, c2, "#88e");
  svg += "<text x=\"120\" y=\"345\" text-anchor=\"middle\" font-size=\"12\" "
         "font-family=\"sans-serif\">C1</text>\n";
  svg += "<text x=\"260\" y=\"345\" text-anchor=\"middle\" font-size=\"12\" "
         "font-family=\"sans-serif\">C2</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace coughband
