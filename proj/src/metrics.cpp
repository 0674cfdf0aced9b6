#include "latticomp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <locale>

namespace latticomp {

double r2(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw std::invalid_argument("r2 length mismatch: " + std::to_string(actual.size()) + " vs " +
                                std::to_string(predicted.size()));
  }
  if (actual.size() < 2) throw std::invalid_argument("r2 needs at least two values");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (ss_tot == 0.0) throw std::invalid_argument("r2 is undefined for constant actual values");
  return 1.0 - ss_res / ss_tot;
}

ParityData parity_data(std::span<const double> actual, std::span<const double> predicted,
                       std::span<const std::string> labels) {
  if (actual.size() != predicted.size() || (!labels.empty() && labels.size() != actual.size())) {
    throw std::invalid_argument("parity inputs differ in length");
  }
  ParityData data;
  data.rows.reserve(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    data.rows.push_back({actual[i], predicted[i], labels.empty() ? std::string() : labels[i]});
  }
  if (!actual.empty()) {
    const auto [amin, amax] = std::minmax_element(actual.begin(), actual.end());
    const auto [pmin, pmax] = std::minmax_element(predicted.begin(), predicted.end());
    data.lo = std::min(*amin, *pmin);
    data.hi = std::max(*amax, *pmax);
  }
  return data;
}

namespace {

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

}  // namespace

std::string parity_svg(const ParityData& data, const std::string& title) {
  constexpr double kSize = 600.0;
  constexpr double kMargin = 60.0;
  constexpr double kPlot = kSize - 2 * kMargin;
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  double lo = data.lo;
  double hi = data.hi;
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const auto px = [&](double v) { return kMargin + (v - lo) / (hi - lo) * kPlot; };
  const auto py = [&](double v) { return kSize - kMargin - (v - lo) / (hi - lo) * kPlot; };

  std::map<std::string, std::size_t> colors;
  for (const auto& row : data.rows) colors.emplace(row.label, colors.size());

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 600 600\" width=\"600\" height=\"600\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"600\" height=\"600\" fill=\"white\"/>\n";
  svg << "<text x=\"300\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << svg_escape(title) << "</text>\n";
  svg << "<rect x=\"" << fixed(kMargin) << "\" y=\"" << fixed(kMargin) << "\" width=\"" << fixed(kPlot)
      << "\" height=\"" << fixed(kPlot) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << fixed(px(lo)) << "\" y1=\"" << fixed(py(lo)) << "\" x2=\"" << fixed(px(hi)) << "\" y2=\""
      << fixed(py(hi)) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  for (const auto& row : data.rows) {
    svg << "<circle cx=\"" << fixed(px(row.actual)) << "\" cy=\"" << fixed(py(row.predicted))
        << "\" r=\"3\" fill=\"" << kPalette[colors[row.label] % 6] << "\" fill-opacity=\"0.7\"/>\n";
  }
  std::size_t legend = 0;
  for (const auto& [label, color] : colors) {
    if (label.empty()) continue;
    const double y = kMargin + 18.0 + 18.0 * static_cast<double>(legend++);
    svg << "<circle cx=\"" << fixed(kMargin + 14) << "\" cy=\"" << fixed(y - 4) << "\" r=\"4\" fill=\""
        << kPalette[color % 6] << "\"/>\n";
    svg << "<text x=\"" << fixed(kMargin + 24) << "\" y=\"" << fixed(y)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << svg_escape(label) << "</text>\n";
  }
  svg << "<text x=\"300\" y=\"585\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">actual</text>\n";
  svg << "<text x=\"18\" y=\"300\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 300)\">predicted</text>\n";
  svg << "<text x=\"" << fixed(kMargin) << "\" y=\"" << fixed(kSize - kMargin + 16)
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(lo) << "</text>\n";
  svg << "<text x=\"" << fixed(kSize - kMargin) << "\" y=\"" << fixed(kSize - kMargin + 16)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(hi) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_std of empty list");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

}  // namespace latticomp
