#pragma once

#include <span>
#include <string>
#include <vector>

namespace latticomp {

/// 1 - SS_res / SS_tot. Throws when lengths differ, fewer than two values
/// are given, or `actual` is constant.
double r2(std::span<const double> actual, std::span<const double> predicted);

struct ParityRow {
  double actual = 0.0;
  double predicted = 0.0;
  std::string label;
};

struct ParityData {
  std::vector<ParityRow> rows;
  /// Identity-line extent: min and max over both columns.
  double lo = 0.0;
  double hi = 0.0;
};

/// `labels` may be empty; otherwise it must align with the values.
ParityData parity_data(std::span<const double> actual, std::span<const double> predicted,
                       std::span<const std::string> labels = {});

/// Scatter of predicted vs. actual with the identity line, 600x600 viewBox.
std::string parity_svg(const ParityData& data, const std::string& title);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population standard deviation (divides by n).
MeanStd mean_std(std::span<const double> values);

}  // namespace latticomp
