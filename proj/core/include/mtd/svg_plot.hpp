#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mtd {

struct Histogram {
  std::string title;
  std::vector<double> values;
  int bins = 20;
  double min_x = 0.0, max_x = 1.0;
  std::optional<double> vline;
  /// Optional second population drawn in a contrasting color.
  std::vector<double> overlay_values;
  std::string label = "";
  std::string overlay_label = "";
};

void write_histogram_svg(const Histogram& plot, const std::filesystem::path& path);

struct LineSeries {
  std::string label;
  std::vector<double> xs, ys;
};

struct LineChart {
  std::string title;
  std::string x_label, y_label;
  std::vector<LineSeries> series;
};

void write_line_chart_svg(const LineChart& chart, const std::filesystem::path& path);

}  // namespace mtd
