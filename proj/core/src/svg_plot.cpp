#include "mtd/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtd {
namespace {

constexpr int kWidth = 640, kHeight = 400;
constexpr int kMarginLeft = 60, kMarginRight = 20, kMarginTop = 40, kMarginBottom = 50;
const char* kColors[] = {"#2266aa", "#cc5533", "#339955", "#886699", "#aa8822", "#557788"};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

std::vector<int> bin_counts(const std::vector<double>& values, int bins, double lo,
                            double hi) {
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  const double span = hi - lo;
  for (double v : values) {
    int b = span > 0 ? static_cast<int>((v - lo) / span * bins) : 0;
    b = std::max(0, std::min(bins - 1, b));
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

void open_svg(std::ofstream& out, const std::string& title) {
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='"
      << kHeight << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' "
      << "font-family='sans-serif' font-size='15'>" << title << "</text>\n";
}

}  // namespace

void write_histogram_svg(const Histogram& plot, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());

  const double lo = plot.min_x, hi = plot.max_x > plot.min_x ? plot.max_x : plot.min_x + 1.0;
  const auto counts = bin_counts(plot.values, plot.bins, lo, hi);
  const auto overlay = plot.overlay_values.empty()
                           ? std::vector<int>()
                           : bin_counts(plot.overlay_values, plot.bins, lo, hi);
  int max_count = 1;
  for (int c : counts) max_count = std::max(max_count, c);
  for (int c : overlay) max_count = std::max(max_count, c);

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const double bar_w = plot_w / plot.bins;

  open_svg(out, plot.title);
  auto draw_bars = [&](const std::vector<int>& cs, const char* fill, double opacity) {
    for (int b = 0; b < plot.bins; ++b) {
      const double h = plot_h * cs[static_cast<std::size_t>(b)] / max_count;
      if (h <= 0) continue;
      out << "<rect x='" << kMarginLeft + b * bar_w << "' y='"
          << kMarginTop + plot_h - h << "' width='" << bar_w * 0.92 << "' height='" << h
          << "' fill='" << fill << "' fill-opacity='" << opacity << "'/>\n";
    }
  };
  draw_bars(counts, kColors[0], overlay.empty() ? 0.9 : 0.6);
  if (!overlay.empty()) draw_bars(overlay, kColors[1], 0.6);

  if (plot.vline && *plot.vline >= lo && *plot.vline <= hi) {
    const double x = kMarginLeft + (*plot.vline - lo) / (hi - lo) * plot_w;
    out << "<line x1='" << x << "' y1='" << kMarginTop << "' x2='" << x << "' y2='"
        << kMarginTop + plot_h << "' stroke='red' stroke-dasharray='6,4' stroke-width='1.5'/>\n";
  }

  // axes + x tick labels
  out << "<line x1='" << kMarginLeft << "' y1='" << kMarginTop + plot_h << "' x2='"
      << kWidth - kMarginRight << "' y2='" << kMarginTop + plot_h
      << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const double x = kMarginLeft + plot_w * t / 4.0;
    out << "<text x='" << x << "' y='" << kMarginTop + plot_h + 18
        << "' text-anchor='middle' font-family='sans-serif' font-size='11'>" << fmt(v)
        << "</text>\n";
  }
  if (!plot.label.empty()) {
    out << "<text x='" << kWidth - kMarginRight - 8 << "' y='" << kMarginTop + 12
        << "' text-anchor='end' font-family='sans-serif' font-size='12' fill='"
        << kColors[0] << "'>" << plot.label << "</text>\n";
    if (!plot.overlay_label.empty())
      out << "<text x='" << kWidth - kMarginRight - 8 << "' y='" << kMarginTop + 28
          << "' text-anchor='end' font-family='sans-serif' font-size='12' fill='"
          << kColors[1] << "'>" << plot.overlay_label << "</text>\n";
  }
  out << "</svg>\n";
}

void write_line_chart_svg(const LineChart& chart, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());

  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  bool first = true;
  for (const LineSeries& s : chart.series)
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (first) {
        min_x = max_x = s.xs[i];
        min_y = max_y = s.ys[i];
        first = false;
      }
      min_x = std::min(min_x, s.xs[i]);
      max_x = std::max(max_x, s.xs[i]);
      min_y = std::min(min_y, s.ys[i]);
      max_y = std::max(max_y, s.ys[i]);
    }
  if (max_x == min_x) max_x = min_x + 1;
  if (max_y == min_y) max_y = min_y + 1;
  min_y = std::min(min_y, 0.0);
  max_y = std::max(max_y, 1.0);

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - min_x) / (max_x - min_x) * plot_w; };
  auto py = [&](double y) { return kMarginTop + plot_h - (y - min_y) / (max_y - min_y) * plot_h; };

  open_svg(out, chart.title);
  out << "<line x1='" << kMarginLeft << "' y1='" << kMarginTop + plot_h << "' x2='"
      << kWidth - kMarginRight << "' y2='" << kMarginTop + plot_h << "' stroke='black'/>\n"
      << "<line x1='" << kMarginLeft << "' y1='" << kMarginTop << "' x2='" << kMarginLeft
      << "' y2='" << kMarginTop + plot_h << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = min_x + (max_x - min_x) * t / 4.0;
    const double yv = min_y + (max_y - min_y) * t / 4.0;
    out << "<text x='" << px(xv) << "' y='" << kMarginTop + plot_h + 18
        << "' text-anchor='middle' font-family='sans-serif' font-size='11'>" << fmt(xv)
        << "</text>\n"
        << "<text x='" << kMarginLeft - 8 << "' y='" << py(yv) + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='11'>" << fmt(yv)
        << "</text>\n";
  }
  out << "<text x='" << kWidth / 2 << "' y='" << kHeight - 10
      << "' text-anchor='middle' font-family='sans-serif' font-size='12'>" << chart.x_label
      << "</text>\n";

  int color = 0;
  for (const LineSeries& s : chart.series) {
    out << "<polyline fill='none' stroke='" << kColors[color % 6] << "' stroke-width='2' points='";
    for (std::size_t i = 0; i < s.xs.size(); ++i)
      out << px(s.xs[i]) << "," << py(s.ys[i]) << " ";
    out << "'/>\n";
    out << "<text x='" << kWidth - kMarginRight - 8 << "' y='" << kMarginTop + 14 + 16 * color
        << "' text-anchor='end' font-family='sans-serif' font-size='12' fill='"
        << kColors[color % 6] << "'>" << s.label << "</text>\n";
    ++color;
  }
  out << "</svg>\n";
}

}  // namespace mtd
