#ifndef MPRT_SVG_H_
#define MPRT_SVG_H_

#include <optional>
#include <string>
#include <vector>

namespace mprt {

// Fixed colour per method (and metric) name, so a method looks the same in
// every figure. Unknown names get a colour from a hash of the name.
std::string PaletteColor(const std::string& name);

struct Series {
  std::string name;
  std::vector<double> y;  // NaN leaves a gap.
  bool dashed = false;
};

struct ReferenceLine {
  std::string label;
  double y = 0.0;
};

struct LinePlot {
  std::string title;
  std::string y_label;
  std::vector<std::string> x_labels;
  std::vector<Series> series;
  std::vector<ReferenceLine> references;
  std::optional<double> y_min, y_max;
};

// Grouped bars: one group per category, one bar per series.
struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> categories;
  std::vector<Series> series;  // series[s].y[c]
  std::vector<double> errors;  // Optional, flattened as [s * categories + c].
};

std::string RenderSvg(const LinePlot& plot);
std::string RenderSvg(const BarChart& chart);

}  // namespace mprt

#endif  // MPRT_SVG_H_
