#include "mprt/svg.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "mprt/config.h"

namespace mprt {
namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 190, kTop = 40, kBottom = 80;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string Escape(const std::string& s) {
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

struct Frame {
  double lo, hi;
  double X(double i, std::size_t n) const {
    const double w = kWidth - kLeft - kRight;
    return n <= 1 ? kLeft + w / 2 : kLeft + w * i / double(n - 1);
  }
  double Y(double v) const { return kTop + (kHeight - kTop - kBottom) * (hi - v) / (hi - lo); }
};

Frame MakeFrame(std::vector<double> values, std::optional<double> y_min, std::optional<double> y_max) {
  double lo = INFINITY, hi = -INFINITY;
  for (double v : values)
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo = y_min.value_or(lo - pad);
  hi = y_max.value_or(hi + pad);
  return {lo, hi};
}

std::string Header(const std::string& title) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + Num(kWidth) + "\" height=\"" +
         Num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + Num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + Escape(title) +
         "</text>\n";
}

std::string Axes(const Frame& f, const std::string& y_label) {
  std::string s;
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom;
  s += "<line x1=\"" + Num(x0) + "\" y1=\"" + Num(kTop) + "\" x2=\"" + Num(x0) + "\" y2=\"" + Num(y0) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + Num(x0) + "\" y1=\"" + Num(y0) + "\" x2=\"" + Num(x1) + "\" y2=\"" + Num(y0) +
       "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = f.lo + (f.hi - f.lo) * i / 5.0;
    const double y = f.Y(v);
    s += "<line x1=\"" + Num(x0 - 4) + "\" y1=\"" + Num(y) + "\" x2=\"" + Num(x1) + "\" y2=\"" + Num(y) +
         "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + Num(x0 - 6) + "\" y=\"" + Num(y + 4) + "\" text-anchor=\"end\">" + Tick(v) + "</text>\n";
  }
  s += "<text x=\"16\" y=\"" + Num((kTop + y0) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       Num((kTop + y0) / 2) + ")\">" + Escape(y_label) + "</text>\n";
  return s;
}

std::string XLabel(double x, const std::string& label) {
  const double y = kHeight - kBottom + 14;
  return "<text x=\"" + Num(x) + "\" y=\"" + Num(y) + "\" text-anchor=\"end\" transform=\"rotate(-35 " + Num(x) +
         " " + Num(y) + ")\">" + Escape(label) + "</text>\n";
}

std::string LegendEntry(std::size_t i, const std::string& name, const std::string& color, bool dashed) {
  const double x = kWidth - kRight + 15, y = kTop + 10 + 16.0 * double(i);
  return "<line x1=\"" + Num(x) + "\" y1=\"" + Num(y) + "\" x2=\"" + Num(x + 20) + "\" y2=\"" + Num(y) +
         "\" stroke=\"" + color + "\" stroke-width=\"2\"" + (dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n" +
         "<text x=\"" + Num(x + 26) + "\" y=\"" + Num(y + 4) + "\">" + Escape(name) + "</text>\n";
}

}  // namespace

std::string PaletteColor(const std::string& name) {
  static const std::map<std::string, std::string> kPalette = {
      {"Gradient", "#1f77b4"},       {"Saliency", "#ff7f0e"},       {"InputXGradient", "#2ca02c"},
      {"IntegratedGradients", "#d62728"}, {"SmoothGrad", "#9467bd"}, {"GuidedBackprop", "#8c564b"},
      {"GradCAM", "#e377c2"},        {"GradientSHAP", "#7f7f7f"},   {"LRP_Epsilon", "#bcbd22"},
      {"LRP_ZPlus", "#17becf"},      {"RandomBaseline", "#000000"}, {"MPRT", "#4c72b0"},
      {"sMPRT", "#55a868"},          {"eMPRT", "#c44e52"},          {"BottomUp", "#1f77b4"},
      {"TopDown", "#d62728"},
  };
  auto it = kPalette.find(name);
  if (it != kPalette.end()) return it->second;
  const std::uint64_t h = Fnv1a64(name);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%06x", unsigned(h & 0x7f7f7f));
  return buf;
}

std::string RenderSvg(const LinePlot& plot) {
  std::vector<double> values;
  for (const auto& s : plot.series) values.insert(values.end(), s.y.begin(), s.y.end());
  for (const auto& r : plot.references) values.push_back(r.y);
  const Frame f = MakeFrame(values, plot.y_min, plot.y_max);
  const std::size_t n = plot.x_labels.size();
  std::string s = Header(plot.title) + Axes(f, plot.y_label);
  for (std::size_t i = 0; i < n; ++i) s += XLabel(f.X(double(i), n), plot.x_labels[i]);
  std::size_t legend = 0;
  for (const auto& r : plot.references) {
    const double y = f.Y(r.y);
    s += "<line x1=\"" + Num(kLeft) + "\" y1=\"" + Num(y) + "\" x2=\"" + Num(kWidth - kRight) + "\" y2=\"" + Num(y) +
         "\" stroke=\"#999999\" stroke-dasharray=\"2,2\"/>\n";
    s += LegendEntry(legend++, r.label, "#999999", true);
  }
  for (const auto& series : plot.series) {
    const std::string color = PaletteColor(series.name);
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < series.y.size() && i < n; ++i) {
      if (!std::isfinite(series.y[i])) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L " : " M ") + Num(f.X(double(i), n)) + " " + Num(f.Y(series.y[i]));
      pen_down = true;
      s += "<circle cx=\"" + Num(f.X(double(i), n)) + "\" cy=\"" + Num(f.Y(series.y[i])) + "\" r=\"2.5\" fill=\"" +
           color + "\"/>\n";
    }
    if (!path.empty())
      s += "<path d=\"" + path.substr(1) + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"" +
           (series.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    s += LegendEntry(legend++, series.name, color, series.dashed);
  }
  return s + "</svg>\n";
}

std::string RenderSvg(const BarChart& chart) {
  std::vector<double> values = {0.0};
  for (const auto& s : chart.series) values.insert(values.end(), s.y.begin(), s.y.end());
  const Frame f = MakeFrame(values, std::nullopt, std::nullopt);
  std::string s = Header(chart.title) + Axes(f, chart.y_label);
  const std::size_t nc = chart.categories.size(), ns = chart.series.size();
  const double group = (kWidth - kLeft - kRight) / double(std::max<std::size_t>(nc, 1));
  const double bar = group * 0.8 / double(std::max<std::size_t>(ns, 1));
  for (std::size_t c = 0; c < nc; ++c) {
    const double gx = kLeft + group * double(c) + group * 0.1;
    s += XLabel(gx + group * 0.4, chart.categories[c]);
    for (std::size_t k = 0; k < ns; ++k) {
      const double v = c < chart.series[k].y.size() ? chart.series[k].y[c] : NAN;
      if (!std::isfinite(v)) continue;
      const double top = f.Y(std::max(v, 0.0)), bottom = f.Y(std::min(v, 0.0));
      const double x = gx + bar * double(k);
      s += "<rect x=\"" + Num(x) + "\" y=\"" + Num(top) + "\" width=\"" + Num(bar * 0.95) + "\" height=\"" +
           Num(bottom - top) + "\" fill=\"" + PaletteColor(chart.series[k].name) + "\"/>\n";
      const std::size_t e = k * nc + c;
      if (e < chart.errors.size() && std::isfinite(chart.errors[e]) && chart.errors[e] > 0) {
        const double cx = x + bar * 0.475;
        s += "<line x1=\"" + Num(cx) + "\" y1=\"" + Num(f.Y(v - chart.errors[e])) + "\" x2=\"" + Num(cx) +
             "\" y2=\"" + Num(f.Y(v + chart.errors[e])) + "\" stroke=\"black\"/>\n";
      }
    }
  }
  const double zero = f.Y(0.0);
  s += "<line x1=\"" + Num(kLeft) + "\" y1=\"" + Num(zero) + "\" x2=\"" + Num(kWidth - kRight) + "\" y2=\"" +
       Num(zero) + "\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < ns; ++k)
    s += LegendEntry(k, chart.series[k].name, PaletteColor(chart.series[k].name), false);
  return s + "</svg>\n";
}

}  // namespace mprt
