#include "cotdrive/experiment/plots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cotdrive/core/text.hpp"
#include "cotdrive/ingest/types.hpp"

namespace cotdrive::experiment {

namespace {

constexpr double kW = 640, kH = 480, kMargin = 56;
const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"};

std::string num(double v) { return format_fixed(v, 2); }

std::string escape(const std::string& s) {
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
  double x0, x1, y0, y1;
  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kW - 2 * kMargin); }
  double py(double y) const { return kH - kMargin - (y - y0) / (y1 - y0) * (kH - 2 * kMargin); }
};

Frame fit(double x0, double x1, double y0, double y1, bool equal_aspect) {
  auto pad = [](double& lo, double& hi) {
    if (!(hi > lo)) {
      lo -= 1;
      hi += 1;
    }
    const double p = 0.05 * (hi - lo);
    lo -= p;
    hi += p;
  };
  pad(x0, x1);
  pad(y0, y1);
  if (equal_aspect) {
    const double sx = (x1 - x0) / (kW - 2 * kMargin), sy = (y1 - y0) / (kH - 2 * kMargin);
    if (sx > sy) {
      const double c = 0.5 * (y0 + y1), half = 0.5 * sx * (kH - 2 * kMargin);
      y0 = c - half;
      y1 = c + half;
    } else {
      const double c = 0.5 * (x0 + x1), half = 0.5 * sy * (kW - 2 * kMargin);
      x0 = c - half;
      x1 = c + half;
    }
  }
  return {x0, x1, y0, y1};
}

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
         "\" viewBox=\"0 0 " + num(kW) + " " + num(kH) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"" + num(kW / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) + "</text>\n";
}

std::string axes(const Frame& f, const std::string& x_label, const std::string& y_label) {
  std::string s = "<g stroke=\"#444\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kH - kMargin) + "\" x2=\"" + num(kW - kMargin) + "\" y2=\"" +
       num(kH - kMargin) + "\"/>\n";
  s += "<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kMargin) + "\" x2=\"" + num(kMargin) + "\" y2=\"" +
       num(kH - kMargin) + "\"/>\n</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + i * (f.x1 - f.x0) / 4, yv = f.y0 + i * (f.y1 - f.y0) / 4;
    s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(kH - kMargin + 16) + "\" text-anchor=\"middle\">" +
         format_fixed(xv, 1) + "</text>\n";
    s += "<text x=\"" + num(kMargin - 6) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" +
         format_fixed(yv, 1) + "</text>\n";
  }
  s += "<text x=\"" + num(kW / 2) + "\" y=\"" + num(kH - 12) + "\" text-anchor=\"middle\">" + escape(x_label) +
       "</text>\n";
  s += "<text x=\"14\" y=\"" + num(kH / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " + num(kH / 2) +
       ")\">" + escape(y_label) + "</text>\n";
  return s;
}

std::string polyline(const Frame& f, const std::vector<std::array<double, 2>>& pts, const std::string& color,
                     double width, double opacity, bool dashed = false) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(width) +
                  "\" stroke-opacity=\"" + num(opacity) + "\"" + (dashed ? " stroke-dasharray=\"5,4\"" : "") +
                  " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? " " : "") + num(f.px(pts[i][0])) + "," + num(f.py(pts[i][1]));
  return s + "\"/>\n";
}

std::string legend_entry(int row, const std::string& color, const std::string& label) {
  const double y = kMargin + 4 + 16 * row;
  return "<rect x=\"" + num(kW - kMargin - 150) + "\" y=\"" + num(y) + "\" width=\"12\" height=\"4\" fill=\"" + color +
         "\"/><text x=\"" + num(kW - kMargin - 132) + "\" y=\"" + num(y + 6) + "\">" + escape(label) + "</text>\n";
}

}  // namespace

std::string plot_paths(const std::string& title, const metrics::Path& history, const metrics::Path& truth,
                       const forecast::ForecastOutput& output) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto grow = [&](const metrics::Path& p) {
    for (const auto& xy : p) {
      x0 = std::min(x0, xy[0]);
      x1 = std::max(x1, xy[0]);
      y0 = std::min(y0, xy[1]);
      y1 = std::max(y1, xy[1]);
    }
  };
  grow(history);
  grow(truth);
  std::vector<metrics::Path> means;
  for (const auto& seq : output.per_maneuver_params) {
    means.push_back(forecast::mean_path(seq));
    grow(means.back());
  }
  const Frame f = fit(x0, x1, y0, y1, true);
  std::string s = header(title) + axes(f, "x (m)", "y (m)");
  const int best = output.most_likely();
  for (int m = 0; m < ingest::kManeuverCount; ++m) {
    const double p = output.maneuver_dist[static_cast<std::size_t>(m)];
    s += polyline(f, means[static_cast<std::size_t>(m)], kPalette[m], m == best ? 2.5 : 1.5, 0.15 + 0.85 * p);
  }
  s += polyline(f, history, "#000000", 2.0, 1.0);
  s += polyline(f, truth, "#000000", 2.0, 1.0, true);
  s += legend_entry(0, "#000000", "history / truth (dashed)");
  for (int m = 0; m < ingest::kManeuverCount; ++m)
    s += legend_entry(m + 1, kPalette[m],
                      ingest::maneuver_name(m) + " " + format_fixed(output.maneuver_dist[static_cast<std::size_t>(m)], 2));
  return s + "</svg>\n";
}

std::string plot_probabilities(const std::string& title, const forecast::ManeuverDistribution& probs) {
  const Frame f{0, static_cast<double>(ingest::kManeuverCount), 0, 1};
  std::string s = header(title) + axes(f, "maneuver", "probability");
  const double bw = (kW - 2 * kMargin) / ingest::kManeuverCount;
  for (int m = 0; m < ingest::kManeuverCount; ++m) {
    const double p = probs[static_cast<std::size_t>(m)];
    const double x = kMargin + m * bw + 0.15 * bw, top = f.py(p);
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(top) + "\" width=\"" + num(0.7 * bw) + "\" height=\"" +
         num(kH - kMargin - top) + "\" fill=\"" + kPalette[m] + "\"/>\n";
    s += "<text x=\"" + num(x + 0.35 * bw) + "\" y=\"" + num(top - 4) + "\" text-anchor=\"middle\">" +
         format_fixed(p, 2) + "</text>\n";
    s += "<text x=\"" + num(x + 0.35 * bw) + "\" y=\"" + num(kH - kMargin + 30) +
         "\" text-anchor=\"middle\" font-size=\"9\">" + escape(ingest::maneuver_name(m)) + "</text>\n";
  }
  return s + "</svg>\n";
}

std::string plot_curves(const std::string& title, const std::string& y_label, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y1 = 0;
  for (const auto& sr : series)
    for (const auto& [x, y] : sr.points) {
      x0 = std::min(x0, static_cast<double>(x));
      x1 = std::max(x1, static_cast<double>(x));
      y1 = std::max(y1, y);
    }
  if (series.empty() || !std::isfinite(x0)) x0 = 0, x1 = 1;
  const Frame f = fit(x0, x1, 0, y1, false);
  std::string s = header(title) + axes(f, "horizon (s)", y_label);
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& [x, y] : series[i].points) pts.push_back({static_cast<double>(x), y});
    const char* color = kPalette[i % 9];
    s += polyline(f, pts, color, 2.0, 1.0);
    for (const auto& p : pts)
      s += "<circle cx=\"" + num(f.px(p[0])) + "\" cy=\"" + num(f.py(p[1])) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    s += legend_entry(static_cast<int>(i), color, series[i].name);
  }
  return s + "</svg>\n";
}

}  // namespace cotdrive::experiment
