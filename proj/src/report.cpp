#include "celldeploy/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "celldeploy/errors.hpp"

namespace celldeploy {

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (series.empty()) throw EmptySeries("moving_average: empty series");
  if (window < 1) throw ValidationError("window", "must be >= 1");
  std::vector<double> out(series.size());
  // Summed per window rather than running, so output stays within [min, max].
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t n = std::min(i + 1, static_cast<std::size_t>(window));
    double s = 0.0;
    for (std::size_t k = i + 1 - n; k <= i; ++k) s += series[k];
    out[i] = s / static_cast<double>(n);
  }
  return out;
}

MeanStd mean_std(const std::vector<std::vector<double>>& runs) {
  if (runs.empty()) throw EmptySeries("mean_std: no runs");
  const std::size_t n = runs[0].size();
  for (const auto& r : runs)
    if (r.size() != n)
      throw LengthMismatch("mean_std: runs of length " + std::to_string(n) + " and " + std::to_string(r.size()));
  MeanStd out{std::vector<double>(n), std::vector<double>(n)};
  const double k = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (const auto& r : runs) m += r[i];
    m /= k;
    double v = 0.0;
    for (const auto& r : runs) v += (r[i] - m) * (r[i] - m);
    out.mean[i] = m;
    out.std[i] = std::sqrt(v / k);
  }
  return out;
}

SampleStats sample_stats(std::span<const double> xs) {
  if (xs.empty()) throw EmptySeries("sample_stats: empty sample");
  SampleStats s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(v / static_cast<double>(xs.size() - 1));
    s.se = s.std / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}

std::optional<int> convergence_step(std::span<const int> steps, std::span<const double> values, double rel_tol) {
  if (steps.size() != values.size()) throw LengthMismatch("convergence_step: steps and values differ in length");
  if (values.empty()) return std::nullopt;
  const double final_value = values.back();
  const double tol = rel_tol * std::abs(final_value);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (std::abs(values[i] - final_value) <= tol) return steps[i];
  return steps.back();
}

std::vector<double> nice_ticks(double lo, double hi, int n) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / std::max(1, n);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return ticks;
}

namespace {

constexpr int kWidth = 900, kHeight = 500;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

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

}  // namespace

std::string render_svg(const std::string& title, const std::vector<PlotPanel>& panels) {
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) + "\" height=\"" +
                    std::to_string(kHeight) + "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " +
                    std::to_string(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(kWidth / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";

  const double left = 70, right = kWidth - 150, top0 = 30, bottom_pad = 40;
  const double panel_h = panels.empty() ? 0.0 : (kHeight - top0) / static_cast<double>(panels.size());
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const PlotPanel& panel = panels[p];
    const double top = top0 + p * panel_h + 10, bottom = top0 + (p + 1) * panel_h - bottom_pad;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : panel.series)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.mean[i] - s.std[i]);
        ymax = std::max(ymax, s.mean[i] + s.std[i]);
      }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymin -= 0.5, ymax += 0.5;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const auto X = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
    const auto Y = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

    svg += "<g>\n<text x=\"" + num((left + right) / 2) + "\" y=\"" + num(top - 2) + "\" text-anchor=\"middle\">" +
           escape(panel.title) + "</text>\n";
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(right - left) + "\" height=\"" +
           num(bottom - top) + "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double t : nice_ticks(xmin, xmax))
      svg += "<line x1=\"" + num(X(t)) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(X(t)) + "\" y2=\"" +
             num(bottom + 4) + "\" stroke=\"#333\"/><text x=\"" + num(X(t)) + "\" y=\"" + num(bottom + 15) +
             "\" text-anchor=\"middle\">" + tick_label(t) + "</text>\n";
    for (double t : nice_ticks(ymin, ymax))
      svg += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(Y(t)) + "\" x2=\"" + num(right) + "\" y2=\"" +
             num(Y(t)) + "\" stroke=\"#ddd\"/><text x=\"" + num(left - 6) + "\" y=\"" + num(Y(t) + 4) +
             "\" text-anchor=\"end\">" + tick_label(t) + "</text>\n";
    svg += "<text x=\"" + num((left + right) / 2) + "\" y=\"" + num(bottom + 30) + "\" text-anchor=\"middle\">" +
           escape(panel.x_label) + "</text>\n";
    svg += "<text transform=\"translate(" + num(left - 50) + "," + num((top + bottom) / 2) +
           ") rotate(-90)\" text-anchor=\"middle\">" + escape(panel.y_label) + "</text>\n";

    for (std::size_t k = 0; k < panel.series.size(); ++k) {
      const PlotSeries& s = panel.series[k];
      const std::string color = kPalette[k % std::size(kPalette)];
      std::string band, line;
      for (std::size_t i = 0; i < s.x.size(); ++i) band += num(X(s.x[i])) + "," + num(Y(s.mean[i] + s.std[i])) + " ";
      for (std::size_t i = s.x.size(); i-- > 0;) band += num(X(s.x[i])) + "," + num(Y(s.mean[i] - s.std[i])) + " ";
      for (std::size_t i = 0; i < s.x.size(); ++i) line += num(X(s.x[i])) + "," + num(Y(s.mean[i])) + " ";
      svg += "<polygon class=\"band\" points=\"" + band + "\" fill=\"" + color +
             "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      svg += "<polyline class=\"mean\" points=\"" + line + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.5\"/>\n";
      const double ly = top + 14 + 16 * static_cast<double>(k);
      svg += "<line x1=\"" + num(right + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(right + 30) + "\" y2=\"" +
             num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"3\"/><text x=\"" + num(right + 35) + "\" y=\"" +
             num(ly) + "\">" + escape(s.label) + "</text>\n";
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace celldeploy
