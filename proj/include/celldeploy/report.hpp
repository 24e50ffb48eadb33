#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace celldeploy {

/// Trailing mean; index i < window-1 averages the first i+1 values.
/// Throws EmptySeries, ValidationError("window") for window < 1.
std::vector<double> moving_average(std::span<const double> series, int window = 50);

struct MeanStd {
  std::vector<double> mean;
  std::vector<double> std;  // population (divides by the run count)
};

/// Pointwise statistics across equally long runs. Throws LengthMismatch.
MeanStd mean_std(const std::vector<std::vector<double>>& runs);

struct SampleStats {
  double mean = 0.0;
  double std = 0.0;  // n-1 denominator
  double se = 0.0;
};
SampleStats sample_stats(std::span<const double> xs);

/// First step whose value lies within rel_tol*|final| of the final value.
std::optional<int> convergence_step(std::span<const int> steps, std::span<const double> values, double rel_tol = 0.05);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;
};

struct PlotPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

/// 900x500 SVG; panels stacked vertically, each series as a polyline over a
/// filled mean +- std band.
std::string render_svg(const std::string& title, const std::vector<PlotPanel>& panels);

/// About n round-valued ticks covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int n = 5);

}  // namespace celldeploy
