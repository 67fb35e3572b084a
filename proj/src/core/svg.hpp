#pragma once

#include <string>
#include <utility>
#include <vector>

namespace fmnet {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y), plotted in order
};

// Minimal static line plot: axes, min/max tick labels, one polyline per
// series, legend in the top-right corner. Output is deterministic for equal
// inputs.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

}  // namespace fmnet
