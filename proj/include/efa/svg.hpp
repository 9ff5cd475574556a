#pragma once

#include <string>
#include <vector>

namespace efa::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Writes a standalone SVG line plot with one polyline per series. With
/// log_y the y axis is log10 and nonpositive values are dropped from the
/// polylines. The output is well-formed XML with labels escaped.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series, bool log_y = true);

}  // namespace efa::svg
