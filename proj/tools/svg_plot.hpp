#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pivotnmt::tools {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y), drawn in order
};

// Line chart with axes, tick labels and a legend as a standalone SVG document.
std::string render_line_chart(const std::vector<Series>& series, const std::string& x_label,
                              const std::string& y_label);

}  // namespace pivotnmt::tools
