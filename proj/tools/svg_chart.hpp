#pragma once

#include <string>
#include <utility>
#include <vector>

namespace densecap::tools {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (epoch, value)
};

// Static SVG with one small line panel per series, stacked vertically.
std::string render_chart(const std::string& title, const std::vector<Series>& series);

}  // namespace densecap::tools
