#pragma once

// Static SVG documents (800x600 viewBox, no scripting) for scatter and line
// plots.

#include <filesystem>
#include <string>
#include <vector>

#include "bgan/netcore.hpp"

namespace bgan {

struct PlotSeries {
  std::string name;
  Matrix points;  // n x 2
};

struct PlotLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

std::string svg_scatter(const PlotLabels& labels, const std::vector<PlotSeries>& series);
/// Points of each series are joined in order; non-finite y values break the line.
std::string svg_lines(const PlotLabels& labels, const std::vector<PlotSeries>& series);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace bgan
