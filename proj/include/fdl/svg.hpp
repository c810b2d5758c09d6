#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace fdl {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

/// Polyline per series with axes, ticks and a legend. Output bytes depend only
/// on the inputs. Throws std::invalid_argument when no series has a point
/// (or, with log_y, a positive y).
std::string line_plot_svg(const std::vector<Series>& series, const PlotOptions& options);

/// Same frame as line_plot_svg with one dot per point.
std::string scatter_plot_svg(const std::vector<Series>& series, const PlotOptions& options);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace fdl
