#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aef {

// Minimal static line chart written as a PNG. Enough for the score-vs-level
// sweep figures; not a general plotting layer.
struct LinePlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;                 // NaN entries are skipped
  std::optional<double> marked_x;        // vertical marker (base level)
  double y_min = 0.0, y_max = 1.0;
};

void write_line_plot(const LinePlotSpec& spec, const std::filesystem::path& out);

}  // namespace aef
