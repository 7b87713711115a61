#ifndef AC2MPC_HARNESS_SVG_HPP
#define AC2MPC_HARNESS_SVG_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace ac2mpc::harness {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Self-contained SVG line chart with axes, ticks and a legend.
std::string render_svg(const PlotSpec& plot);
void write_svg(const PlotSpec& plot, const std::filesystem::path& file);

}  // namespace ac2mpc::harness

#endif  // AC2MPC_HARNESS_SVG_HPP
