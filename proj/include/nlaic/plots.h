#ifndef NLAIC_PLOTS_H_
#define NLAIC_PLOTS_H_

#include <string>
#include <vector>

namespace nlaic {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

// Static SVG line plot with axes, ticks and a legend.
void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<PlotSeries>& series);

}  // namespace nlaic

#endif  // NLAIC_PLOTS_H_
