#pragma once

#include <string>
#include <utility>
#include <vector>

namespace emids {

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
    std::string color = "#1f77b4";
    bool dashed = false;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    int width = 640;
    int height = 420;
};

std::string render_svg(const LinePlot& plot);
void write_svg_file(const LinePlot& plot, const std::string& path);

} // namespace emids
