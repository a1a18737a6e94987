#pragma once

#include <string>
#include <vector>

namespace rch::svgplot {

struct Series {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    std::string label;
};

/// Minimal line plot: fixed 900x600 viewport, axes with rounded ticks,
/// one polyline per series. Returns the SVG document.
std::string render(const std::vector<Series>& series, const std::string& title,
                   const std::string& xlabel, const std::string& ylabel);

}  // namespace rch::svgplot
