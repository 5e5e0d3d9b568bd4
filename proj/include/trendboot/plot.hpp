#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trendboot {

struct Curve {
    std::string label;
    std::vector<double> y; // NaN breaks the line
    std::string color = "#1f77b4";
    bool dashed = false;
    bool points = false; // draw markers instead of a line
};

/// Static line chart; every curve shares the x values.
void write_svg_plot(std::ostream& out, const std::string& title, const std::string& x_label,
                    const std::vector<double>& x, const std::vector<Curve>& curves);

} // namespace trendboot
