#include "trendboot/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace trendboot {

namespace {

constexpr double kWidth = 900, kHeight = 420;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

void write_svg_plot(std::ostream& out, const std::string& title, const std::string& x_label,
                    const std::vector<double>& x, const std::vector<Curve>& curves) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const double v : x) {
        x0 = std::min(x0, v);
        x1 = std::max(x1, v);
    }
    for (const auto& c : curves)
        for (const double v : c.y)
            if (std::isfinite(v)) {
                y0 = std::min(y0, v);
                y1 = std::max(y1, v);
            }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1;
    if (!std::isfinite(y0)) y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    const auto px = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * pw; };
    const auto py = [&](double v) { return kTop + (1.0 - (v - y0) / (y1 - y0)) * ph; };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"14\">" << escape(title) << "</text>\n";
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        out << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(kHeight - kBottom + 16)
            << "\" text-anchor=\"middle\">" << label_number(xv) << "</text>\n";
        out << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">"
            << label_number(yv) << "</text>\n";
    }
    out << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 10) << "\" text-anchor=\"middle\">"
        << escape(x_label) << "</text>\n";

    for (std::size_t k = 0; k < curves.size(); ++k) {
        const auto& c = curves[k];
        const std::size_t n = std::min(x.size(), c.y.size());
        if (c.points) {
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(c.y[i]))
                    out << "<circle cx=\"" << fmt(px(x[i])) << "\" cy=\"" << fmt(py(c.y[i])) << "\" r=\"1.5\" fill=\""
                        << c.color << "\"/>\n";
        } else {
            std::string path;
            bool pen = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(c.y[i])) {
                    pen = false;
                    continue;
                }
                path += (pen ? " L" : " M") + fmt(px(x[i])) + ' ' + fmt(py(c.y[i]));
                pen = true;
            }
            out << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\"1.5\""
                << (c.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
        }
        const double ly = kTop + 14 + 18 * static_cast<double>(k);
        out << "<line x1=\"" << fmt(kWidth - kRight + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
            << fmt(kWidth - kRight + 30) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << c.color << "\""
            << (c.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
        out << "<text x=\"" << fmt(kWidth - kRight + 36) << "\" y=\"" << fmt(ly) << "\">" << escape(c.label)
            << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace trendboot
