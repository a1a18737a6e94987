#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rch::svgplot {

namespace {

constexpr double W = 900, H = 600;
constexpr double ML = 70, MR = 25, MT = 45, MB = 55;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// round the raw span / n to a 1-2-5 step
double nice_step(double span, int n) {
    const double raw = span / n;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    const double step = frac < 1.5 ? 1.0 : frac < 3.5 ? 2.0 : frac < 7.5 ? 5.0 : 10.0;
    return step * mag;
}

}  // namespace

std::string render(const std::vector<Series>& series, const std::string& title,
                   const std::string& xlabel, const std::string& ylabel) {
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    for (const Series& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            xlo = std::min(xlo, s.x[k]);
            xhi = std::max(xhi, s.x[k]);
            ylo = std::min(ylo, s.y[k]);
            yhi = std::max(yhi, s.y[k]);
        }
    if (!(xhi > xlo)) xhi = xlo + 1.0;
    if (!(yhi > ylo)) {
        ylo -= 0.5;
        yhi += 0.5;
    }
    const double ypad = 0.05 * (yhi - ylo);
    ylo -= ypad;
    yhi += ypad;

    auto px = [&](double x) { return ML + (x - xlo) / (xhi - xlo) * (W - ML - MR); };
    auto py = [&](double y) { return H - MB - (y - ylo) / (yhi - ylo) * (H - MT - MB); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
       << title << "</text>\n";

    // axes box
    os << "<rect x=\"" << ML << "\" y=\"" << MT << "\" width=\"" << W - ML - MR
       << "\" height=\"" << H - MT - MB << "\" fill=\"none\" stroke=\"black\"/>\n";

    const double xstep = nice_step(xhi - xlo, 6), ystep = nice_step(yhi - ylo, 6);
    for (double x = std::ceil(xlo / xstep) * xstep; x <= xhi + 1e-12 * xstep; x += xstep) {
        os << "<line x1=\"" << px(x) << "\" y1=\"" << H - MB << "\" x2=\"" << px(x)
           << "\" y2=\"" << H - MB + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << px(x) << "\" y=\"" << H - MB + 20
           << "\" text-anchor=\"middle\" font-size=\"11\">" << num(x) << "</text>\n";
    }
    for (double y = std::ceil(ylo / ystep) * ystep; y <= yhi + 1e-12 * ystep; y += ystep) {
        os << "<line x1=\"" << ML - 5 << "\" y1=\"" << py(y) << "\" x2=\"" << ML
           << "\" y2=\"" << py(y) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << ML - 8 << "\" y=\"" << py(y) + 4
           << "\" text-anchor=\"end\" font-size=\"11\">" << num(y) << "</text>\n";
    }
    os << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 12
       << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
    os << "<text x=\"18\" y=\"" << (MT + H - MB) / 2
       << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
       << (MT + H - MB) / 2 << ")\">" << ylabel << "</text>\n";

    int li = 0;
    for (const Series& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < s.x.size(); ++k)
            os << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
        os << "\"/>\n";
        if (!s.label.empty()) {
            os << "<text x=\"" << W - MR - 8 << "\" y=\"" << MT + 18 + 16 * li
               << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << s.color << "\">"
               << s.label << "</text>\n";
            ++li;
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace rch::svgplot
