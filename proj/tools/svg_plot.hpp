#pragma once

// Static log-log plots of decay fits.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "exbern/decay.hpp"

namespace exbern::plot {

struct Series {
    std::string label;
    DecayFit fit;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

}  // namespace detail

/// One panel with markers for the measured deviations and a line for each fit.
inline std::string decay_svg(const std::string& title, const std::vector<Series>& series) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    const double W = 640, H = 440, L = 70, R = 170, T = 40, B = 50;

    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (const auto& w : s.fit.windows) {
            if (!(w.radius > 0.0 && w.deviation > 0.0)) continue;
            x0 = std::min(x0, std::log10(w.radius));
            x1 = std::max(x1, std::log10(w.radius));
            y0 = std::min(y0, std::log10(w.deviation));
            y1 = std::max(y1, std::log10(w.deviation));
        }
    if (x0 > x1) x0 = 0, x1 = 1, y0 = -1, y1 = 0;
    x0 = std::floor(x0 * 10) / 10 - 0.05;
    x1 = std::ceil(x1 * 10) / 10 + 0.05;
    y0 = std::floor(y0) - 0.2;
    y1 = std::ceil(y1) + 0.2;
    auto px = [&](double lx) { return L + (lx - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double ly) { return H - B - (ly - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << L << "\" y=\"22\" font-size=\"14\">" << detail::escape(title) << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(std::ceil(y0)); e <= static_cast<int>(std::floor(y1)); ++e) {
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << detail::num(py(e)) << "\" y2=\""
           << detail::num(py(e)) << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << L - 8 << "\" y=\"" << detail::num(py(e) + 4) << "\" text-anchor=\"end\">1e" << e
           << "</text>\n";
    }
    for (double r : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0}) {
        const double lx = std::log10(r);
        if (lx < x0 || lx > x1) continue;
        os << "<text x=\"" << detail::num(px(lx)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << r
           << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">radius</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* col = colors[k % 6];
        for (const auto& w : s.fit.windows) {
            if (!(w.radius > 0.0 && w.deviation > 0.0)) continue;
            os << "<circle cx=\"" << detail::num(px(std::log10(w.radius))) << "\" cy=\""
               << detail::num(py(std::log10(w.deviation))) << "\" r=\"4\" fill=\"" << col << "\"/>\n";
        }
        if (!s.fit.degenerate && std::isfinite(s.fit.exponent) && !s.fit.windows.empty()) {
            const double la = std::log10(s.fit.windows.front().radius);
            const double lb = std::log10(s.fit.windows.back().radius);
            auto fy = [&](double lx) { return (s.fit.log_constant - s.fit.exponent * lx * std::log(10.0)) / std::log(10.0); };
            os << "<line x1=\"" << detail::num(px(la)) << "\" y1=\"" << detail::num(py(fy(la))) << "\" x2=\""
               << detail::num(px(lb)) << "\" y2=\"" << detail::num(py(fy(lb))) << "\" stroke=\"" << col
               << "\" stroke-width=\"1.5\"/>\n";
        }
        const double ly = T + 16 + 34.0 * static_cast<double>(k);
        os << "<circle cx=\"" << W - R + 16 << "\" cy=\"" << ly - 4 << "\" r=\"4\" fill=\"" << col << "\"/>\n";
        os << "<text x=\"" << W - R + 26 << "\" y=\"" << ly << "\">" << detail::escape(s.label) << "</text>\n";
        os << "<text x=\"" << W - R + 26 << "\" y=\"" << ly + 14 << "\">p = "
           << (std::isfinite(s.fit.exponent) ? detail::num(s.fit.exponent) : std::string("inf")) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace exbern::plot
