#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "scr/analytics.hpp"
#include "scr/error.hpp"

namespace scr {

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

/// Largest of 1/2/5 * 10^k not exceeding the raw step, for readable axes.
inline double nice_step(double range, int target_ticks) {
    const double raw = range / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(std::max(raw, 1e-9))));
    for (const double m : {1.0, 2.0, 5.0}) {
        if (raw <= m * mag) return m * mag;
    }
    return 10.0 * mag;
}

}  // namespace detail

struct PlotCurve {
    std::string label;
    std::vector<double> values;  // one per bin
    std::string color = "#1f77b4";
    bool dashed = false;
};

/// Histogram bars with smooth overlay curves, one value per calendar bin.
/// Curves are drawn as the display spline through bin midpoints.
inline void write_timeseries_svg(const std::string& path,
                                 const TimeSeries& axis,
                                 const std::vector<std::int64_t>& bars,
                                 const std::vector<PlotCurve>& curves,
                                 const std::string& title) {
    if (axis.size() == 0) fail("plot: empty time series");
    if (bars.size() != axis.size())
        fail("plot: bar count does not match bin count");
    for (const auto& c : curves)
        if (c.values.size() != axis.size())
            fail("plot: curve '", c.label, "' does not match bin count");

    const double width = 900, height = 420;
    const double ml = 64, mr = 24, mt = 48, mb = 56;
    const double pw = width - ml - mr, ph = height - mt - mb;

    const double day0 = static_cast<double>(days_since_epoch(axis.bin_start(0)));
    const double day1 =
        static_cast<double>(days_since_epoch(axis.bin_end(axis.size() - 1)));
    const auto x_of = [&](double day) {
        return ml + (day - day0) / (day1 - day0) * pw;
    };

    double ymax = 1.0;
    for (const auto b : bars) ymax = std::max(ymax, static_cast<double>(b));
    for (const auto& c : curves)
        for (const auto v : c.values) ymax = std::max(ymax, v);
    ymax *= 1.05;
    const auto y_of = [&](double v) { return mt + ph - v / ymax * ph; };

    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write plot file '", path, "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << detail::svg_num(ml) << "\" y=\"28\" "
        << "font-family=\"sans-serif\" font-size=\"16\" fill=\"#222\">"
        << detail::svg_escape(title) << "</text>\n";

    // y grid and labels
    const double ystep = detail::nice_step(ymax, 5);
    for (double v = 0.0; v <= ymax; v += ystep) {
        const double y = y_of(v);
        out << "<line x1=\"" << detail::svg_num(ml) << "\" y1=\""
            << detail::svg_num(y) << "\" x2=\"" << detail::svg_num(ml + pw)
            << "\" y2=\"" << detail::svg_num(y)
            << "\" stroke=\"#e6e6e6\" stroke-width=\"1\"/>\n";
        char lbl[32];
        std::snprintf(lbl, sizeof lbl, "%g", v);
        out << "<text x=\"" << detail::svg_num(ml - 8) << "\" y=\""
            << detail::svg_num(y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\" "
               "text-anchor=\"end\">"
            << lbl << "</text>\n";
    }

    // bars
    for (std::size_t i = 0; i < axis.size(); ++i) {
        const double xa =
            x_of(static_cast<double>(days_since_epoch(axis.bin_start(i))));
        const double xb =
            x_of(static_cast<double>(days_since_epoch(axis.bin_end(i))));
        const double y = y_of(static_cast<double>(bars[i]));
        out << "<rect x=\"" << detail::svg_num(xa + 1) << "\" y=\""
            << detail::svg_num(y) << "\" width=\""
            << detail::svg_num(std::max(0.0, xb - xa - 2)) << "\" height=\""
            << detail::svg_num(mt + ph - y) << "\" fill=\"#c8cdd4\"/>\n";
    }

    // x ticks at year starts
    const int year_lo = axis.bin_start(0).year;
    const int year_hi = axis.bin_end(axis.size() - 1).year;
    const int year_step = std::max(1, (year_hi - year_lo) / 10);
    for (int y = year_lo; y <= year_hi; y += year_step) {
        const double day = static_cast<double>(days_since_epoch(Date{y, 1, 1}));
        if (day < day0 || day > day1) continue;
        const double x = x_of(day);
        out << "<line x1=\"" << detail::svg_num(x) << "\" y1=\""
            << detail::svg_num(mt + ph) << "\" x2=\"" << detail::svg_num(x)
            << "\" y2=\"" << detail::svg_num(mt + ph + 5)
            << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << detail::svg_num(x) << "\" y=\""
            << detail::svg_num(mt + ph + 20)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\" "
               "text-anchor=\"middle\">"
            << y << "</text>\n";
    }
    out << "<line x1=\"" << detail::svg_num(ml) << "\" y1=\""
        << detail::svg_num(mt + ph) << "\" x2=\"" << detail::svg_num(ml + pw)
        << "\" y2=\"" << detail::svg_num(mt + ph)
        << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";

    // overlay curves
    for (const auto& c : curves) {
        out << "<path d=\"";
        if (axis.size() >= 2) {
            std::vector<double> xs(axis.size());
            for (std::size_t i = 0; i < axis.size(); ++i)
                xs[i] = axis.bin_mid_days(i);
            const SplineCurve spline = SplineCurve::fit(xs, c.values);
            const double t0 = xs.front(), t1 = xs.back();
            const int steps = static_cast<int>(axis.size()) * 8;
            for (int s = 0; s <= steps; ++s) {
                const double t = t0 + (t1 - t0) * s / steps;
                const double v = std::max(0.0, spline.evaluate(t));
                out << (s == 0 ? "M" : " L") << detail::svg_num(x_of(t)) << ","
                    << detail::svg_num(y_of(std::min(v, ymax)));
            }
        } else {
            const double t = axis.bin_mid_days(0);
            out << "M" << detail::svg_num(x_of(t) - 10) << ","
                << detail::svg_num(y_of(c.values[0])) << " L"
                << detail::svg_num(x_of(t) + 10) << ","
                << detail::svg_num(y_of(c.values[0]));
        }
        out << "\" fill=\"none\" stroke=\"" << c.color
            << "\" stroke-width=\"2\"";
        if (c.dashed) out << " stroke-dasharray=\"7 5\"";
        out << "/>\n";
    }

    // legend
    double ly = mt + 6;
    for (const auto& c : curves) {
        const double lx = ml + pw - 200;
        out << "<line x1=\"" << detail::svg_num(lx) << "\" y1=\""
            << detail::svg_num(ly) << "\" x2=\"" << detail::svg_num(lx + 26)
            << "\" y2=\"" << detail::svg_num(ly) << "\" stroke=\"" << c.color
            << "\" stroke-width=\"2\""
            << (c.dashed ? " stroke-dasharray=\"7 5\"" : "") << "/>\n";
        out << "<text x=\"" << detail::svg_num(lx + 32) << "\" y=\""
            << detail::svg_num(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">"
            << detail::svg_escape(c.label) << "</text>\n";
        ly += 18;
    }
    out << "</svg>\n";
    if (!out) fail("failed writing plot file '", path, "'");
}

/// Correlation heatmap: blue for negative, white for zero, red for positive,
/// with the value printed in each cell.
inline void write_heatmap_svg(const std::string& path,
                              const CorrelationMatrix& cm,
                              const std::string& title) {
    const std::size_t n = cm.words.size();
    if (n == 0) fail("heatmap: empty matrix");
    const double cell = 46, ml = 140, mt = 120, mr = 20, mb = 20;
    const double width = ml + cell * static_cast<double>(n) + mr;
    const double height = mt + cell * static_cast<double>(n) + mb;

    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write plot file '", path, "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"16\" y=\"28\" font-family=\"sans-serif\" "
           "font-size=\"16\" fill=\"#222\">"
        << detail::svg_escape(title) << "</text>\n";

    const auto color = [](double v) {
        v = std::clamp(v, -1.0, 1.0);
        int r, g, b;
        if (v >= 0) {  // white -> red
            r = 255 - static_cast<int>(77 * v);
            g = 255 - static_cast<int>(231 * v);
            b = 255 - static_cast<int>(212 * v);
        } else {  // white -> blue
            r = 255 - static_cast<int>(222 * -v);
            g = 255 - static_cast<int>(153 * -v);
            b = 255 - static_cast<int>(83 * -v);
        }
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
        return std::string(buf);
    };

    for (std::size_t i = 0; i < n; ++i) {
        // row label
        out << "<text x=\"" << detail::svg_num(ml - 8) << "\" y=\""
            << detail::svg_num(mt + cell * static_cast<double>(i) + cell / 2 + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\" "
               "text-anchor=\"end\">"
            << detail::svg_escape(cm.words[i]) << "</text>\n";
        // column label, rotated
        const double cx = ml + cell * static_cast<double>(i) + cell / 2;
        out << "<text x=\"" << detail::svg_num(cx) << "\" y=\""
            << detail::svg_num(mt - 8)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\" "
               "text-anchor=\"start\" transform=\"rotate(-45 "
            << detail::svg_num(cx) << " " << detail::svg_num(mt - 8) << ")\">"
            << detail::svg_escape(cm.words[i]) << "</text>\n";
        for (std::size_t j = 0; j < n; ++j) {
            const double x = ml + cell * static_cast<double>(j);
            const double y = mt + cell * static_cast<double>(i);
            const double v = cm.values[i][j];
            out << "<rect x=\"" << detail::svg_num(x) << "\" y=\""
                << detail::svg_num(y) << "\" width=\"" << detail::svg_num(cell)
                << "\" height=\"" << detail::svg_num(cell) << "\" fill=\""
                << color(v) << "\" stroke=\"#ffffff\"/>\n";
            char lbl[16];
            std::snprintf(lbl, sizeof lbl, "%.2f", v);
            out << "<text x=\"" << detail::svg_num(x + cell / 2) << "\" y=\""
                << detail::svg_num(y + cell / 2 + 4)
                << "\" font-family=\"sans-serif\" font-size=\"11\" "
                   "fill=\"#222\" text-anchor=\"middle\">"
                << lbl << "</text>\n";
        }
    }
    out << "</svg>\n";
    if (!out) fail("failed writing plot file '", path, "'");
}

}  // namespace scr
