#pragma once

#include "pibench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace pibench {

struct PlotRange {
    double y_min = 0.0;
    double y_max = 1.0;
};

/// Smallest y-range holding every outer band; widened when flat.
inline PlotRange plot_range(const std::vector<const StatCurves*>& curves) {
    PlotRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const StatCurves* c : curves)
        for (std::size_t k = 0; k < c->size(); ++k) {
            const double w = c->std_mean[k] + c->mean_std[k] + c->std_std[k];
            r.y_min = std::min(r.y_min, c->mean[k] - w);
            r.y_max = std::max(r.y_max, c->mean[k] + w);
        }
    detail::require(std::isfinite(r.y_min) && std::isfinite(r.y_max), "plot: no data");
    if (r.y_max - r.y_min < 1e-12) {
        r.y_min -= 0.5;
        r.y_max += 0.5;
    }
    return r;
}

namespace detail {

inline std::string svg_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

} // namespace detail

/**
 * Learning curve: mean line over three nested bands mean +- s1,
 * +- (s1+s2), +- (s1+s2+s3) with s1 = Std[E], s2 = E[Std], s3 = Std[Std].
 * Layers are drawn outermost (lightest) first so darker bands sit on top.
 */
inline std::string render_curve_svg(const StatCurves& s, const PlotRange& range, const std::string& title) {
    detail::require(s.size() >= 1, "plot: empty curve");
    const double width = 640.0, height = 400.0, left = 60.0, right = 20.0, top = 30.0, bottom = 40.0;
    const double pw = width - left - right, ph = height - top - bottom;
    const std::size_t n = s.size();
    auto x_of = [&](std::size_t i) { return left + (n == 1 ? pw / 2 : pw * static_cast<double>(i) / (n - 1)); };
    auto y_of = [&](double y) { return top + ph * (range.y_max - y) / (range.y_max - range.y_min); };

    auto band = [&](int level, const char* fill) {
        auto width_at = [&](std::size_t k) {
            double w = s.std_mean[k];
            if (level >= 2) w += s.mean_std[k];
            if (level >= 3) w += s.std_std[k];
            return w;
        };
        std::string pts;
        for (std::size_t k = 0; k < n; ++k)
            pts += detail::svg_num(x_of(k)) + "," + detail::svg_num(y_of(s.mean[k] + width_at(k))) + " ";
        for (std::size_t k = n; k-- > 0;)
            pts += detail::svg_num(x_of(k)) + "," + detail::svg_num(y_of(s.mean[k] - width_at(k))) + " ";
        pts.pop_back();
        return "  <polygon class=\"band" + std::to_string(level) + "\" fill=\"" + fill + "\" points=\"" + pts +
               "\"/>\n";
    };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    svg += "  <rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg += "  <text x=\"" + detail::svg_num(left) + "\" y=\"20\" font-size=\"14\" font-family=\"sans-serif\">" +
           title + "</text>\n";
    svg += band(3, "#e0e0e0");
    svg += band(2, "#b0b0b0");
    svg += band(1, "#808080");
    std::string line;
    for (std::size_t k = 0; k < n; ++k)
        line += detail::svg_num(x_of(k)) + "," + detail::svg_num(y_of(s.mean[k])) + " ";
    line.pop_back();
    svg += "  <polyline class=\"mean\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"" + line + "\"/>\n";
    // Axes and range labels.
    svg += "  <line x1=\"" + detail::svg_num(left) + "\" y1=\"" + detail::svg_num(top + ph) + "\" x2=\"" +
           detail::svg_num(left + pw) + "\" y2=\"" + detail::svg_num(top + ph) + "\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"" + detail::svg_num(left) + "\" y1=\"" + detail::svg_num(top) + "\" x2=\"" +
           detail::svg_num(left) + "\" y2=\"" + detail::svg_num(top + ph) + "\" stroke=\"black\"/>\n";
    auto label = [&](double x, double y, const std::string& text, const char* anchor) {
        return "  <text x=\"" + detail::svg_num(x) + "\" y=\"" + detail::svg_num(y) +
               "\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\">" + text + "</text>\n";
    };
    svg += label(left - 5, top + 4, detail::svg_num(range.y_max), "end");
    svg += label(left - 5, top + ph + 4, detail::svg_num(range.y_min), "end");
    svg += label(left, top + ph + 16, "1", "middle");
    svg += label(left + pw, top + ph + 16, std::to_string(n), "middle");
    svg += label(left + pw / 2, height - 8, "iteration k", "middle");
    svg += "</svg>\n";
    return svg;
}

} // namespace pibench
