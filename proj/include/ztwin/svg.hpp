#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ztwin/errors.hpp"
#include "ztwin/num.hpp"

namespace ztwin::svg {

struct LineSeries {
    std::string label;
    std::string color;
    std::vector<double> values;
};

namespace detail {

inline std::string num(double v) { return format_double(v); }

inline void append_text(std::string& out, double x, double y, const std::string& text,
                        const std::string& anchor = "start", int size = 12) {
    out += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + text + "</text>\n";
}

} // namespace detail

// Self-contained line chart: one polyline per series over the step index.
inline std::string line_chart(const std::string& title, const std::string& y_label,
                              const std::vector<LineSeries>& series) {
    if (series.empty() || series.front().values.empty()) {
        throw InsufficientData("nothing to chart");
    }
    const double width = 860.0, height = 420.0;
    const double left = 64.0, right = 840.0, top = 48.0, bottom = 372.0;

    std::size_t steps = 0;
    double lo = 1e300, hi = -1e300;
    for (const auto& s : series) {
        steps = std::max(steps, s.values.size());
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi <= lo) hi = lo + 1.0;
    const double pad = (hi - lo) * 0.06;
    lo -= pad;
    hi += pad;

    auto xp = [&](std::size_t i) {
        return left + (right - left) * (steps > 1 ? static_cast<double>(i) / (steps - 1) : 0.5);
    };
    auto yp = [&](double v) { return bottom - (bottom - top) * (v - lo) / (hi - lo); };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(width) +
                      "\" height=\"" + detail::num(height) + "\" viewBox=\"0 0 " + detail::num(width) +
                      " " + detail::num(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    detail::append_text(out, width / 2, 24, title, "middle", 15);

    // Axes with five horizontal gridlines.
    for (int g = 0; g <= 4; ++g) {
        const double v = lo + (hi - lo) * g / 4.0;
        const double y = yp(v);
        out += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(y) + "\" x2=\"" +
               detail::num(right) + "\" y2=\"" + detail::num(y) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        detail::append_text(out, left - 8, y + 4, format_double(std::round(v)), "end", 11);
    }
    out += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(top) + "\" x2=\"" +
           detail::num(left) + "\" y2=\"" + detail::num(bottom) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(bottom) + "\" x2=\"" +
           detail::num(right) + "\" y2=\"" + detail::num(bottom) + "\" stroke=\"black\"/>\n";
    detail::append_text(out, (left + right) / 2, height - 10, "step", "middle", 12);
    detail::append_text(out, 16, (top + bottom) / 2, y_label, "middle", 12);

    double legend_x = left + 12;
    for (const auto& s : series) {
        std::string points;
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            if (i > 0) points += " ";
            points += detail::num(xp(i)) + "," + detail::num(yp(s.values[i]));
        }
        out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" +
               points + "\"/>\n";
        out += "<rect x=\"" + detail::num(legend_x) + "\" y=\"" + detail::num(top - 14) +
               "\" width=\"12\" height=\"4\" fill=\"" + s.color + "\"/>\n";
        detail::append_text(out, legend_x + 16, top - 8, s.label, "start", 11);
        legend_x += 16.0 * static_cast<double>(s.label.size()) * 0.55 + 48;
    }
    out += "</svg>\n";
    return out;
}

// Labeled vertical bars with the value printed above each bar.
inline std::string bar_chart(const std::string& title, const std::string& y_label,
                             const std::vector<std::string>& labels,
                             const std::vector<double>& values) {
    if (labels.empty() || labels.size() != values.size()) {
        throw InsufficientData("bar chart needs one value per label");
    }
    const double width = 720.0, height = 420.0;
    const double left = 64.0, right = 700.0, top = 48.0, bottom = 348.0;
    const double hi = *std::max_element(values.begin(), values.end()) * 1.08 + 1.0;

    auto yp = [&](double v) { return bottom - (bottom - top) * v / hi; };
    const double slot = (right - left) / static_cast<double>(values.size());
    const double bar_w = slot * 0.6;

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(width) +
                      "\" height=\"" + detail::num(height) + "\" viewBox=\"0 0 " + detail::num(width) +
                      " " + detail::num(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    detail::append_text(out, width / 2, 24, title, "middle", 15);
    for (int g = 0; g <= 4; ++g) {
        const double v = hi * g / 4.0;
        out += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(yp(v)) + "\" x2=\"" +
               detail::num(right) + "\" y2=\"" + detail::num(yp(v)) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        detail::append_text(out, left - 8, yp(v) + 4, format_double(std::round(v)), "end", 11);
    }
    out += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(top) + "\" x2=\"" +
           detail::num(left) + "\" y2=\"" + detail::num(bottom) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(bottom) + "\" x2=\"" +
           detail::num(right) + "\" y2=\"" + detail::num(bottom) + "\" stroke=\"black\"/>\n";
    detail::append_text(out, 16, (top + bottom) / 2, y_label, "middle", 12);

    for (std::size_t i = 0; i < values.size(); ++i) {
        const double x = left + slot * (static_cast<double>(i) + 0.2);
        out += "<rect x=\"" + detail::num(x) + "\" y=\"" + detail::num(yp(values[i])) + "\" width=\"" +
               detail::num(bar_w) + "\" height=\"" + detail::num(bottom - yp(values[i])) +
               "\" fill=\"#4878a8\"/>\n";
        detail::append_text(out, x + bar_w / 2, yp(values[i]) - 6, format_double(values[i]), "middle",
                            11);
        detail::append_text(out, x + bar_w / 2, bottom + 16, labels[i], "middle", 11);
    }
    out += "</svg>\n";
    return out;
}

} // namespace ztwin::svg
