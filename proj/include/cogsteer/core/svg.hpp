#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cogsteer/core/format.hpp"

namespace cogsteer::svg {

inline std::string escape(const std::string & s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// Comment bodies may not contain "--".
inline std::string comment_safe(const std::string & s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += s[i];
        if (s[i] == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            out += ' ';
        }
    }
    return out;
}

// Blue (0) through white (0.5) to red (1), linear on each half.
inline std::array<int, 3> ramp(double v) {
    v = std::clamp(std::isfinite(v) ? v : 0.5, 0.0, 1.0);
    if (v <= 0.5) {
        const int c = static_cast<int>(std::lround(255.0 * v / 0.5));
        return {c, c, 255};
    }
    const int c = static_cast<int>(std::lround(255.0 * (1.0 - v) / 0.5));
    return {255, c, c};
}

inline std::string rgb(const std::array<int, 3> & c) {
    return "rgb(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]) + ")";
}

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band; // optional half-width around y
};

inline const char * palette(std::size_t i) {
    static const char * colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return colors[i % 6];
}

inline std::string line_chart(const std::string & title, const std::string & xlabel, const std::string & ylabel,
                              const std::vector<Series> & series, std::optional<std::pair<double, double>> yrange = {}) {
    constexpr double W = 480, H = 300, L = 60, R = 20, T = 30, B = 45;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto & s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double half = s.band.size() == s.x.size() ? s.band[i] : 0.0;
            if (first) {
                x0 = x1 = s.x[i];
                y0 = s.y[i] - half;
                y1 = s.y[i] + half;
                first = false;
            }
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i] - half);
            y1 = std::max(y1, s.y[i] + half);
        }
    }
    if (yrange) {
        y0 = yrange->first;
        y1 = yrange->second;
    }
    if (x1 == x0) {
        x1 = x0 + 1;
    }
    if (y1 == y0) {
        y1 = y0 + 1;
    }
    auto px = [&](double x) { return fmt_fixed(L + (x - x0) / (x1 - x0) * (W - L - R), 2); };
    auto py = [&](double y) { return fmt_fixed(H - B - (y - y0) / (y1 - y0) * (H - T - B), 2); };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"300\" font-family=\"sans-serif\" "
                      "font-size=\"11\">\n<!-- data\n";
    for (const auto & s : series) {
        out += comment_safe(s.name) + ": x,y" + (s.band.empty() ? "" : ",band") + "\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out += fmt_num(s.x[i]) + "," + fmt_num(s.y[i]);
            if (s.band.size() == s.x.size()) {
                out += "," + fmt_num(s.band[i]);
            }
            out += "\n";
        }
    }
    out += "-->\n<rect width=\"480\" height=\"300\" fill=\"white\"/>\n";
    out += "<text x=\"240\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" + escape(title) + "</text>\n";
    out += "<line x1=\"60\" y1=\"255\" x2=\"460\" y2=\"255\" stroke=\"black\"/>\n";
    out += "<line x1=\"60\" y1=\"30\" x2=\"60\" y2=\"255\" stroke=\"black\"/>\n";
    out += "<text x=\"260\" y=\"290\" text-anchor=\"middle\">" + escape(xlabel) + "</text>\n";
    out += "<text x=\"14\" y=\"142\" text-anchor=\"middle\" transform=\"rotate(-90 14 142)\">" + escape(ylabel) +
           "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = y0 + (y1 - y0) * k / 4.0;
        const double xv = x0 + (x1 - x0) * k / 4.0;
        out += "<text x=\"55\" y=\"" + py(yv) + "\" text-anchor=\"end\">" + fmt_fixed(yv, 2) + "</text>\n";
        out += "<text x=\"" + px(xv) + "\" y=\"270\" text-anchor=\"middle\">" + fmt_fixed(xv, 1) + "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto & s = series[si];
        if (s.x.empty()) {
            continue;
        }
        if (s.band.size() == s.x.size()) {
            std::string pts;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                pts += px(s.x[i]) + "," + py(s.y[i] + s.band[i]) + " ";
            }
            for (std::size_t i = s.x.size(); i-- > 0;) {
                pts += px(s.x[i]) + "," + py(s.y[i] - s.band[i]) + " ";
            }
            out += "<polygon points=\"" + pts + "\" fill=\"" + palette(si) + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        }
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            pts += px(s.x[i]) + "," + py(s.y[i]) + " ";
        }
        out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + palette(si) + "\" stroke-width=\"1.5\"/>\n";
        out += "<text x=\"" + std::to_string(70 + 90 * static_cast<int>(si % 4)) + "\" y=\"" +
               std::to_string(42 + 12 * static_cast<int>(si / 4)) + "\" fill=\"" + palette(si) + "\">" +
               escape(s.name) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

// Cells colored on the blue-white-red ramp after mapping [vmin, vmax] to [0, 1].
inline std::string heatmap(const std::string & title, const std::vector<std::string> & row_labels,
                           const std::vector<std::string> & col_labels,
                           const std::vector<std::vector<double>> & values, double vmin, double vmax) {
    const int cell_w = std::max(8, 400 / std::max<int>(1, static_cast<int>(col_labels.size())));
    const int cell_h = 22;
    const int left = 90;
    const int top = 30;
    const int width = left + cell_w * static_cast<int>(col_labels.size()) + 20;
    const int height = top + cell_h * static_cast<int>(row_labels.size()) + 50;
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                      std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"10\">\n<!-- data\nrow";
    for (const auto & c : col_labels) {
        out += "," + comment_safe(c);
    }
    out += "\n";
    for (std::size_t r = 0; r < values.size(); ++r) {
        out += comment_safe(row_labels.at(r));
        for (double v : values[r]) {
            out += "," + fmt_num(v);
        }
        out += "\n";
    }
    out += "-->\n<rect width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
           "\" fill=\"white\"/>\n";
    out += "<text x=\"" + std::to_string(width / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" +
           escape(title) + "</text>\n";
    const double span = vmax > vmin ? vmax - vmin : 1.0;
    for (std::size_t r = 0; r < values.size(); ++r) {
        const int y = top + cell_h * static_cast<int>(r);
        out += "<text x=\"" + std::to_string(left - 4) + "\" y=\"" + std::to_string(y + 15) +
               "\" text-anchor=\"end\">" + escape(row_labels[r]) + "</text>\n";
        for (std::size_t c = 0; c < values[r].size(); ++c) {
            const double v = values[r][c];
            out += "<rect x=\"" + std::to_string(left + cell_w * static_cast<int>(c)) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(cell_w) + "\" height=\"" + std::to_string(cell_h) + "\" fill=\"" +
                   rgb(ramp((v - vmin) / span)) + "\"><title>" + fmt_num(v) + "</title></rect>\n";
        }
    }
    const int label_y = top + cell_h * static_cast<int>(values.size()) + 14;
    const std::size_t stride = std::max<std::size_t>(1, col_labels.size() / 10);
    for (std::size_t c = 0; c < col_labels.size(); c += stride) {
        out += "<text x=\"" + std::to_string(left + cell_w * static_cast<int>(c) + cell_w / 2) + "\" y=\"" +
               std::to_string(label_y) + "\" text-anchor=\"middle\">" + escape(col_labels[c]) + "</text>\n";
    }
    out += "<text x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(label_y + 18) + "\">scale: " +
           fmt_num(vmin) + " (blue) to " + fmt_num(vmax) + " (red)</text>\n</svg>\n";
    return out;
}

} // namespace cogsteer::svg
