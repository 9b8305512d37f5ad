#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "cogsteer/core/svg.hpp"
#include "cogsteer/trajectory/monitor.hpp"

namespace cogsteer {

// Tokens flow left to right in wrapped lines; each sits on a box colored by
// its probe value (0 blue, 0.5 white, 1 red).
inline std::string render_highlight(const TrajectoryRecord & record, const std::vector<std::string> & token_texts,
                                    const std::string & title = "") {
    record.validate();
    if (token_texts.size() != record.values.size()) {
        throw ValidationError("render_highlight: " + std::to_string(token_texts.size()) + " token texts for " +
                              std::to_string(record.values.size()) + " values");
    }
    constexpr int width = 640;
    constexpr int margin = 12;
    constexpr int line_h = 22;
    constexpr int char_w = 7;
    constexpr int top = 36;

    struct Box {
        int x, y, w;
    };
    std::vector<Box> boxes;
    int x = margin;
    int y = top;
    for (const auto & t : token_texts) {
        const int w = std::max(12, static_cast<int>(t.size()) * char_w + 6);
        if (x + w > width - margin && x > margin) {
            x = margin;
            y += line_h;
        }
        boxes.push_back({x, y, w});
        x += w + 3;
    }
    const int legend_y = y + line_h + 14;
    const int height = legend_y + 40;

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                      std::to_string(height) + "\" font-family=\"monospace\" font-size=\"12\">\n<!-- data\n";
    out += "prompt_id=" + svg::comment_safe(record.prompt_id) + " condition=" + svg::comment_safe(record.condition) +
           " layer=" + std::to_string(record.layer) + "\nindex,token,value\n";
    for (std::size_t i = 0; i < record.values.size(); ++i) {
        out += std::to_string(i) + "," + std::to_string(record.tokens[i]) + "," + fmt_num(record.values[i]) + "\n";
    }
    out += "-->\n<rect width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
           "\" fill=\"white\"/>\n";
    const std::string heading = title.empty() ? "P(bias-salient) per generated token" : title;
    out += "<text x=\"" + std::to_string(margin) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" +
           svg::escape(heading) + "</text>\n";
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto & b = boxes[i];
        out += "<rect class=\"tok\" x=\"" + std::to_string(b.x) + "\" y=\"" + std::to_string(b.y) + "\" width=\"" +
               std::to_string(b.w) + "\" height=\"18\" fill=\"" + svg::rgb(svg::ramp(record.values[i])) +
               "\"><title>" + fmt_fixed(record.values[i], 4) + "</title></rect>\n";
        out += "<text x=\"" + std::to_string(b.x + 3) + "\" y=\"" + std::to_string(b.y + 13) + "\">" +
               svg::escape(token_texts[i]) + "</text>\n";
    }
    out += "<defs><linearGradient id=\"ramp\" x1=\"0\" x2=\"1\" y1=\"0\" y2=\"0\">"
           "<stop offset=\"0\" stop-color=\"" + svg::rgb(svg::ramp(0.0)) + "\"/>"
           "<stop offset=\"0.5\" stop-color=\"" + svg::rgb(svg::ramp(0.5)) + "\"/>"
           "<stop offset=\"1\" stop-color=\"" + svg::rgb(svg::ramp(1.0)) + "\"/></linearGradient></defs>\n";
    const std::string ly = std::to_string(legend_y);
    out += "<rect class=\"legend\" x=\"" + std::to_string(margin + 40) + "\" y=\"" + ly +
           "\" width=\"200\" height=\"12\" fill=\"url(#ramp)\" stroke=\"gray\"/>\n";
    out += "<text x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(legend_y + 10) +
           "\" font-family=\"sans-serif\">0.0</text>\n";
    out += "<text x=\"" + std::to_string(margin + 132) + "\" y=\"" + std::to_string(legend_y + 26) +
           "\" font-family=\"sans-serif\" text-anchor=\"middle\">0.5</text>\n";
    out += "<text x=\"" + std::to_string(margin + 248) + "\" y=\"" + std::to_string(legend_y + 10) +
           "\" font-family=\"sans-serif\">1.0 P(bias-salient)</text>\n";
    out += "</svg>\n";
    return out;
}

} // namespace cogsteer
