#include "evsim/svg.hpp"

#include "evsim/errors.hpp"
#include "evsim/strfmt.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace evsim {

namespace {

std::string px(double v) {
    // One decimal is plenty for pixel coordinates and keeps files small.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

SvgCanvas::SvgCanvas(double width, double height) : width_(width), height_(height) {}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                     double stroke_width, const std::string& dash) {
    body_ += "<line x1=\"" + px(x1) + "\" y1=\"" + px(y1) + "\" x2=\"" + px(x2) + "\" y2=\"" +
             px(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + px(stroke_width) + "\"";
    if (!dash.empty()) body_ += " stroke-dasharray=\"" + dash + "\"";
    body_ += "/>\n";
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& points,
                         const std::string& stroke, double stroke_width, const std::string& dash) {
    if (points.size() < 2) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
             px(stroke_width) + "\"";
    if (!dash.empty()) body_ += " stroke-dasharray=\"" + dash + "\"";
    body_ += " points=\"";
    for (const auto& [x, y] : points) body_ += px(x) + "," + px(y) + " ";
    body_ += "\"/>\n";
}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill,
                     const std::string& stroke, double stroke_width) {
    body_ += "<rect x=\"" + px(x) + "\" y=\"" + px(y) + "\" width=\"" + px(w) + "\" height=\"" +
             px(h) + "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
             px(stroke_width) + "\"/>\n";
}

void SvgCanvas::text(double x, double y, const std::string& content, double size,
                     const std::string& anchor, const std::string& fill, double rotate_deg) {
    body_ += "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-size=\"" + px(size) +
             "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\" fill=\"" + fill + "\"";
    if (rotate_deg != 0.0) {
        body_ += " transform=\"rotate(" + px(rotate_deg) + " " + px(x) + " " + px(y) + ")\"";
    }
    body_ += ">" + escape(content) + "</text>\n";
}

std::string SvgCanvas::str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(width_) << "\" height=\""
        << px(height_) << "\" viewBox=\"0 0 " << px(width_) << " " << px(height_) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << px(width_) << "\" height=\"" << px(height_)
        << "\" fill=\"#ffffff\"/>\n"
        << body_ << "</svg>\n";
    return out.str();
}

void SvgCanvas::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write SVG file: " + path);
    out << str();
}

std::vector<double> nice_ticks(double lo, double hi, int target_count) {
    if (hi <= lo) return {lo};
    const double raw_step = (hi - lo) / std::max(1, target_count - 1);
    const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
    double step = mag;
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        if (mag * m >= raw_step) {
            step = mag * m;
            break;
        }
    }
    std::vector<double> ticks;
    double t = std::ceil(lo / step) * step;
    for (; t <= hi + step * 1e-9; t += step) ticks.push_back(t);
    return ticks;
}

std::string tick_label(double v) {
    if (std::abs(v) >= 1000.0 && std::fmod(v, 1000.0) == 0.0) {
        return num_str(v / 1000.0) + "k";
    }
    return num_str(v);
}

} // namespace evsim
