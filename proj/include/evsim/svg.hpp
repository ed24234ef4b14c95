#pragma once

#include <string>
#include <utility>
#include <vector>

namespace evsim {

/// Minimal SVG writer for the report plots. Coordinates are raw pixels;
/// axis mapping lives in the chart helpers.
class SvgCanvas {
public:
    SvgCanvas(double width, double height);

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0, const std::string& dash = "");
    void polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke,
                  double stroke_width = 1.5, const std::string& dash = "");
    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "none", double stroke_width = 1.0);
    void text(double x, double y, const std::string& content, double size = 12.0,
              const std::string& anchor = "start", const std::string& fill = "#000000",
              double rotate_deg = 0.0);

    double width() const { return width_; }
    double height() const { return height_; }

    std::string str() const;
    void save(const std::string& path) const;

private:
    double width_;
    double height_;
    std::string body_;
};

/// Linear data-to-pixel mapping for one axis.
struct AxisScale {
    double data_min = 0.0;
    double data_max = 1.0;
    double px_min = 0.0;
    double px_max = 1.0;

    double operator()(double v) const {
        if (data_max == data_min) return (px_min + px_max) / 2.0;
        return px_min + (v - data_min) / (data_max - data_min) * (px_max - px_min);
    }
};

/// Round tick positions covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target_count = 6);

/// Compact tick label ("21600" -> "21600", "960000" -> "960k").
std::string tick_label(double v);

} // namespace evsim
