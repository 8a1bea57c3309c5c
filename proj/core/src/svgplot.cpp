#include "clpscf/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace clpscf {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr int kPaletteSize = 10;
constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 40.0;

}  // namespace

void write_scatter_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<ScatterPoint>& points) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write SVG: " + path.string());

    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (!points.empty()) {
        xmin = xmax = points[0].x;
        ymin = ymax = points[0].y;
        for (const auto& p : points) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;

    auto sx = [&](double x) {
        return kMargin + (x - xmin) / (xmax - xmin) * (kWidth - 2.0 * kMargin);
    };
    auto sy = [&](double y) {
        return kHeight - kMargin - (y - ymin) / (ymax - ymin) * (kHeight - 2.0 * kMargin);
    };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

    for (const auto& p : points) {
        const char* color = kPalette[((p.color_group % kPaletteSize) + kPaletteSize) % kPaletteSize];
        const double x = sx(p.x);
        const double y = sy(p.y);
        if (p.cross) {
            os << "<path d=\"M" << x - 3.5 << " " << y - 3.5 << " L" << x + 3.5 << " " << y + 3.5
               << " M" << x - 3.5 << " " << y + 3.5 << " L" << x + 3.5 << " " << y - 3.5
               << "\" stroke=\"" << color << "\" stroke-width=\"1.6\"/>\n";
        } else {
            os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << color
               << "\"/>\n";
        }
    }

    // Legend: one swatch per color group present.
    std::set<int> groups;
    for (const auto& p : points) groups.insert(p.color_group);
    double ly = kMargin;
    for (int g : groups) {
        const char* color = kPalette[((g % kPaletteSize) + kPaletteSize) % kPaletteSize];
        os << "<circle cx=\"" << kWidth - kMargin - 60 << "\" cy=\"" << ly
           << "\" r=\"4\" fill=\"" << color << "\"/>\n";
        os << "<text x=\"" << kWidth - kMargin - 48 << "\" y=\"" << ly + 4
           << "\" font-family=\"sans-serif\" font-size=\"12\">id " << g << "</text>\n";
        ly += 18.0;
    }
    os << "</svg>\n";
}

}  // namespace clpscf
