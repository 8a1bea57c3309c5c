#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace clpscf {

// One scatter point: dots for normal clips, crosses for anomalous ones,
// one color per machine ID.
struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    int color_group = 0;     // machine ID
    bool cross = false;      // anomalous marker
};

void write_scatter_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<ScatterPoint>& points);

}  // namespace clpscf
