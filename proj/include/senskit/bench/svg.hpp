#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "senskit/bench/metrics.hpp"

namespace senskit::bench {

struct LineSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;  // non-positive values are dropped on a log axis
    std::vector<LineSeries> series;
};

/// One group per x position (e.g. a coefficient or an IT class), one box per
/// series within the group (e.g. a method).
struct BoxGroup {
    std::string label;
    std::vector<BoxStats> boxes;
};

struct BoxPlot {
    std::string title;
    std::string y_label;
    std::vector<std::string> series_labels;
    std::vector<BoxGroup> groups;
};

std::string render_line_plot(const LinePlot& plot, int width = 760, int height = 420);
std::string render_box_plot(const BoxPlot& plot, int width = 860, int height = 420);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace senskit::bench
