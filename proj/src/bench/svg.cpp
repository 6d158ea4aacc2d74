#include "senskit/bench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "senskit/errors.hpp"

namespace senskit::bench {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#ff7f0e", "#9467bd", "#2ca02c", "#8c564b", "#e377c2"};
constexpr int kMarginLeft = 80;
constexpr int kMarginRight = 150;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 60;

const char* color(std::size_t k) { return kPalette[k % std::size(kPalette)]; }

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;
    double pixel_lo = 0.0;
    double pixel_hi = 1.0;

    double map(double v) const {
        const double a = log ? std::log10(v) : v;
        const double b0 = log ? std::log10(lo) : lo;
        const double b1 = log ? std::log10(hi) : hi;
        const double f = b1 > b0 ? (a - b0) / (b1 - b0) : 0.5;
        return pixel_lo + f * (pixel_hi - pixel_lo);
    }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
                const double v = std::pow(10.0, e);
                if (v >= lo * 0.999 && v <= hi * 1.001) out.push_back(v);
            }
            if (out.empty()) out = {lo, hi};
            return out;
        }
        for (int k = 0; k <= 5; ++k) out.push_back(lo + (hi - lo) * k / 5.0);
        return out;
    }
};

Axis make_axis(double lo, double hi, bool log, double p0, double p1) {
    Axis a;
    a.log = log;
    a.pixel_lo = p0;
    a.pixel_hi = p1;
    if (!(hi > lo)) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        lo -= pad;
        hi += pad;
        if (log && lo <= 0.0) lo = hi / 100.0;
    }
    if (log) {
        a.lo = lo;
        a.hi = hi;
    } else {
        const double pad = 0.05 * (hi - lo);
        a.lo = lo - pad;
        a.hi = hi + pad;
    }
    return a;
}

void frame(std::ostringstream& svg, int width, int height, const std::string& title, const std::string& x_label,
           const std::string& y_label) {
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
        << "</text>\n";
    svg << "<text x=\"" << (kMarginLeft + width - kMarginRight) / 2 << "\" y=\"" << height - 15
        << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    svg << "<text transform=\"translate(18," << height / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(y_label) << "</text>\n";
    svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
        << width - kMarginLeft - kMarginRight << "\" height=\"" << height - kMarginTop - kMarginBottom
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
}

void y_ticks(std::ostringstream& svg, const Axis& y, int width) {
    for (double v : y.ticks()) {
        const double py = y.map(v);
        svg << "<line x1=\"" << kMarginLeft << "\" x2=\"" << width - kMarginRight << "\" y1=\"" << py << "\" y2=\""
            << py << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << num(v)
            << "</text>\n";
    }
}

void legend(std::ostringstream& svg, const std::vector<std::string>& labels, int width) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const int y = kMarginTop + 10 + static_cast<int>(k) * 18;
        svg << "<rect x=\"" << width - kMarginRight + 12 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
            << color(k) << "\"/>\n";
        svg << "<text x=\"" << width - kMarginRight + 30 << "\" y=\"" << y + 2 << "\">" << escape(labels[k])
            << "</text>\n";
    }
}

}  // namespace

std::string render_line_plot(const LinePlot& plot, int width, int height) {
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -xmin;
    double ymin = xmin;
    double ymax = -xmin;
    for (const auto& s : plot.series) {
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if (!std::isfinite(s.y[k]) || (plot.log_y && s.y[k] <= 0.0)) continue;
            xmin = std::min(xmin, s.x[k]);
            xmax = std::max(xmax, s.x[k]);
            ymin = std::min(ymin, s.y[k]);
            ymax = std::max(ymax, s.y[k]);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = plot.log_y ? 0.1 : 0.0;
        ymax = 1.0;
    }
    const Axis x = make_axis(xmin, xmax, false, kMarginLeft, width - kMarginRight);
    const Axis y = make_axis(ymin, ymax, plot.log_y, height - kMarginBottom, kMarginTop);

    std::ostringstream svg;
    frame(svg, width, height, plot.title, plot.x_label, plot.y_label);
    y_ticks(svg, y, width);
    for (double v : x.ticks()) {
        svg << "<text x=\"" << x.map(v) << "\" y=\"" << height - kMarginBottom + 16 << "\" text-anchor=\"middle\">"
            << num(v) << "</text>\n";
    }
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        labels.push_back(s.label);
        // Break the polyline wherever a point cannot be drawn.
        std::ostringstream pts;
        bool open = false;
        auto flush = [&] {
            if (open) {
                svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << color(k) << "\" points=\""
                    << pts.str() << "\"/>\n";
            }
            pts.str("");
            open = false;
        };
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (plot.log_y && s.y[i] <= 0.0)) {
                flush();
                continue;
            }
            pts << x.map(s.x[i]) << ',' << y.map(s.y[i]) << ' ';
            open = true;
        }
        flush();
    }
    legend(svg, labels, width);
    svg << "</svg>\n";
    return svg.str();
}

std::string render_box_plot(const BoxPlot& plot, int width, int height) {
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -ymin;
    for (const auto& g : plot.groups) {
        for (const auto& b : g.boxes) {
            ymin = std::min(ymin, b.whisker_lo);
            ymax = std::max(ymax, b.whisker_hi);
        }
    }
    if (!std::isfinite(ymin)) {
        ymin = 0.0;
        ymax = 1.0;
    }
    const Axis y = make_axis(ymin, ymax, false, height - kMarginBottom, kMarginTop);
    std::ostringstream svg;
    frame(svg, width, height, plot.title, "", plot.y_label);
    y_ticks(svg, y, width);

    const double plot_w = width - kMarginLeft - kMarginRight;
    const double group_w = plot.groups.empty() ? plot_w : plot_w / static_cast<double>(plot.groups.size());
    for (std::size_t g = 0; g < plot.groups.size(); ++g) {
        const auto& group = plot.groups[g];
        const double gx = kMarginLeft + group_w * static_cast<double>(g);
        svg << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << height - kMarginBottom + 16
            << "\" text-anchor=\"middle\">" << escape(group.label) << "</text>\n";
        const double slot = group_w / static_cast<double>(std::max<std::size_t>(1, group.boxes.size()) + 1);
        for (std::size_t k = 0; k < group.boxes.size(); ++k) {
            const auto& b = group.boxes[k];
            const double cx = gx + slot * static_cast<double>(k + 1);
            const double half = std::max(2.0, slot * 0.35);
            svg << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << y.map(b.whisker_lo) << "\" y2=\""
                << y.map(b.whisker_hi) << "\" stroke=\"" << color(k) << "\"/>\n";
            svg << "<rect x=\"" << cx - half << "\" y=\"" << y.map(b.q3) << "\" width=\"" << 2 * half
                << "\" height=\"" << std::max(0.5, y.map(b.q1) - y.map(b.q3)) << "\" fill=\"" << color(k)
                << "\" fill-opacity=\"0.35\" stroke=\"" << color(k) << "\"/>\n";
            svg << "<line x1=\"" << cx - half << "\" x2=\"" << cx + half << "\" y1=\"" << y.map(b.median)
                << "\" y2=\"" << y.map(b.median) << "\" stroke=\"black\"/>\n";
        }
    }
    legend(svg, plot.series_labels, width);
    svg << "</svg>\n";
    return svg.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace senskit::bench
