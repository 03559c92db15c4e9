// SPDX-License-Identifier: Apache-2.0

#include "csimap/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "csimap/io.hpp"
#include "csimap/types.hpp"

namespace csimap {

namespace {

constexpr double kDbFloor = -15.0;
constexpr double kDbCeil = 0.0;

// Anchor samples of the viridis map at t = 0, 1/8, ..., 1.
constexpr unsigned char kViridis[9][3] = {
    {0x44, 0x01, 0x54}, {0x47, 0x2d, 0x7b}, {0x3b, 0x52, 0x8b},
    {0x2c, 0x72, 0x8e}, {0x21, 0x91, 0x8c}, {0x28, 0xae, 0x80},
    {0x5e, 0xc9, 0x62}, {0xad, 0xdc, 0x30}, {0xfd, 0xe7, 0x25},
};

std::string viridis(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const double pos = t * 8.0;
    const auto lo = static_cast<std::size_t>(std::min(7.0, std::floor(pos)));
    const double frac = pos - static_cast<double>(lo);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(std::lround((1.0 - frac) * kViridis[lo][0] +
                                               frac * kViridis[lo + 1][0])),
                  static_cast<int>(std::lround((1.0 - frac) * kViridis[lo][1] +
                                               frac * kViridis[lo + 1][1])),
                  static_cast<int>(std::lround((1.0 - frac) * kViridis[lo][2] +
                                               frac * kViridis[lo + 1][2])));
    return buf;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
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

void rect(std::string& svg, double x, double y, double w, double h, const std::string& fill,
          const std::string& extra = "") {
    svg += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
           "\" height=\"" + fmt(h) + "\" fill=\"" + fill + "\"" + extra + "/>\n";
}

void line(std::string& svg, double x1, double y1, double x2, double y2,
          const std::string& stroke, const std::string& extra = "") {
    svg += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" +
           fmt(y2) + "\" stroke=\"" + stroke + "\"" + extra + "/>\n";
}

void text(std::string& svg, double x, double y, const std::string& s,
          const std::string& extra = "") {
    svg += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) +
           "\" font-family=\"sans-serif\" font-size=\"12\"" + extra + ">" + escape_xml(s) +
           "</text>\n";
}

void circle(std::string& svg, double cx, double cy, double r, const std::string& fill,
            const std::string& extra = "") {
    svg += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) + "\" fill=\"" +
           fill + "\"" + extra + "/>\n";
}

std::string svg_open(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" +
           fmt(h) + "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) + "\">\n";
}

} // namespace

std::string heatmap_svg(const HeatmapGrid& grid, const std::string& title) {
    const double margin_l = 60, margin_r = 100, margin_t = 40, margin_b = 50;
    const std::size_t nx = std::max<std::size_t>(grid.nx, 1);
    const std::size_t ny = std::max<std::size_t>(grid.ny, 1);
    const double target = 480.0;
    const double px_per_cell = target / static_cast<double>(std::max(nx, ny));
    const double plot_w = px_per_cell * static_cast<double>(nx);
    const double plot_h = px_per_cell * static_cast<double>(ny);
    const double width = margin_l + plot_w + margin_r;
    const double height = margin_t + plot_h + margin_b;

    std::string svg = svg_open(width, height);
    rect(svg, 0, 0, width, height, "white");
    text(svg, margin_l, margin_t - 14, title, " font-size=\"14\"");
    rect(svg, margin_l, margin_t, plot_w, plot_h, "#e8e8e8");

    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            const HeatmapCell& cell = grid.at(ix, iy);
            if (cell.count == 0)
                continue;
            const double db = std::clamp(to_db(cell.mean_p), kDbFloor, kDbCeil);
            const double t = (db - kDbFloor) / (kDbCeil - kDbFloor);
            // y axis points up: row 0 sits at the bottom
            const double x = margin_l + static_cast<double>(ix) * px_per_cell;
            const double y = margin_t + plot_h - static_cast<double>(iy + 1) * px_per_cell;
            rect(svg, x, y, px_per_cell, px_per_cell, viridis(t));
        }

    // axes with meter labels at the plot corners
    line(svg, margin_l, margin_t + plot_h, margin_l + plot_w, margin_t + plot_h, "black");
    line(svg, margin_l, margin_t, margin_l, margin_t + plot_h, "black");
    const double max_x = grid.min_x + static_cast<double>(grid.nx) * grid.cell_size;
    const double max_y = grid.min_y + static_cast<double>(grid.ny) * grid.cell_size;
    text(svg, margin_l, margin_t + plot_h + 16, fmt(grid.min_x) + " m");
    text(svg, margin_l + plot_w - 30, margin_t + plot_h + 16, fmt(max_x) + " m");
    text(svg, 8, margin_t + plot_h, fmt(grid.min_y));
    text(svg, 8, margin_t + 10, fmt(max_y));
    text(svg, margin_l + plot_w / 2 - 30, margin_t + plot_h + 34, "x (m)");
    text(svg, 8, margin_t + plot_h / 2, "y (m)");

    // colorbar
    const double bar_x = margin_l + plot_w + 24;
    const double bar_w = 16;
    const int steps = 32;
    for (int i = 0; i < steps; ++i) {
        const double t0 = static_cast<double>(i) / steps;
        const double y = margin_t + plot_h * (1.0 - static_cast<double>(i + 1) / steps);
        rect(svg, bar_x, y, bar_w, plot_h / steps + 0.5, viridis(t0 + 0.5 / steps));
    }
    for (int db = 0; db >= -15; db -= 5) {
        const double t = (static_cast<double>(db) - kDbFloor) / (kDbCeil - kDbFloor);
        const double y = margin_t + plot_h * (1.0 - t);
        line(svg, bar_x + bar_w, y, bar_x + bar_w + 4, y, "black");
        text(svg, bar_x + bar_w + 7, y + 4, fmt(db) + " dB");
    }
    svg += "</svg>\n";
    return svg;
}

std::string sweep_svg(std::span<const SweepEntry> entries,
                      std::span<const EvalReport> baselines, double random_bound_db,
                      const std::string& title) {
    double min_x = random_bound_db - 1.0, max_x = 0.8;
    double min_y = -0.8, max_y = 0.8;
    double a_min = 1e300, a_max = -1e300;
    for (const auto& e : entries) {
        if (!e.report)
            continue;
        min_x = std::min(min_x, e.report->p_seen_db - 0.5);
        min_y = std::min(min_y, e.report->gap_db - 0.5);
        max_y = std::max(max_y, e.report->gap_db + 0.5);
        a_min = std::min(a_min, e.a);
        a_max = std::max(a_max, e.a);
    }
    for (const auto& r : baselines) {
        min_x = std::min(min_x, r.p_seen_db - 0.5);
        min_y = std::min(min_y, r.gap_db - 0.5);
        max_y = std::max(max_y, r.gap_db + 0.5);
    }

    const double margin_l = 70, margin_r = 30, margin_t = 40, margin_b = 60;
    const double plot_w = 560, plot_h = 400;
    const double width = margin_l + plot_w + margin_r;
    const double height = margin_t + plot_h + margin_b;
    const auto px = [&](double x) { return margin_l + (x - min_x) / (max_x - min_x) * plot_w; };
    const auto py = [&](double y) { return margin_t + (max_y - y) / (max_y - min_y) * plot_h; };

    std::string svg = svg_open(width, height);
    rect(svg, 0, 0, width, height, "white");
    text(svg, margin_l, margin_t - 14, title, " font-size=\"14\"");
    rect(svg, margin_l, margin_t, plot_w, plot_h, "none",
         " stroke=\"black\" stroke-width=\"1\"");

    // light grid every 2 dB horizontally, 0.5 dB vertically
    for (double gx = std::ceil(min_x / 2.0) * 2.0; gx <= max_x; gx += 2.0) {
        line(svg, px(gx), margin_t, px(gx), margin_t + plot_h, "#dddddd");
        text(svg, px(gx) - 10, margin_t + plot_h + 16, fmt(gx));
    }
    for (double gy = std::ceil(min_y / 0.5) * 0.5; gy <= max_y; gy += 0.5) {
        line(svg, margin_l, py(gy), margin_l + plot_w, py(gy), "#dddddd");
        text(svg, margin_l - 38, py(gy) + 4, fmt(gy));
    }
    text(svg, margin_l + plot_w / 2 - 40, height - 16, "p_seen (dB)");
    text(svg, 10, margin_t - 4, "gap = p_unseen - p_seen (dB)");

    // random-precoding bound: vertical line
    line(svg, px(random_bound_db), margin_t, px(random_bound_db), margin_t + plot_h, "#4169e1",
         " stroke-dasharray=\"6 3\" stroke-width=\"1.5\"");
    text(svg, px(random_bound_db) + 4, margin_t + 14, "random bound", " fill=\"#4169e1\"");

    // perfect-knowledge operating point at (0, 0)
    if (0.0 >= min_x && 0.0 <= max_x && 0.0 >= min_y && 0.0 <= max_y) {
        const double cx = px(0.0), cy = py(0.0);
        svg += "<path d=\"M " + fmt(cx) + " " + fmt(cy - 6) + " L " + fmt(cx + 6) + " " +
               fmt(cy) + " L " + fmt(cx) + " " + fmt(cy + 6) + " L " + fmt(cx - 6) + " " +
               fmt(cy) + " Z\" fill=\"black\"/>\n";
        text(svg, cx + 8, cy - 8, "perfect CSI");
    }

    for (const auto& r : baselines) {
        const double s = 5.0;
        rect(svg, px(r.p_seen_db) - s, py(r.gap_db) - s, 2 * s, 2 * s, "#ff7f0e",
             " fill-opacity=\"0.85\"");
    }
    if (!baselines.empty())
        text(svg, margin_l + 10, margin_t + plot_h - 26, "squares: constant baseline",
             " fill=\"#ff7f0e\"");

    const double a_span = a_max > a_min ? a_max - a_min : 1.0;
    for (const auto& e : entries) {
        if (!e.report)
            continue;
        const double r = 3.0 + 5.0 * (e.a - a_min) / a_span;
        circle(svg, px(e.report->p_seen_db), py(e.report->gap_db), r, "#1f77b4",
               " fill-opacity=\"0.75\"");
    }
    text(svg, margin_l + 10, margin_t + plot_h - 10,
         "circles: swept square side (larger marker = larger side)", " fill=\"#1f77b4\"");

    svg += "</svg>\n";
    return svg;
}

void write_heatmap_svg(const std::string& path, const HeatmapGrid& grid,
                       const std::string& title) {
    atomic_write_file(path, heatmap_svg(grid, title));
}

void write_sweep_svg(const std::string& path, std::span<const SweepEntry> entries,
                     std::span<const EvalReport> baselines, double random_bound_db,
                     const std::string& title) {
    atomic_write_file(path, sweep_svg(entries, baselines, random_bound_db, title));
}

} // namespace csimap
