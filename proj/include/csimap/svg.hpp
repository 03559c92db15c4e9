// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "csimap/eval.hpp"

namespace csimap {

// Self-contained vector graphics, no external tooling. Heatmaps use a
// viridis-style colormap over the display range [-15, 0] dB; the seen/unseen
// diagram plots p_seen_db against gap_db with marker size growing with the
// square side, plus the perfect-knowledge point at (0, 0) and the random
// bound line.
std::string heatmap_svg(const HeatmapGrid& grid, const std::string& title);
std::string sweep_svg(std::span<const SweepEntry> entries,
                      std::span<const EvalReport> baselines, double random_bound_db,
                      const std::string& title);

void write_heatmap_svg(const std::string& path, const HeatmapGrid& grid,
                       const std::string& title);
void write_sweep_svg(const std::string& path, std::span<const SweepEntry> entries,
                     std::span<const EvalReport> baselines, double random_bound_db,
                     const std::string& title);

} // namespace csimap
