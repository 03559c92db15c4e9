// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csimap/dataset.hpp"
#include "csimap/estimator.hpp"
#include "csimap/types.hpp"

namespace csimap {

// Spatial train/test partition by cell parity: position (x, y) lands in the
// half-open cell [k*a, (k+1)*a) per axis relative to the origin, z ignored.
struct CheckerboardSplit {
    double square_side = 2.0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    int parity_for_train = 0;
    void validate() const;
};

int cell_parity(const CheckerboardSplit& split, double x, double y);
bool is_train(const CheckerboardSplit& split, const Vec3& position);

struct SplitIndices {
    std::vector<std::size_t> train, test;
};
SplitIndices checkerboard_split(std::span<const SamplePair> pairs,
                                const CheckerboardSplit& split);
SplitIndices checkerboard_split(std::span<const Vec3> positions, const CheckerboardSplit& split);

struct PointPower {
    Vec3 position;
    double p = 0.0; // linear, in [0, 1]
    bool seen = false;
};

struct EvalReport {
    std::string estimator_id;
    double a = 0.0;
    double p_seen_db = 0.0;
    double p_unseen_db = 0.0;
    double gap_db = 0.0; // p_unseen_db - p_seen_db
    std::vector<PointPower> per_point;
};

// Linear-domain means over the two sides of the split. An estimator carrying
// a provenance fingerprint must have been built from exactly the train side;
// a mismatch (e.g. trained on the test side) is a DataError, as is an empty
// subset.
EvalReport evaluate_seen_unseen(const Estimator& estimator, const CheckerboardSplit& split,
                                std::span<const SamplePair> pairs,
                                ExecMode exec = ExecMode::parallel);

using EstimatorFactory = std::function<std::unique_ptr<Estimator>(
    std::span<const SamplePair> train, std::uint64_t seed)>;

struct SweepEntry {
    double a = 0.0;
    std::optional<EvalReport> report;
    std::string error; // non-empty when this entry failed
};

// One report per square side; each entry retrains via the factory with its
// own seed derived from (base_seed, index). A failing entry (e.g. a larger
// than the dataset extent) is captured in-place and does not affect others.
std::vector<SweepEntry> sweep_grid(std::span<const SamplePair> pairs,
                                   const EstimatorFactory& factory,
                                   std::span<const double> a_values,
                                   const CheckerboardSplit& base, std::uint64_t base_seed);

std::vector<double> default_a_values(); // 0.5, 0.6, ..., 1.8

struct HeatmapCell {
    double mean_p = 0.0;
    std::size_t count = 0;
};

struct HeatmapGrid {
    double cell_size = 0.0;
    double min_x = 0.0, min_y = 0.0;
    std::size_t nx = 0, ny = 0;
    std::vector<HeatmapCell> cells; // row-major, iy*nx + ix

    const HeatmapCell& at(std::size_t ix, std::size_t iy) const { return cells[iy * nx + ix]; }
    HeatmapCell& at(std::size_t ix, std::size_t iy) { return cells[iy * nx + ix]; }
};

// Per-cell linear mean of P over the dataset bounding box. Points on the max
// edge are clamped into the last cell so every point lands in exactly one.
HeatmapGrid heatmap(std::span<const SamplePair> pairs, const Estimator& estimator,
                    double cell_size, ExecMode exec = ExecMode::parallel);

// CSV layouts: reports as estimator_id,a_m,p_seen_db,p_unseen_db,gap_db;
// heatmaps as cell_x,cell_y,mean_p_db,count (occupied cells only, cell
// coordinates are the cell centers in meters).
std::string report_csv(std::span<const EvalReport> reports);
std::string heatmap_csv(const HeatmapGrid& grid);
std::vector<EvalReport> collect_reports(std::span<const SweepEntry> entries);

void write_report_csv(const std::string& path, std::span<const EvalReport> reports);
void write_heatmap_csv(const std::string& path, const HeatmapGrid& grid);

} // namespace csimap
