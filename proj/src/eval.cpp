// SPDX-License-Identifier: Apache-2.0

#include "csimap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "csimap/errors.hpp"
#include "csimap/io.hpp"
#include "csimap/kernels.hpp"
#include "csimap/rng.hpp"
#include "csimap/sum.hpp"

namespace csimap {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

} // namespace

void CheckerboardSplit::validate() const {
    if (!(square_side > 0.0))
        throw ConfigError("checkerboard square side must be positive");
    if (parity_for_train != 0 && parity_for_train != 1)
        throw ConfigError("parity_for_train must be 0 or 1");
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y))
        throw ConfigError("checkerboard origin must be finite");
}

int cell_parity(const CheckerboardSplit& split, double x, double y) {
    const auto kx = static_cast<long long>(std::floor((x - split.origin_x) / split.square_side));
    const auto ky = static_cast<long long>(std::floor((y - split.origin_y) / split.square_side));
    return static_cast<int>(((kx + ky) % 2 + 2) % 2);
}

bool is_train(const CheckerboardSplit& split, const Vec3& position) {
    return cell_parity(split, position.x, position.y) == split.parity_for_train;
}

SplitIndices checkerboard_split(std::span<const SamplePair> pairs,
                                const CheckerboardSplit& split) {
    split.validate();
    SplitIndices out;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        (is_train(split, pairs[i].position) ? out.train : out.test).push_back(i);
    return out;
}

SplitIndices checkerboard_split(std::span<const Vec3> positions, const CheckerboardSplit& split) {
    split.validate();
    SplitIndices out;
    for (std::size_t i = 0; i < positions.size(); ++i)
        (is_train(split, positions[i]) ? out.train : out.test).push_back(i);
    return out;
}

EvalReport evaluate_seen_unseen(const Estimator& estimator, const CheckerboardSplit& split,
                                std::span<const SamplePair> pairs, ExecMode exec) {
    const SplitIndices idx = checkerboard_split(pairs, split);
    if (idx.train.empty())
        throw DataError("seen/unseen evaluation: the train side of the split is empty");
    if (idx.test.empty())
        throw DataError("seen/unseen evaluation: the test side of the split is empty");

    if (const auto prov = estimator.provenance()) {
        std::vector<SamplePair> train_side;
        train_side.reserve(idx.train.size());
        for (std::size_t i : idx.train)
            train_side.push_back(pairs[i]);
        if (*prov != position_fingerprint(std::span<const SamplePair>(train_side)))
            throw DataError("estimator provenance does not match the train side of the split");
    }

    const std::vector<double> p = kernels::power_profile(pairs, estimator, exec);
    std::vector<double> seen, unseen;
    seen.reserve(idx.train.size());
    unseen.reserve(idx.test.size());
    for (std::size_t i : idx.train)
        seen.push_back(p[i]);
    for (std::size_t i : idx.test)
        unseen.push_back(p[i]);

    EvalReport report;
    report.estimator_id = estimator.id();
    report.a = split.square_side;
    report.p_seen_db = to_db(mean(seen));
    report.p_unseen_db = to_db(mean(unseen));
    report.gap_db = report.p_unseen_db - report.p_seen_db;
    report.per_point.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        report.per_point[i] = PointPower{pairs[i].position, p[i], false};
    for (std::size_t i : idx.train)
        report.per_point[i].seen = true;
    return report;
}

std::vector<SweepEntry> sweep_grid(std::span<const SamplePair> pairs,
                                   const EstimatorFactory& factory,
                                   std::span<const double> a_values,
                                   const CheckerboardSplit& base, std::uint64_t base_seed) {
    if (a_values.empty())
        throw ConfigError("sweep needs at least one square side");
    std::vector<SweepEntry> entries(a_values.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(a_values.size()); ++i) {
        SweepEntry& entry = entries[i];
        entry.a = a_values[i];
        try {
            CheckerboardSplit split = base;
            split.square_side = entry.a;
            const SplitIndices idx = checkerboard_split(pairs, split);
            if (idx.train.empty() || idx.test.empty())
                throw DataError("square side leaves one side of the split empty");
            std::vector<SamplePair> train;
            train.reserve(idx.train.size());
            for (std::size_t k : idx.train)
                train.push_back(pairs[k]);
            const std::unique_ptr<Estimator> est =
                factory(train, mix_seed(base_seed, static_cast<std::uint64_t>(i)));
            entry.report = evaluate_seen_unseen(*est, split, pairs);
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
    }
    return entries;
}

std::vector<double> default_a_values() {
    std::vector<double> a(14);
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = static_cast<double>(5 + i) / 10.0;
    return a;
}

HeatmapGrid heatmap(std::span<const SamplePair> pairs, const Estimator& estimator,
                    double cell_size, ExecMode exec) {
    if (!(cell_size > 0.0))
        throw ConfigError("heatmap cell size must be positive");
    HeatmapGrid grid;
    grid.cell_size = cell_size;
    if (pairs.empty())
        return grid;

    double min_x = pairs[0].position.x, max_x = min_x;
    double min_y = pairs[0].position.y, max_y = min_y;
    for (const auto& pr : pairs) {
        min_x = std::min(min_x, pr.position.x);
        max_x = std::max(max_x, pr.position.x);
        min_y = std::min(min_y, pr.position.y);
        max_y = std::max(max_y, pr.position.y);
    }
    grid.min_x = min_x;
    grid.min_y = min_y;
    grid.nx = std::max<std::size_t>(1, static_cast<std::size_t>(
                                           std::ceil((max_x - min_x) / cell_size)));
    grid.ny = std::max<std::size_t>(1, static_cast<std::size_t>(
                                           std::ceil((max_y - min_y) / cell_size)));
    grid.cells.assign(grid.nx * grid.ny, HeatmapCell{});

    const std::vector<double> p = kernels::power_profile(pairs, estimator, exec);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto ix = static_cast<std::size_t>(
            std::max(0.0, std::floor((pairs[i].position.x - min_x) / cell_size)));
        auto iy = static_cast<std::size_t>(
            std::max(0.0, std::floor((pairs[i].position.y - min_y) / cell_size)));
        ix = std::min(ix, grid.nx - 1);
        iy = std::min(iy, grid.ny - 1);
        HeatmapCell& cell = grid.at(ix, iy);
        cell.mean_p += p[i];
        cell.count += 1;
    }
    for (HeatmapCell& cell : grid.cells)
        if (cell.count > 0)
            cell.mean_p /= static_cast<double>(cell.count);
    return grid;
}

std::string report_csv(std::span<const EvalReport> reports) {
    std::string out = "estimator_id,a_m,p_seen_db,p_unseen_db,gap_db\n";
    for (const auto& r : reports) {
        out += r.estimator_id;
        out += ',';
        out += fmt_double(r.a);
        out += ',';
        out += fmt_double(r.p_seen_db);
        out += ',';
        out += fmt_double(r.p_unseen_db);
        out += ',';
        out += fmt_double(r.gap_db);
        out += '\n';
    }
    return out;
}

std::string heatmap_csv(const HeatmapGrid& grid) {
    std::string out = "cell_x,cell_y,mean_p_db,count\n";
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            const HeatmapCell& cell = grid.at(ix, iy);
            if (cell.count == 0)
                continue;
            const double cx = grid.min_x + (static_cast<double>(ix) + 0.5) * grid.cell_size;
            const double cy = grid.min_y + (static_cast<double>(iy) + 0.5) * grid.cell_size;
            out += fmt_double(cx);
            out += ',';
            out += fmt_double(cy);
            out += ',';
            out += fmt_double(to_db(cell.mean_p));
            out += ',';
            out += std::to_string(cell.count);
            out += '\n';
        }
    return out;
}

std::vector<EvalReport> collect_reports(std::span<const SweepEntry> entries) {
    std::vector<EvalReport> reports;
    for (const auto& e : entries)
        if (e.report)
            reports.push_back(*e.report);
    return reports;
}

void write_report_csv(const std::string& path, std::span<const EvalReport> reports) {
    atomic_write_file(path, report_csv(reports));
}

void write_heatmap_csv(const std::string& path, const HeatmapGrid& grid) {
    atomic_write_file(path, heatmap_csv(grid));
}

} // namespace csimap
