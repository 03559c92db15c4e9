// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csimap/dataset.hpp"
#include "csimap/types.hpp"

namespace csimap {

struct Scatterer {
    Vec3 position;
    cdouble gain{1.0, 0.0};
};

// Geometric single-bounce multipath scene. Antenna offsets are world-frame
// displacements from the array center; use planar_array_offsets to build a
// uniform planar array oriented by the broadside vector.
struct Scene {
    ArrayPose array_pose;
    std::vector<Vec3> antenna_offsets;
    std::vector<Scatterer> scatterers;
    bool include_los = true;
    std::uint64_t seed = 0;
    double noise_std = 0.0; // optional complex Gaussian noise per entry, 0 = off

    std::size_t num_antennas() const { return antenna_offsets.size(); }
    Vec3 antenna_position(std::size_t m) const {
        return array_pose.position + antenna_offsets[m];
    }
    void validate() const;
};

// Eight virtual uplink subcarrier frequencies plus one downlink frequency.
struct FrequencyPlan {
    std::array<double, 8> ul_freqs_hz{};
    double dl_freq_hz = 0.0;

    void validate() const;
    // Frequency of dataset column s in the S=32 layout: columns 0-7 are the
    // uplink frequencies, column 28 the downlink one, every other column lies
    // on the line through (7, ul[7]) and (28, dl).
    double column_freq(std::size_t s) const;
};

// Averaged-subcarrier grid of a wideband capture: carrier at the band center,
// column s centered on raw subcarriers [batch*s, batch*(s+1)).
FrequencyPlan default_frequency_plan(double carrier_hz = 1.272e9, double bandwidth_hz = 50e6,
                                     std::size_t num_raw = 1024, std::size_t batch = 32);

// Offsets for a rows x cols uniform planar array: columns run along the
// horizontal in-plane axis, rows along the vertical one, centered on the
// array center. Requires a non-vertical broadside.
std::vector<Vec3> planar_array_offsets(std::size_t rows, std::size_t cols, double spacing_m,
                                       const Vec3& broadside);

// Ray sum over all propagation paths: entry m is
//   sum_p g_p * exp(-j 2 pi f d_pm / c) / d_pm
// with d_pm the total path length from the UE (via scatterer p, or direct)
// to antenna m, and g_p = 1 for the line-of-sight path.
CVector synth_channel(const Scene& scene, const Vec3& ue_pos, double freq_hz);

// One record per position, S = 32 columns, every column populated at the
// frequency given by plan.column_freq.
std::vector<CsiRecord> generate_dataset(const Scene& scene, const FrequencyPlan& plan,
                                        std::span<const Vec3> positions,
                                        ExecMode exec = ExecMode::parallel);

// Desk-scale default: 6 m x 6 m room, 32-antenna 8x4 planar array with
// half-wavelength spacing at 1.272 GHz, array centered on a room edge facing
// inward. num_scatterers > 0 adds seeded single-bounce scatterers.
Scene default_scene(std::size_t num_scatterers = 0, std::uint64_t seed = 1);

// Smaller variant for quick experiments: m_antennas must be 2*k rectangular.
Scene desk_scene(std::size_t rows, std::size_t cols, std::size_t num_scatterers,
                 std::uint64_t seed, bool include_los = true);

Scene scene_from_json(const std::string& path);
void scene_to_json(const std::string& path, const Scene& scene);
FrequencyPlan plan_from_json_or_default(const std::string& scene_path);

DatasetMeta scene_meta(const Scene& scene, const FrequencyPlan& plan);

} // namespace csimap
