// SPDX-License-Identifier: Apache-2.0

#include "csimap/synth.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "csimap/errors.hpp"
#include "csimap/kernels.hpp"
#include "csimap/rng.hpp"

namespace csimap {

void Scene::validate() const {
    if (antenna_offsets.empty())
        throw ConfigError("scene: at least one antenna required");
    if (!include_los && scatterers.empty())
        throw ConfigError("scene: no propagation path (LoS disabled, no scatterers)");
    if (std::abs(array_pose.broadside.norm() - 1.0) > 1e-6)
        throw ConfigError("scene: broadside vector must have unit norm");
}

void FrequencyPlan::validate() const {
    for (std::size_t i = 0; i < ul_freqs_hz.size(); ++i) {
        if (!(ul_freqs_hz[i] > 0.0))
            throw ConfigError("frequency plan: uplink frequencies must be positive");
        if (i > 0 && !(ul_freqs_hz[i] > ul_freqs_hz[i - 1]))
            throw ConfigError("frequency plan: uplink frequencies must be strictly increasing");
        if (ul_freqs_hz[i] == dl_freq_hz)
            throw ConfigError("frequency plan: downlink frequency must differ from every uplink one");
    }
    if (!(dl_freq_hz > 0.0))
        throw ConfigError("frequency plan: downlink frequency must be positive");
}

double FrequencyPlan::column_freq(std::size_t s) const {
    if (s < ul_freqs_hz.size())
        return ul_freqs_hz[s];
    if (s == kDefaultDlIndex)
        return dl_freq_hz;
    const double x0 = static_cast<double>(ul_freqs_hz.size()) - 1.0; // column 7
    const double x1 = static_cast<double>(kDefaultDlIndex);
    const double slope = (dl_freq_hz - ul_freqs_hz.back()) / (x1 - x0);
    return ul_freqs_hz.back() + slope * (static_cast<double>(s) - x0);
}

FrequencyPlan default_frequency_plan(double carrier_hz, double bandwidth_hz, std::size_t num_raw,
                                     std::size_t batch) {
    const double delta = bandwidth_hz / static_cast<double>(num_raw);
    const double center_index = static_cast<double>(num_raw) / 2.0;
    auto col_center = [&](std::size_t s) {
        // mean raw index of the averaged batch, offset from the band center
        const double mean_index = static_cast<double>(s * batch) +
                                  (static_cast<double>(batch) - 1.0) / 2.0;
        return carrier_hz + (mean_index - center_index) * delta;
    };
    FrequencyPlan plan;
    for (std::size_t s = 0; s < plan.ul_freqs_hz.size(); ++s)
        plan.ul_freqs_hz[s] = col_center(s);
    plan.dl_freq_hz = col_center(kDefaultDlIndex);
    plan.validate();
    return plan;
}

std::vector<Vec3> planar_array_offsets(std::size_t rows, std::size_t cols, double spacing_m,
                                       const Vec3& broadside) {
    const Vec3 up{0.0, 0.0, 1.0};
    const Vec3 b = broadside.normalized();
    const Vec3 horiz = up.cross(b);
    if (horiz.norm() < 1e-9)
        throw ConfigError("planar array: broadside must not be vertical");
    const Vec3 e1 = horiz.normalized(); // in-plane horizontal
    const Vec3 e2 = b.cross(e1);        // in-plane vertical

    std::vector<Vec3> offsets;
    offsets.reserve(rows * cols);
    const double c0 = (static_cast<double>(cols) - 1.0) / 2.0;
    const double r0 = (static_cast<double>(rows) - 1.0) / 2.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            offsets.push_back(e1 * ((static_cast<double>(c) - c0) * spacing_m) +
                              e2 * ((static_cast<double>(r) - r0) * spacing_m));
    return offsets;
}

CVector synth_channel(const Scene& scene, const Vec3& ue_pos, double freq_hz) {
    scene.validate();
    const std::size_t m = scene.num_antennas();
    CVector h(m, cdouble(0.0, 0.0));
    const double wavenumber = 2.0 * M_PI * freq_hz / kSpeedOfLight;

    for (std::size_t ant = 0; ant < m; ++ant) {
        const Vec3 apos = scene.antenna_position(ant);
        cdouble acc(0.0, 0.0);
        if (scene.include_los) {
            const double d = (ue_pos - apos).norm();
            if (d <= 0.0)
                throw NumericalError("synth_channel: UE coincides with antenna " +
                                     std::to_string(ant));
            acc += std::polar(1.0 / d, -wavenumber * d);
        }
        for (const Scatterer& sc : scene.scatterers) {
            const double d1 = (ue_pos - sc.position).norm();
            const double d2 = (sc.position - apos).norm();
            if (d1 <= 0.0 || d2 <= 0.0)
                throw NumericalError("synth_channel: zero-length scatterer path");
            const double d = d1 + d2;
            acc += sc.gain * std::polar(1.0 / d, -wavenumber * d);
        }
        h[ant] = acc;
    }

    if (scene.noise_std > 0.0) {
        // deterministic per (scene seed, position, frequency)
        std::uint64_t s = mix_seed(scene.seed, fnv1a(&ue_pos, sizeof ue_pos));
        s = mix_seed(s, fnv1a(&freq_hz, sizeof freq_hz));
        Rng rng(s);
        for (auto& e : h)
            e += scene.noise_std * rng.complex_gaussian();
    }
    return h;
}

std::vector<CsiRecord> generate_dataset(const Scene& scene, const FrequencyPlan& plan,
                                        std::span<const Vec3> positions, ExecMode exec) {
    scene.validate();
    plan.validate();
    if (positions.empty())
        throw ConfigError("generate_dataset: empty position list");
    auto records = exec == ExecMode::serial
                       ? kernels::synth_records_serial(scene, plan, positions)
                       : kernels::synth_records_parallel(scene, plan, positions);
    for (std::size_t i = 0; i < records.size(); ++i)
        validate_record(records[i], i);
    return records;
}

Scene default_scene(std::size_t num_scatterers, std::uint64_t seed) {
    return desk_scene(4, 8, num_scatterers, seed);
}

Scene desk_scene(std::size_t rows, std::size_t cols, std::size_t num_scatterers,
                 std::uint64_t seed, bool include_los) {
    Scene scene;
    scene.seed = seed;
    scene.include_los = include_los;
    scene.array_pose.position = {0.0, 0.0, 1.0};
    scene.array_pose.broadside = {1.0, 0.0, 0.0};
    const double wavelength = kSpeedOfLight / 1.272e9;
    scene.antenna_offsets =
        planar_array_offsets(rows, cols, wavelength / 2.0, scene.array_pose.broadside);

    // scatterers scattered through the 6 m x 6 m room in front of the array
    Rng rng(mix_seed(seed, 0x5ca77e7e5ULL));
    for (std::size_t i = 0; i < num_scatterers; ++i) {
        Scatterer sc;
        sc.position = {0.5 + 5.5 * rng.uniform(), -3.0 + 6.0 * rng.uniform(),
                       0.2 + 2.3 * rng.uniform()};
        const double phase = 2.0 * M_PI * rng.uniform();
        const double amp = 0.5 + rng.uniform(); // comparable to the LoS term
        sc.gain = std::polar(amp, phase);
        scene.scatterers.push_back(sc);
    }
    return scene;
}

Scene scene_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open scene file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }

    auto vec3 = [&](const nlohmann::json& a, const char* what) -> Vec3 {
        if (!a.is_array() || a.size() != 3)
            throw DataError(path + ": " + what + " must be a 3-element array");
        return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    };

    Scene scene;
    try {
        scene.seed = j.value("seed", std::uint64_t{0});
        scene.include_los = j.value("include_los", true);
        scene.noise_std = j.value("noise_std", 0.0);
        const auto& arr = j.at("array");
        scene.array_pose.position = vec3(arr.at("position"), "array.position");
        scene.array_pose.broadside = vec3(arr.at("broadside"), "array.broadside").normalized();
        if (arr.contains("offsets")) {
            for (const auto& o : arr.at("offsets"))
                scene.antenna_offsets.push_back(vec3(o, "array.offsets[]"));
        } else if (arr.contains("planar")) {
            const auto& p = arr.at("planar");
            scene.antenna_offsets =
                planar_array_offsets(p.at("rows").get<std::size_t>(),
                                     p.at("cols").get<std::size_t>(),
                                     p.at("spacing_m").get<double>(), scene.array_pose.broadside);
        } else {
            throw DataError(path + ": array needs either offsets or planar");
        }
        for (const auto& s : j.value("scatterers", nlohmann::json::array())) {
            Scatterer sc;
            sc.position = vec3(s.at("position"), "scatterer.position");
            const auto g = s.at("gain").get<std::vector<double>>();
            if (g.size() != 2)
                throw DataError(path + ": scatterer gain must be [re, im]");
            sc.gain = cdouble(g[0], g[1]);
            scene.scatterers.push_back(sc);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": missing or malformed field: " + e.what());
    }
    scene.validate();
    return scene;
}

void scene_to_json(const std::string& path, const Scene& scene) {
    scene.validate();
    nlohmann::json j;
    j["seed"] = scene.seed;
    j["include_los"] = scene.include_los;
    if (scene.noise_std > 0.0)
        j["noise_std"] = scene.noise_std;
    j["array"]["position"] = {scene.array_pose.position.x, scene.array_pose.position.y,
                              scene.array_pose.position.z};
    j["array"]["broadside"] = {scene.array_pose.broadside.x, scene.array_pose.broadside.y,
                               scene.array_pose.broadside.z};
    auto offsets = nlohmann::json::array();
    for (const Vec3& o : scene.antenna_offsets)
        offsets.push_back({o.x, o.y, o.z});
    j["array"]["offsets"] = offsets;
    auto scatterers = nlohmann::json::array();
    for (const Scatterer& s : scene.scatterers)
        scatterers.push_back({{"position", {s.position.x, s.position.y, s.position.z}},
                              {"gain", {s.gain.real(), s.gain.imag()}}});
    j["scatterers"] = scatterers;
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw DataError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

FrequencyPlan plan_from_json_or_default(const std::string& scene_path) {
    std::ifstream in(scene_path);
    if (!in)
        throw DataError("cannot open scene file: " + scene_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(scene_path + ": invalid JSON: " + e.what());
    }
    if (!j.contains("frequency_plan"))
        return default_frequency_plan();
    const auto& p = j.at("frequency_plan");
    FrequencyPlan plan;
    try {
        const auto ul = p.at("ul_freqs_hz").get<std::vector<double>>();
        if (ul.size() != plan.ul_freqs_hz.size())
            throw DataError(scene_path + ": frequency_plan.ul_freqs_hz must have 8 entries");
        std::copy(ul.begin(), ul.end(), plan.ul_freqs_hz.begin());
        plan.dl_freq_hz = p.at("dl_freq_hz").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(scene_path + ": malformed frequency_plan: " + e.what());
    }
    plan.validate();
    return plan;
}

DatasetMeta scene_meta(const Scene& scene, const FrequencyPlan& plan) {
    DatasetMeta meta;
    meta.num_antennas = scene.num_antennas();
    meta.num_raw_subcarriers = 0; // synthetic data is generated on the averaged grid
    meta.num_avg_subcarriers = kDefaultAvgSubcarriers;
    meta.carrier_freq_hz = 0.5 * (plan.ul_freqs_hz.back() + plan.dl_freq_hz);
    meta.array_pose = scene.array_pose;
    return meta;
}

} // namespace csimap
