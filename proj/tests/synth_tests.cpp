// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "csimap/errors.hpp"
#include "csimap/synth.hpp"

using namespace csimap;

namespace {

Scene single_antenna_scene() {
    Scene scene;
    scene.array_pose.position = {0.0, 0.0, 1.0};
    scene.array_pose.broadside = {1.0, 0.0, 0.0};
    scene.antenna_offsets = {{0.0, 0.0, 0.0}};
    return scene;
}

// Ray sum recomputed in extended precision, independent of the library code.
std::complex<double> ray_sum_oracle(const Scene& scene, const Vec3& ue, std::size_t ant,
                                    double freq_hz) {
    const long double k = 2.0L * 3.14159265358979323846264338327950288L *
                          static_cast<long double>(freq_hz) / 299792458.0L;
    auto dist = [](const Vec3& a, const Vec3& b) {
        const long double dx = static_cast<long double>(a.x) - b.x;
        const long double dy = static_cast<long double>(a.y) - b.y;
        const long double dz = static_cast<long double>(a.z) - b.z;
        return sqrtl(dx * dx + dy * dy + dz * dz);
    };
    const Vec3 apos = scene.antenna_position(ant);
    long double re = 0.0L, im = 0.0L;
    if (scene.include_los) {
        const long double d = dist(ue, apos);
        re += cosl(-k * d) / d;
        im += sinl(-k * d) / d;
    }
    for (const Scatterer& sc : scene.scatterers) {
        const long double d = dist(ue, sc.position) + dist(sc.position, apos);
        const long double c = cosl(-k * d) / d;
        const long double s = sinl(-k * d) / d;
        re += sc.gain.real() * c - sc.gain.imag() * s;
        im += sc.gain.real() * s + sc.gain.imag() * c;
    }
    return {static_cast<double>(re), static_cast<double>(im)};
}

} // namespace

TEST_CASE("line-of-sight channel has 1/d magnitude and -kd phase") {
    Scene scene = single_antenna_scene();
    const Vec3 ue{3.0, 4.0, 1.0}; // distance 5 from the antenna
    const double freq = 1.272e9;
    const CVector h = synth_channel(scene, ue, freq);
    REQUIRE(h.size() == 1);

    CHECK(std::abs(h[0]) == doctest::Approx(1.0 / 5.0).epsilon(1e-12));
    const double kd = 2.0 * M_PI * freq / kSpeedOfLight * 5.0;
    const cdouble expected = std::polar(1.0 / 5.0, -kd);
    CHECK(std::abs(h[0] - expected) < 1e-12 * std::abs(expected));
}

TEST_CASE("multipath ray sum matches an extended-precision oracle") {
    Scene scene = single_antenna_scene();
    scene.antenna_offsets = {{0.0, -0.06, 0.0}, {0.0, 0.06, 0.0}};
    scene.scatterers.push_back({{2.0, 1.5, 0.8}, cdouble(0.7, -0.4)});
    scene.scatterers.push_back({{4.5, -2.0, 1.9}, cdouble(-0.3, 0.9)});
    const Vec3 ue{3.2, 0.7, 1.1};

    for (double freq : {1.25e9, 1.272e9, 1.29e9}) {
        const CVector h = synth_channel(scene, ue, freq);
        REQUIRE(h.size() == 2);
        for (std::size_t ant = 0; ant < 2; ++ant) {
            const auto expected = ray_sum_oracle(scene, ue, ant, freq);
            CHECK(std::abs(h[ant] - expected) < 1e-12 * std::abs(expected));
        }
    }
}

TEST_CASE("channel synthesis is deterministic") {
    Scene scene = default_scene(3, 42);
    const Vec3 ue{2.5, 0.5, 1.2};
    const CVector a = synth_channel(scene, ue, 1.26e9);
    const CVector b = synth_channel(scene, ue, 1.26e9);
    CHECK(a == b);

    scene.noise_std = 0.01; // noise is keyed by (seed, position, frequency)
    const CVector c = synth_channel(scene, ue, 1.26e9);
    const CVector d = synth_channel(scene, ue, 1.26e9);
    CHECK(c == d);
    CHECK(c != a);
}

TEST_CASE("scatterer gains scale the scattered field linearly") {
    Scene scene = single_antenna_scene();
    scene.include_los = false;
    scene.scatterers.push_back({{2.0, 1.0, 1.0}, cdouble(1.0, 0.0)});
    scene.scatterers.push_back({{3.0, -1.0, 0.5}, cdouble(0.5, 0.5)});
    const Vec3 ue{4.0, 0.0, 1.0};
    const cdouble factor(0.3, -1.7);

    const CVector base = synth_channel(scene, ue, 1.272e9);
    for (auto& sc : scene.scatterers)
        sc.gain *= factor;
    const CVector scaled = synth_channel(scene, ue, 1.272e9);
    REQUIRE(base.size() == scaled.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(std::abs(scaled[i] - factor * base[i]) < 1e-14 * std::abs(factor * base[i]) + 1e-300);
}

TEST_CASE("scene validation rejects impossible setups") {
    SUBCASE("no propagation path") {
        Scene scene = single_antenna_scene();
        scene.include_los = false;
        CHECK_THROWS_WITH_AS(scene.validate(), doctest::Contains("no propagation path"),
                             ConfigError);
    }
    SUBCASE("no antennas") {
        Scene scene = single_antenna_scene();
        scene.antenna_offsets.clear();
        CHECK_THROWS_AS(scene.validate(), ConfigError);
    }
    SUBCASE("non-unit broadside") {
        Scene scene = single_antenna_scene();
        scene.array_pose.broadside = {3.0, 0.0, 0.0};
        CHECK_THROWS_AS(scene.validate(), ConfigError);
    }
    SUBCASE("UE on top of an antenna") {
        Scene scene = single_antenna_scene();
        CHECK_THROWS_AS(synth_channel(scene, scene.array_pose.position, 1.272e9),
                        NumericalError);
    }
}

TEST_CASE("frequency plan validation and column mapping") {
    FrequencyPlan plan = default_frequency_plan();

    SUBCASE("default plan covers the uplink block and the downlink column") {
        // carrier 1.272 GHz, 50 MHz over 1024 raw subcarriers, averaged by 32
        const double delta = 50e6 / 1024.0;
        for (std::size_t s = 0; s < 8; ++s) {
            const double mean_index = static_cast<double>(s) * 32.0 + 15.5;
            CHECK(plan.ul_freqs_hz[s] ==
                  doctest::Approx(1.272e9 + (mean_index - 512.0) * delta).epsilon(1e-12));
        }
        CHECK(plan.dl_freq_hz ==
              doctest::Approx(1.272e9 + (28.0 * 32.0 + 15.5 - 512.0) * delta).epsilon(1e-12));
        CHECK(plan.dl_freq_hz > plan.ul_freqs_hz[7]);
    }
    SUBCASE("column_freq hits the anchors and interpolates between them") {
        for (std::size_t s = 0; s < 8; ++s)
            CHECK(plan.column_freq(s) == plan.ul_freqs_hz[s]);
        CHECK(plan.column_freq(28) == plan.dl_freq_hz);
        // columns 8..31 lie on the line through (7, ul[7]) and (28, dl)
        const double slope = (plan.dl_freq_hz - plan.ul_freqs_hz[7]) / 21.0;
        for (std::size_t s : {std::size_t{8}, std::size_t{17}, std::size_t{31}})
            CHECK(plan.column_freq(s) ==
                  doctest::Approx(plan.ul_freqs_hz[7] +
                                  slope * (static_cast<double>(s) - 7.0)).epsilon(1e-12));
        // evenly spaced columns: constant increment across the whole row
        for (std::size_t s = 9; s < 32; ++s)
            CHECK(plan.column_freq(s) - plan.column_freq(s - 1) ==
                  doctest::Approx(slope).epsilon(1e-9));
    }
    SUBCASE("validation") {
        FrequencyPlan bad = plan;
        bad.ul_freqs_hz[3] = bad.ul_freqs_hz[2]; // not strictly increasing
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = plan;
        bad.dl_freq_hz = bad.ul_freqs_hz[5];
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = plan;
        bad.dl_freq_hz = -1.0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("planar array offsets") {
    const Vec3 broadside{1.0, 0.0, 0.0};
    const auto offsets = planar_array_offsets(2, 4, 0.1, broadside);
    REQUIRE(offsets.size() == 8);

    // centered: offsets sum to zero
    Vec3 sum{};
    for (const Vec3& o : offsets)
        sum = sum + o;
    CHECK(std::abs(sum.x) < 1e-12);
    CHECK(std::abs(sum.y) < 1e-12);
    CHECK(std::abs(sum.z) < 1e-12);

    // every offset is perpendicular to the broadside
    for (const Vec3& o : offsets)
        CHECK(std::abs(o.dot(broadside)) < 1e-12);

    // neighbours along a row are one spacing apart
    CHECK((offsets[1] - offsets[0]).norm() == doctest::Approx(0.1).epsilon(1e-12));
    // rows are one spacing apart vertically
    CHECK((offsets[4] - offsets[0]).norm() == doctest::Approx(0.1).epsilon(1e-12));

    CHECK_THROWS_AS(planar_array_offsets(2, 2, 0.1, Vec3{0.0, 0.0, 1.0}), ConfigError);
}

TEST_CASE("generate_dataset produces the full 32-column layout") {
    Scene scene = desk_scene(2, 2, 2, 7);
    const FrequencyPlan plan = default_frequency_plan();
    std::vector<Vec3> positions{{2.0, 0.5, 1.0}, {3.5, -1.0, 1.5}, {1.5, 2.0, 0.8}};

    const auto records = generate_dataset(scene, plan, positions, ExecMode::serial);
    REQUIRE(records.size() == 3);
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].position == positions[i]);
        CHECK(records[i].csi.rows == 4);
        CHECK(records[i].csi.cols == 32);
    }

    // each column holds the ray sum at that column's frequency
    for (std::size_t s = 0; s < 32; ++s) {
        const CVector h = synth_channel(scene, positions[1], plan.column_freq(s));
        for (std::size_t ant = 0; ant < 4; ++ant)
            CHECK(records[1].csi(ant, s) == cfloat(static_cast<float>(h[ant].real()),
                                                   static_cast<float>(h[ant].imag())));
    }

    CHECK_THROWS_AS(generate_dataset(scene, plan, {}, ExecMode::serial), ConfigError);
}

TEST_CASE("desk scene geometry") {
    const Scene scene = default_scene(5, 3);
    CHECK(scene.num_antennas() == 32);
    CHECK(scene.scatterers.size() == 5);
    CHECK_NOTHROW(scene.validate());

    // scatterers stay inside the room in front of the array
    for (const Scatterer& sc : scene.scatterers) {
        CHECK(sc.position.x > 0.0);
        CHECK(sc.position.x < 6.5);
        CHECK(std::abs(sc.position.y) <= 3.0);
        CHECK(sc.position.z > 0.0);
    }

    // seeded: same seed, same scene; different seed, different scatterers
    const Scene again = default_scene(5, 3);
    CHECK(again.scatterers[0].position == scene.scatterers[0].position);
    const Scene other = default_scene(5, 4);
    CHECK(!(other.scatterers[0].position == scene.scatterers[0].position));

    const Scene small = desk_scene(2, 4, 0, 1);
    CHECK(small.num_antennas() == 8);
}

TEST_CASE("scene JSON round trip") {
    const auto path = (std::filesystem::temp_directory_path() / "csimap_scene.json").string();
    Scene scene = desk_scene(2, 2, 3, 11);
    scene.noise_std = 0.05;

    scene_to_json(path, scene);
    const Scene back = scene_from_json(path);

    CHECK(back.seed == scene.seed);
    CHECK(back.include_los == scene.include_los);
    CHECK(back.noise_std == scene.noise_std);
    CHECK(back.array_pose.position == scene.array_pose.position);
    CHECK(back.array_pose.broadside == scene.array_pose.broadside);
    REQUIRE(back.antenna_offsets.size() == scene.antenna_offsets.size());
    for (std::size_t i = 0; i < scene.antenna_offsets.size(); ++i)
        CHECK(back.antenna_offsets[i] == scene.antenna_offsets[i]);
    REQUIRE(back.scatterers.size() == scene.scatterers.size());
    for (std::size_t i = 0; i < scene.scatterers.size(); ++i) {
        CHECK(back.scatterers[i].position == scene.scatterers[i].position);
        CHECK(back.scatterers[i].gain == scene.scatterers[i].gain);
    }

    // identical channels from the reloaded scene
    const Vec3 ue{2.2, 0.3, 1.0};
    CHECK(synth_channel(back, ue, 1.272e9) == synth_channel(scene, ue, 1.272e9));

    // default plan when the file carries no frequency_plan block
    const FrequencyPlan plan = plan_from_json_or_default(path);
    CHECK(plan.dl_freq_hz == default_frequency_plan().dl_freq_hz);

    std::remove(path.c_str());
}

TEST_CASE("scene JSON rejects malformed input") {
    const auto path = (std::filesystem::temp_directory_path() / "csimap_scene_bad.json").string();
    {
        std::ofstream out(path, std::ios::trunc);
        out << "{\"array\": {\"position\": [0,0,1], \"broadside\": [1,0,0]}}";
    }
    // neither offsets nor planar
    CHECK_THROWS_WITH_AS(scene_from_json(path), doctest::Contains("offsets or planar"),
                         DataError);
    {
        std::ofstream out(path, std::ios::trunc);
        out << "not json";
    }
    CHECK_THROWS_WITH_AS(scene_from_json(path), doctest::Contains("invalid JSON"), DataError);
    CHECK_THROWS_WITH_AS(scene_from_json(path + ".missing"), doctest::Contains("cannot open"),
                         DataError);
    std::remove(path.c_str());
}

TEST_CASE("scene_meta mirrors the scene") {
    const Scene scene = desk_scene(2, 4, 0, 1);
    const FrequencyPlan plan = default_frequency_plan();
    const DatasetMeta meta = scene_meta(scene, plan);
    CHECK(meta.num_antennas == 8);
    CHECK(meta.num_avg_subcarriers == 32);
    CHECK(meta.carrier_freq_hz == 0.5 * (plan.ul_freqs_hz[7] + plan.dl_freq_hz));
    CHECK(meta.array_pose.position == scene.array_pose.position);
    CHECK_NOTHROW(meta.validate());
}
