// SPDX-License-Identifier: Apache-2.0

#include "csimap/kernels.hpp"

#include "csimap/metrics.hpp"
#include "csimap/rng.hpp"

namespace csimap::kernels {

namespace {

CsiRecord synth_one_record(const Scene& scene, const FrequencyPlan& plan, const Vec3& pos) {
    CsiRecord rec;
    rec.position = pos;
    rec.csi = CfMatrix(scene.num_antennas(), kDefaultAvgSubcarriers);
    for (std::size_t s = 0; s < kDefaultAvgSubcarriers; ++s) {
        const CVector h = synth_channel(scene, pos, plan.column_freq(s));
        for (std::size_t ant = 0; ant < h.size(); ++ant)
            rec.csi(ant, s) = cfloat(static_cast<float>(h[ant].real()),
                                     static_cast<float>(h[ant].imag()));
    }
    return rec;
}

double mc_one_power(std::uint64_t seed, std::size_t draw, std::span<const CVector> channels) {
    Rng rng(mix_seed(seed, draw));
    const CVector& h = channels[draw % channels.size()];
    const CVector w = random_unit_vector(rng, h.size());
    return normalized_power(h, w);
}

} // namespace

std::vector<double> power_profile_serial(std::span<const SamplePair> pairs,
                                         const Estimator& estimator) {
    std::vector<double> p(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        p[i] = normalized_power(pairs[i].h_d, estimator.predict(pairs[i].h_u));
    return p;
}

std::vector<double> power_profile_parallel(std::span<const SamplePair> pairs,
                                           const Estimator& estimator) {
    std::vector<double> p(pairs.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs.size()); ++i)
        p[i] = normalized_power(pairs[i].h_d, estimator.predict(pairs[i].h_u));
    return p;
}

std::vector<double> power_profile(std::span<const SamplePair> pairs, const Estimator& estimator,
                                  ExecMode exec) {
    return exec == ExecMode::serial ? power_profile_serial(pairs, estimator)
                                    : power_profile_parallel(pairs, estimator);
}

std::vector<CsiRecord> synth_records_serial(const Scene& scene, const FrequencyPlan& plan,
                                            std::span<const Vec3> positions) {
    std::vector<CsiRecord> records(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        records[i] = synth_one_record(scene, plan, positions[i]);
    return records;
}

std::vector<CsiRecord> synth_records_parallel(const Scene& scene, const FrequencyPlan& plan,
                                              std::span<const Vec3> positions) {
    std::vector<CsiRecord> records(positions.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(positions.size()); ++i)
        records[i] = synth_one_record(scene, plan, positions[i]);
    return records;
}

std::vector<double> mc_random_powers_serial(std::uint64_t seed, std::size_t num_draws,
                                            std::span<const CVector> channels) {
    std::vector<double> p(num_draws);
    for (std::size_t k = 0; k < num_draws; ++k)
        p[k] = mc_one_power(seed, k, channels);
    return p;
}

std::vector<double> mc_random_powers_parallel(std::uint64_t seed, std::size_t num_draws,
                                              std::span<const CVector> channels) {
    std::vector<double> p(num_draws);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(num_draws); ++k)
        p[k] = mc_one_power(seed, static_cast<std::size_t>(k), channels);
    return p;
}

std::vector<double> mc_random_powers(std::uint64_t seed, std::size_t num_draws,
                                     std::span<const CVector> channels, ExecMode exec) {
    return exec == ExecMode::serial ? mc_random_powers_serial(seed, num_draws, channels)
                                    : mc_random_powers_parallel(seed, num_draws, channels);
}

} // namespace csimap::kernels
