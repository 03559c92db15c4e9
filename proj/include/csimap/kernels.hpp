// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csimap/dataset.hpp"
#include "csimap/estimator.hpp"
#include "csimap/synth.hpp"
#include "csimap/types.hpp"

namespace csimap::kernels {

// Data-parallel kernels, each in a serial reference version and an OpenMP
// version. Every output element is computed independently, so the two
// versions agree bitwise for any thread count; tests enforce that and the
// bench target times them against each other.

// Normalized received power of estimator(h_u) against h_d, per pair.
std::vector<double> power_profile_serial(std::span<const SamplePair> pairs,
                                         const Estimator& estimator);
std::vector<double> power_profile_parallel(std::span<const SamplePair> pairs,
                                           const Estimator& estimator);
std::vector<double> power_profile(std::span<const SamplePair> pairs, const Estimator& estimator,
                                  ExecMode exec);

// Ray-sum channel records for a batch of positions (S = 32 layout).
std::vector<CsiRecord> synth_records_serial(const Scene& scene, const FrequencyPlan& plan,
                                            std::span<const Vec3> positions);
std::vector<CsiRecord> synth_records_parallel(const Scene& scene, const FrequencyPlan& plan,
                                              std::span<const Vec3> positions);

// Monte-Carlo powers of random unit precoders: draw k is evaluated against
// channels[k % channels.size()], with a per-draw RNG stream derived from
// (seed, k).
std::vector<double> mc_random_powers_serial(std::uint64_t seed, std::size_t num_draws,
                                            std::span<const CVector> channels);
std::vector<double> mc_random_powers_parallel(std::uint64_t seed, std::size_t num_draws,
                                              std::span<const CVector> channels);
std::vector<double> mc_random_powers(std::uint64_t seed, std::size_t num_draws,
                                     std::span<const CVector> channels, ExecMode exec);

} // namespace csimap::kernels
