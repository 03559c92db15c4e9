// Serial vs parallel timing for the three hot kernels. The parallel paths
// must reproduce the serial results bitwise, so the only question left is
// whether they are worth the threads on this machine.

#include <chrono>
#include <cstdio>
#include <vector>

#include "csimap/dataset.hpp"
#include "csimap/estimator.hpp"
#include "csimap/kernels.hpp"
#include "csimap/metrics.hpp"
#include "csimap/rng.hpp"
#include "csimap/synth.hpp"

using namespace csimap;

namespace {

template <typename F> double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, double serial_s, double parallel_s) {
    std::printf("%-18s %10.4f s %10.4f s %8.2fx\n", name, serial_s, parallel_s,
                serial_s / parallel_s);
}

} // namespace

int main() {
    const Scene scene = desk_scene(4, 8, 6, 7);
    const FrequencyPlan plan = default_frequency_plan();
    Rng rng(42);
    std::vector<Vec3> positions(4000);
    for (auto& p : positions)
        p = {0.8 + 5.0 * rng.uniform(), -2.8 + 5.6 * rng.uniform(), 0.8};

    std::printf("%-18s %12s %12s %9s\n", "kernel", "serial", "parallel", "speedup");

    const double synth_serial =
        time_best_of(3, [&] { (void)kernels::synth_records_serial(scene, plan, positions); });
    const double synth_parallel =
        time_best_of(3, [&] { (void)kernels::synth_records_parallel(scene, plan, positions); });
    row("synth_records", synth_serial, synth_parallel);

    const auto records = kernels::synth_records_parallel(scene, plan, positions);
    const auto pairs = extract_pairs(records, kDefaultUlRange, kDefaultDlIndex);
    std::vector<SamplePair> train(pairs.begin(), pairs.begin() + pairs.size() / 2);
    const auto principal = make_principal_estimator(train);

    const double profile_serial =
        time_best_of(3, [&] { (void)kernels::power_profile_serial(pairs, *principal); });
    const double profile_parallel =
        time_best_of(3, [&] { (void)kernels::power_profile_parallel(pairs, *principal); });
    row("power_profile", profile_serial, profile_parallel);

    std::vector<CVector> channels;
    channels.reserve(pairs.size());
    for (const auto& p : pairs)
        channels.push_back(p.h_d);
    const std::size_t draws = 2000000;
    const double mc_serial =
        time_best_of(3, [&] { (void)kernels::mc_random_powers_serial(1, draws, channels); });
    const double mc_parallel =
        time_best_of(3, [&] { (void)kernels::mc_random_powers_parallel(1, draws, channels); });
    row("mc_random_powers", mc_serial, mc_parallel);

    return 0;
}
