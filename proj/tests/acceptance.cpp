// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. Each criterion prints one line:
//   [acceptance] criterion N: PASS|FAIL|SKIP (...)
// Criteria 1-8 are self-contained. Criterion 9 needs a converted
// dichasus-015x capture (default probe: data/dichasus-015x.bin, override
// with --dichasus <path>) and reports SKIP when the file is absent.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "csimap/dataset.hpp"
#include "csimap/errors.hpp"
#include "csimap/estimator.hpp"
#include "csimap/eval.hpp"
#include "csimap/kernels.hpp"
#include "csimap/metrics.hpp"
#include "csimap/neural.hpp"
#include "csimap/rng.hpp"
#include "csimap/sum.hpp"
#include "csimap/synth.hpp"
#include "support/jacobi.hpp"

using namespace csimap;

namespace {

std::string g_dichasus = "data/dichasus-015x.bin";

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// Collects sub-checks for one criterion and prints the summary line.
struct Criterion {
    int number;
    bool ok = true;
    std::string detail;

    explicit Criterion(int n) : number(n) {}
    void expect(bool condition, const std::string& what) {
        if (!condition) {
            ok = false;
            if (!detail.empty())
                detail += "; ";
            detail += what;
        }
    }
    void note(const std::string& what) {
        if (!info.empty())
            info += ", ";
        info += what;
    }
    void finish(const Stopwatch& sw) const {
        const std::string& extra = ok ? info : detail;
        std::printf("[acceptance] criterion %d: %s (%.1f s)%s%s\n", number,
                    ok ? "PASS" : "FAIL", sw.seconds(), extra.empty() ? "" : " -- ",
                    extra.c_str());
        std::fflush(stdout);
        CHECK_MESSAGE(ok, "criterion ", number, ": ", detail);
    }
    std::string info;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::vector<CVector> random_channels(Rng& rng, std::size_t m, std::size_t n) {
    std::vector<CVector> channels(n, CVector(m));
    for (auto& h : channels)
        for (auto& v : h)
            v = rng.complex_gaussian();
    return channels;
}

double mean_probe_power(std::span<const CVector> channels, const CVector& w) {
    std::vector<double> p(channels.size());
    for (std::size_t i = 0; i < channels.size(); ++i)
        p[i] = normalized_power(channels[i], w);
    return mean(p);
}

std::vector<SamplePair> synth_plane_pairs(const Scene& scene, const FrequencyPlan& plan,
                                          std::size_t n, std::uint64_t seed, double z) {
    Rng rng(seed);
    std::vector<Vec3> positions(n);
    for (auto& p : positions)
        p = {0.8 + 5.0 * rng.uniform(), -2.8 + 5.6 * rng.uniform(), z};
    const auto records = generate_dataset(scene, plan, positions);
    return extract_pairs(records, kDefaultUlRange, kDefaultDlIndex);
}

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

bool near_relu_kink(const Mlp& net, const Mlp::Cache& cache) {
    for (std::size_t l = 0; l < net.spec().num_layers(); ++l) {
        if (net.spec().activations[l] != Activation::relu)
            continue;
        for (double z : cache.pre[l])
            if (std::abs(z) < 1e-4)
                return true;
    }
    return false;
}

} // namespace

TEST_CASE("criterion 1: random-precoding baseline hits 1/M") {
    Stopwatch sw;
    Criterion c(1);
    Rng rng(0xac1);
    const std::size_t draws = 100000;
    for (std::size_t m : {1u, 2u, 4u, 8u, 16u, 32u}) {
        const auto channels = random_channels(rng, m, 100);
        const auto p = kernels::mc_random_powers(mix_seed(0xac1, m), draws, channels,
                                                 ExecMode::parallel);
        const double got = mean(p);
        const double expect = 1.0 / static_cast<double>(m);
        const double var = m == 1 ? 0.0
                                  : (static_cast<double>(m) - 1.0) /
                                        (static_cast<double>(m * m) *
                                         (static_cast<double>(m) + 1.0));
        const double tol =
            std::max(3.0 * std::sqrt(var / static_cast<double>(draws)), 1e-12);
        c.expect(std::abs(got - expect) <= tol,
                 "M=" + std::to_string(m) + ": mean " + fmt(got) + " vs " + fmt(expect) +
                     " tol " + fmt(tol));
        if (m == 32) {
            c.expect(std::abs(to_db(got) + 15.05) <= 0.2,
                     "M=32 dB value " + fmt(to_db(got)));
            c.note("M=32 mean " + fmt(to_db(got)) + " dB");
        }
    }
    c.expect(sw.seconds() < 10.0, "runtime " + fmt(sw.seconds()) + " s");
    c.finish(sw);
}

TEST_CASE("criterion 2: principal component is optimal and scores its eigenvalue") {
    Stopwatch sw;
    Criterion c(2);
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(mix_seed(0xac2, static_cast<std::uint64_t>(trial)));
        const auto channels = random_channels(rng, 8, 50);
        const AutocorrMatrix r = autocorrelation(channels);
        const EigenResult eig = dominant_eigenvector(r);

        const double best = mean_probe_power(channels, eig.vector);
        c.expect(std::abs(best - eig.value) <= 1e-9,
                 "trial " + std::to_string(trial) + ": mean power " + fmt(best) +
                     " vs eigenvalue " + fmt(eig.value));
        for (int probe = 0; probe < 1000; ++probe) {
            const CVector w = random_unit_vector(rng, 8);
            if (mean_probe_power(channels, w) > best) {
                c.expect(false, "trial " + std::to_string(trial) + ": probe beat w_max");
                break;
            }
        }
    }
    c.expect(sw.seconds() < 10.0, "runtime " + fmt(sw.seconds()) + " s");
    c.finish(sw);
}

TEST_CASE("criterion 3: power iteration matches a full eigendecomposition oracle") {
    Stopwatch sw;
    Criterion c(3);
    int evaluated = 0, skipped = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(mix_seed(0xac3, static_cast<std::uint64_t>(trial)));
        const std::size_t m = 2 + rng.below(15); // 2..16
        const auto channels = random_channels(rng, m, 40);
        const AutocorrMatrix r = autocorrelation(channels);

        const oracle::EigenDecomposition full = oracle::jacobi_hermitian(r.r.data, m);
        if (full.values[0] - full.values[1] < 1e-6) {
            ++skipped;
            continue;
        }
        ++evaluated;

        const EigenResult eig = dominant_eigenvector(r, 1e-10, 10000000);
        c.expect(std::abs(eig.value - full.values[0]) < 1e-8,
                 "trial " + std::to_string(trial) + ": |lambda - oracle| = " +
                     fmt(std::abs(eig.value - full.values[0])));
        cdouble overlap(0.0, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            overlap += std::conj(eig.vector[i]) * full.vectors[0][i];
        c.expect(std::abs(overlap) > 1.0 - 1e-8,
                 "trial " + std::to_string(trial) + ": |<w, oracle>| = " +
                     fmt(std::abs(overlap)));
    }
    c.expect(evaluated >= 90, "only " + std::to_string(evaluated) + " trials evaluated (" +
                                  std::to_string(skipped) + " near-degenerate)");
    c.note(std::to_string(evaluated) + " trials vs oracle");
    c.finish(sw);
}

TEST_CASE("criterion 4: metric bounds and invariances") {
    Stopwatch sw;
    Criterion c(4);
    Rng rng(0xac4);
    int bad_bounds = 0, bad_invariance = 0, bad_trace = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t m = 1 + rng.below(32);
        CVector h(m), w(m);
        for (auto& v : h)
            v = rng.complex_gaussian();
        for (auto& v : w)
            v = rng.complex_gaussian();
        const double p = normalized_power(h, w);
        if (!(p >= 0.0 && p <= 1.0 + 1e-12))
            ++bad_bounds;

        // global phase and positive scale on both arguments
        const cdouble ch = std::polar(0.1 + 10.0 * rng.uniform(), 2.0 * M_PI * rng.uniform());
        const cdouble cw = std::polar(0.1 + 10.0 * rng.uniform(), 2.0 * M_PI * rng.uniform());
        CVector h2 = h, w2 = w;
        for (auto& v : h2)
            v *= ch;
        for (auto& v : w2)
            v *= cw;
        if (std::abs(normalized_power(h2, w2) - p) > 1e-12)
            ++bad_invariance;

        if (trial % 10 == 0) {
            const auto channels = random_channels(rng, 1 + rng.below(8), 12);
            const AutocorrMatrix r = autocorrelation(channels);
            cdouble tr(0.0, 0.0);
            for (std::size_t i = 0; i < r.r.rows; ++i)
                tr += r.r(i, i);
            if (std::abs(tr - cdouble(1.0, 0.0)) > 1e-9)
                ++bad_trace;
        }
    }
    c.expect(bad_bounds == 0, std::to_string(bad_bounds) + " bound violations");
    c.expect(bad_invariance == 0, std::to_string(bad_invariance) + " invariance violations");
    c.expect(bad_trace == 0, std::to_string(bad_trace) + " trace violations");
    c.finish(sw);
}

TEST_CASE("criterion 5: analytic gradients match finite differences") {
    Stopwatch sw;
    Criterion c(5);
    const double h = 1e-5;
    int instances = 0;
    double worst = 0.0;

    // every activation, linear readout
    for (Activation hidden : {Activation::relu, Activation::tanh, Activation::linear}) {
        Rng rng(mix_seed(0xac5, static_cast<std::uint64_t>(hidden)));
        for (int trial = 0; trial < 40; ++trial) {
            const auto spec = make_mlp_spec({3, 5, 4, 2}, hidden);
            Mlp net(spec, rng.next_u64());
            std::vector<double> x{rng.gaussian(), rng.gaussian(), rng.gaussian()};
            const std::vector<double> readout{rng.gaussian(), rng.gaussian()};

            Mlp::Cache cache;
            Rng drop_rng(1);
            net.forward_train(x, cache, drop_rng);
            if (hidden == Activation::relu && near_relu_kink(net, cache))
                continue;
            ++instances;

            Mlp::Grads grads;
            grads.init(spec);
            net.backward(cache, readout, grads);
            auto value = [&](const Mlp& probe) {
                const auto y = probe.forward(x);
                return readout[0] * y[0] + readout[1] * y[1];
            };
            for (std::size_t l = 0; l < net.weights.size(); ++l)
                for (std::size_t k = 0; k < net.weights[l].size(); ++k) {
                    Mlp probe = net;
                    probe.weights[l][k] += h;
                    const double up = value(probe);
                    probe.weights[l][k] -= 2.0 * h;
                    const double fd = (up - value(probe)) / (2.0 * h);
                    worst = std::max(worst, rel_err(grads.w[l][k], fd));
                }
        }
    }

    // cosine loss through the net
    {
        Rng rng(0xac55);
        for (int trial = 0; trial < 30; ++trial) {
            const auto spec =
                make_mlp_spec({4, 6, 4}, trial % 2 ? Activation::tanh : Activation::relu);
            Mlp net(spec, rng.next_u64());
            std::vector<double> x{rng.gaussian(), rng.gaussian(), rng.gaussian(),
                                  rng.gaussian()};
            CVector h_d(2);
            for (auto& v : h_d)
                v = rng.complex_gaussian();

            Mlp::Cache cache;
            Rng drop_rng(1);
            const auto out = net.forward_train(x, cache, drop_rng);
            if (near_relu_kink(net, cache))
                continue;
            ++instances;

            const CosineLoss cl = cosine_loss_and_grad(out, h_d);
            Mlp::Grads grads;
            grads.init(spec);
            net.backward(cache, cl.grad, grads);
            for (std::size_t l = 0; l < net.weights.size(); ++l)
                for (std::size_t k = 0; k < net.weights[l].size(); k += 2) {
                    Mlp probe = net;
                    probe.weights[l][k] += h;
                    const double up = cosine_loss_and_grad(probe.forward(x), h_d).loss;
                    probe.weights[l][k] -= 2.0 * h;
                    const double down = cosine_loss_and_grad(probe.forward(x), h_d).loss;
                    worst = std::max(worst, rel_err(grads.w[l][k], (up - down) / (2.0 * h)));
                }
        }
    }

    c.expect(instances >= 100, "only " + std::to_string(instances) + " instances");
    c.expect(worst < 1e-4, "worst relative error " + fmt(worst));
    c.note("worst relative error " + fmt(worst) + " over " + std::to_string(instances) +
           " instances");
    c.expect(sw.seconds() < 30.0, "runtime " + fmt(sw.seconds()) + " s");
    c.finish(sw);
}

TEST_CASE("criterion 6: direct net reproduces a line-of-sight scene") {
    Stopwatch sw;
    Criterion c(6);
    const Scene scene = default_scene(); // 32 antennas, LoS only
    const FrequencyPlan plan = default_frequency_plan();
    const auto pairs = synth_plane_pairs(scene, plan, 1000, 0xac6, 0.8);

    CheckerboardSplit split;
    split.square_side = 1.0;
    const SplitIndices idx = checkerboard_split(std::span<const SamplePair>(pairs), split);
    std::vector<SamplePair> train;
    for (std::size_t i : idx.train)
        train.push_back(pairs[i]);

    // analytic optimum: the downlink channel itself scores exactly 0 dB
    double worst_opt = 0.0;
    for (std::size_t i : idx.test)
        worst_opt = std::max(worst_opt,
                             std::abs(1.0 - normalized_power(pairs[i].h_d, pairs[i].h_d)));
    c.expect(worst_opt <= 1e-9, "matched-filter optimum off by " + fmt(worst_opt));

    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batch_size = 128;
    cfg.seed = 1;
    const TrainedDnn trained = train_dnn(default_dnn_spec(32), train, cfg);
    const EvalReport report = evaluate_seen_unseen(*trained.estimator, split, pairs);
    c.expect(report.p_unseen_db >= -1.0,
             "held-out mean power " + fmt(report.p_unseen_db) + " dB");
    c.note("held-out " + fmt(report.p_unseen_db) + " dB, seen " + fmt(report.p_seen_db) +
           " dB");
    c.expect(sw.seconds() < 300.0, "runtime " + fmt(sw.seconds()) + " s");
    c.finish(sw);
}

TEST_CASE("criterion 7: checkerboard partition properties on a 10k grid") {
    Stopwatch sw;
    Criterion c(7);
    std::vector<Vec3> grid;
    grid.reserve(10000);
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j)
            grid.push_back({0.5 * i - 20.0, 0.5 * j - 20.0, 1.0});

    // side and origin chosen so no grid point sits on a cell boundary: the
    // nearest boundary is 0.005 m away, far beyond rounding noise, so the
    // translation identities hold exactly
    CheckerboardSplit split;
    split.square_side = 0.73;
    split.origin_x = 0.015;
    split.origin_y = -0.015;

    const SplitIndices base = checkerboard_split(std::span<const Vec3>(grid), split);
    c.expect(base.train.size() + base.test.size() == grid.size(), "not exhaustive");
    {
        std::vector<char> hit(grid.size(), 0);
        bool dup = false;
        for (std::size_t i : base.train)
            dup |= std::exchange(hit[i], char(1)) != 0;
        for (std::size_t i : base.test)
            dup |= std::exchange(hit[i], char(1)) != 0;
        c.expect(!dup, "sides overlap");
    }

    auto flipped = split;
    flipped.parity_for_train = 1;
    const SplitIndices swapped = checkerboard_split(std::span<const Vec3>(grid), flipped);
    c.expect(base.train == swapped.test && base.test == swapped.train,
             "parity swap does not exchange the sides");

    for (const auto [p, q] : {std::pair{1, 0}, {0, 1}, {2, -3}, {-1, -1}}) {
        auto moved = split;
        moved.origin_x += 2.0 * split.square_side * p;
        moved.origin_y += 2.0 * split.square_side * q;
        const SplitIndices same = checkerboard_split(std::span<const Vec3>(grid), moved);
        c.expect(base.train == same.train,
                 "translation by (2a*" + std::to_string(p) + ", 2a*" + std::to_string(q) +
                     ") changed the split");
    }
    auto odd = split;
    odd.origin_x += split.square_side;
    const SplitIndices odd_split = checkerboard_split(std::span<const Vec3>(grid), odd);
    c.expect(base.train == odd_split.test, "translation by (a, 0) must swap the sides");
    c.finish(sw);
}

TEST_CASE("criterion 8: seen/unseen sweep on a 4-scatterer scene") {
    Stopwatch sw;
    Criterion c(8);
    const Scene scene = desk_scene(4, 2, 4, 7); // 8 antennas, LoS + 4 scatterers
    const FrequencyPlan plan = default_frequency_plan();
    const auto pairs = synth_plane_pairs(scene, plan, 700, 0xac8, 0.8);

    const EstimatorFactory factory = [](std::span<const SamplePair> train,
                                        std::uint64_t seed) -> std::unique_ptr<Estimator> {
        TrainConfig cfg;
        cfg.epochs = 120;
        cfg.batch_size = 64;
        cfg.seed = seed;
        return train_dnn(make_mlp_spec({128, 128, 64, 32, 16}), train, cfg).estimator;
    };

    const auto a_values = default_a_values();
    const auto entries = sweep_grid(pairs, factory, a_values, CheckerboardSplit{}, 0xac8);
    const auto reports = collect_reports(entries);
    c.expect(reports.size() == 14,
             "expected 14 reports, got " + std::to_string(reports.size()));
    for (const auto& entry : entries)
        if (!entry.error.empty())
            c.expect(false, "a=" + fmt(entry.a) + " failed: " + entry.error);

    const double random_bound_db = to_db(1.0 / 8.0);
    double worst_gap = -1e9, worst_seen = 1e9;
    for (const auto& r : reports) {
        worst_gap = std::max(worst_gap, r.gap_db);
        worst_seen = std::min(worst_seen, r.p_seen_db);
        c.expect(r.gap_db <= 0.5,
                 "a=" + fmt(r.a) + ": gap " + fmt(r.gap_db) + " dB exceeds +0.5");
        c.expect(r.p_seen_db >= random_bound_db + 3.0,
                 "a=" + fmt(r.a) + ": seen " + fmt(r.p_seen_db) + " dB not 3 dB above " +
                     fmt(random_bound_db));
    }
    c.note("worst gap " + fmt(worst_gap) + " dB, worst seen " + fmt(worst_seen) + " dB");
    c.finish(sw);
}

TEST_CASE("criterion 9: measured dichasus-015x targets (optional tier)") {
    Stopwatch sw;
    if (!std::filesystem::exists(g_dichasus)) {
        std::printf("[acceptance] criterion 9: SKIP (no dataset at %s)\n", g_dichasus.c_str());
        std::fflush(stdout);
        return;
    }
    Criterion c(9);
    auto records = load_dataset(g_dichasus);
    REQUIRE(!records.empty());
    if (records[0].csi.cols > 32)
        for (auto& rec : records)
            rec.csi = average_subcarriers(rec.csi, rec.csi.cols / 32);
    const auto pairs = extract_pairs(records, kDefaultUlRange, kDefaultDlIndex);

    const auto principal = make_principal_estimator(pairs);
    const double principal_db = mean_power_db(pairs, *principal);
    c.expect(std::abs(principal_db - (-8.8)) <= 0.5,
             "principal component " + fmt(principal_db) + " dB vs -8.8 +/- 0.5");

    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 256;
    cfg.seed = 1;

    CheckerboardSplit split;
    split.square_side = 2.0;
    const SplitIndices idx = checkerboard_split(std::span<const SamplePair>(pairs), split);
    std::vector<SamplePair> train;
    for (std::size_t i : idx.train)
        train.push_back(pairs[i]);
    const TrainedDnn checkered = train_dnn(default_dnn_spec(32), train, cfg);
    const EvalReport report = evaluate_seen_unseen(*checkered.estimator, split, pairs);
    c.expect(std::abs(report.p_seen_db - (-0.9)) <= 1.5,
             "checkered 2 m seen " + fmt(report.p_seen_db) + " dB vs -0.9 +/- 1.5");
    c.expect(std::abs(report.p_unseen_db - (-4.2)) <= 1.5,
             "checkered 2 m unseen " + fmt(report.p_unseen_db) + " dB vs -4.2 +/- 1.5");

    const TrainedDnn whole = train_dnn(default_dnn_spec(32), pairs, cfg);
    const double whole_db = mean_power_db(pairs, *whole.estimator);
    c.expect(std::abs(whole_db - (-1.3)) <= 1.5,
             "whole-area net " + fmt(whole_db) + " dB vs -1.3 +/- 1.5");
    c.finish(sw);
}

int main(int argc, char** argv) {
    std::vector<const char*> args;
    for (int i = 0; i < argc; ++i) {
        if (std::string_view(argv[i]) == "--dichasus" && i + 1 < argc) {
            g_dichasus = argv[++i];
            continue;
        }
        args.push_back(argv[i]);
    }
    doctest::Context ctx(static_cast<int>(args.size()),
                         const_cast<char**>(args.data()));
    return ctx.run();
}
