// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "csimap/types.hpp"

namespace csimap {

// splitmix64 finalizer; used both to condition seeds and to derive
// independent per-item streams (positions, draws, sweep entries).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(base ^ mix64(stream));
}

// FNV-1a over raw bytes; used for spec hashes and provenance fingerprints.
inline std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic random source. mt19937_64 output is fully specified by the
// standard; the bit-to-double mapping and the Box-Muller transform below are
// ours, so identical seeds give identical streams on every standard library.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform on [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal, Box-Muller with cached second value
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // circularly-symmetric complex standard normal CN(0, 1)
    cdouble complex_gaussian() {
        const double re = gaussian();
        const double im = gaussian();
        return cdouble(re * M_SQRT1_2, im * M_SQRT1_2);
    }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // multiply-shift; bias is negligible for the n used here (dataset sizes)
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Unit-norm vector drawn from the isotropic (Haar) distribution on the
// complex sphere: normalize a CN(0, I) draw.
inline CVector random_unit_vector(Rng& rng, std::size_t m) {
    CVector v(m);
    double norm_sq = 0.0;
    for (auto& e : v) {
        e = rng.complex_gaussian();
        norm_sq += std::norm(e);
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& e : v)
        e *= inv;
    return v;
}

} // namespace csimap
