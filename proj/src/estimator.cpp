// SPDX-License-Identifier: Apache-2.0

#include "csimap/estimator.hpp"

#include <cmath>
#include <cstring>

#include "csimap/errors.hpp"
#include "csimap/rng.hpp"

namespace csimap {

namespace {

std::uint64_t hash_position(const Vec3& p) {
    double coords[3] = {p.x, p.y, p.z};
    return fnv1a(coords, sizeof coords);
}

} // namespace

std::uint64_t position_fingerprint(std::span<const SamplePair> pairs) {
    // Sum of per-position hashes: invariant under reordering of the set.
    std::uint64_t acc = 0x9e3779b97f4a7c15ULL;
    for (const auto& p : pairs)
        acc += mix64(hash_position(p.position));
    return acc;
}

std::uint64_t position_fingerprint(std::span<const Vec3> positions) {
    std::uint64_t acc = 0x9e3779b97f4a7c15ULL;
    for (const auto& p : positions)
        acc += mix64(hash_position(p));
    return acc;
}

ConstantEstimator::ConstantEstimator(CVector w, std::string id,
                                     std::optional<std::uint64_t> provenance)
    : w_(std::move(w)), id_(std::move(id)), provenance_(provenance) {
    double n2 = 0.0;
    for (const auto& v : w_)
        n2 += std::norm(v);
    if (!(n2 > 0.0) || !std::isfinite(n2))
        throw NumericalError("constant precoder has zero or non-finite norm");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& v : w_)
        v *= inv;
}

CVector RandomEstimator::predict(const CMatrix& h_u) const {
    std::uint64_t h = fnv1a(&seed_, sizeof seed_);
    if (!h_u.data.empty())
        h = fnv1a(h_u.data.data(), h_u.data.size() * sizeof(cdouble), h);
    Rng rng(h);
    return random_unit_vector(rng, m_);
}

} // namespace csimap
