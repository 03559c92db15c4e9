// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "csimap/dataset.hpp"
#include "csimap/types.hpp"

namespace csimap {

// Anything that maps an uplink snapshot to a unit-norm precoding vector.
// predict must be pure and thread-safe: the evaluation kernels fan out over
// samples. Estimators built from training data carry a provenance
// fingerprint of the exact training positions so the seen/unseen evaluation
// can reject a mismatched split.
class Estimator {
  public:
    virtual ~Estimator() = default;
    virtual CVector predict(const CMatrix& h_u) const = 0;
    virtual std::string id() const = 0;
    virtual std::optional<std::uint64_t> provenance() const { return std::nullopt; }
};

// Order-independent fingerprint of a set of positions.
std::uint64_t position_fingerprint(std::span<const SamplePair> pairs);
std::uint64_t position_fingerprint(std::span<const Vec3> positions);

// Constant precoder (e.g. the principal-component baseline).
class ConstantEstimator final : public Estimator {
  public:
    ConstantEstimator(CVector w, std::string id,
                      std::optional<std::uint64_t> provenance = std::nullopt);
    CVector predict(const CMatrix&) const override { return w_; }
    std::string id() const override { return id_; }
    std::optional<std::uint64_t> provenance() const override { return provenance_; }
    const CVector& vector() const { return w_; }

  private:
    CVector w_;
    std::string id_;
    std::optional<std::uint64_t> provenance_;
};

// Random precoding baseline as an Estimator. Each input gets its own draw,
// keyed by a hash of (seed, input bytes): deterministic and reproducible in
// any evaluation order, statistically independent of the channel.
class RandomEstimator final : public Estimator {
  public:
    RandomEstimator(std::uint64_t seed, std::size_t m) : seed_(seed), m_(m) {}
    CVector predict(const CMatrix& h_u) const override;
    std::string id() const override { return "random"; }

  private:
    std::uint64_t seed_;
    std::size_t m_;
};

} // namespace csimap
