// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "csimap/dataset.hpp"
#include "csimap/estimator.hpp"
#include "csimap/types.hpp"

namespace csimap {

// |h_d^H w|^2 / (‖h_d‖^2 ‖w‖^2), clamped to [0,1] against rounding.
// Invariant under any nonzero complex rescaling of either argument.
double normalized_power(const CVector& h_d, const CVector& w);

// 10*log10 of the linear-domain mean of normalized_power over the pairs.
// Means are always taken in linear domain, never over dB values.
double mean_power_db(std::span<const SamplePair> pairs, const Estimator& estimator,
                     ExecMode exec = ExecMode::parallel);

// Unit-norm draw from CN(0, I), independent of any channel data.
CVector random_precoder(std::uint64_t seed, std::size_t m);

// Dataset mean of h h^H / ‖h‖^2: Hermitian, PSD, trace 1.
struct AutocorrMatrix {
    CMatrix r;
    // Checks Hermitian symmetry and trace within 1e-9, real nonnegative
    // diagonal, finite entries, and a handful of seeded Rayleigh-quotient
    // probes >= -1e-9. Full PSD holds by construction.
    void validate() const;
};

AutocorrMatrix autocorrelation(std::span<const CVector> targets);

struct EigenResult {
    CVector vector;          // unit norm, largest-magnitude entry real positive
    double value = 0.0;      // Rayleigh quotient, in [0, 1] for AutocorrMatrix
    double gap = 0.0;        // value minus a deflated estimate of the runner-up
    std::size_t iterations = 0;
    bool degenerate = false; // gap < tol: the maximizer is not unique
};

// Power iteration with deflation-free restart on stall. Returns w with
// ‖R w - λ w‖ <= tol; throws NumericalError when max_iter is exhausted,
// which signals near-degenerate leading eigenvalues.
EigenResult dominant_eigenvector(const AutocorrMatrix& r, double tol = 1e-10,
                                 std::size_t max_iter = 10000);

// autocorrelation + dominant_eigenvector in one step.
EigenResult principal_component_baseline(std::span<const CVector> targets, double tol = 1e-10,
                                         std::size_t max_iter = 10000);

// Constant estimator holding the principal component of the training
// targets, fingerprinted with the training positions.
std::unique_ptr<ConstantEstimator> make_principal_estimator(std::span<const SamplePair> train,
                                                            double tol = 1e-10,
                                                            std::size_t max_iter = 10000);

} // namespace csimap
