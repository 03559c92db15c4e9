// SPDX-License-Identifier: Apache-2.0

#include "csimap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csimap/errors.hpp"
#include "csimap/kernels.hpp"
#include "csimap/rng.hpp"
#include "csimap/sum.hpp"

namespace csimap {

namespace {

double norm2(const CVector& v) {
    double acc = 0.0;
    for (const auto& x : v)
        acc += std::norm(x);
    return acc;
}

CVector matvec(const CMatrix& r, const CVector& v) {
    const std::size_t m = r.rows;
    CVector out(m, cdouble(0.0, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        cdouble acc(0.0, 0.0);
        for (std::size_t j = 0; j < m; ++j)
            acc += r(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

void normalize(CVector& v) {
    const double n = std::sqrt(norm2(v));
    if (!(n > 0.0) || !std::isfinite(n))
        throw NumericalError("cannot normalize zero or non-finite vector");
    for (auto& x : v)
        x /= n;
}

// Largest-magnitude entry made real positive; ties go to the first index.
void canonicalize_phase(CVector& w) {
    std::size_t best = 0;
    double best_mag = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double mag = std::abs(w[i]);
        if (mag > best_mag) {
            best_mag = mag;
            best = i;
        }
    }
    if (best_mag == 0.0)
        return;
    const cdouble rot = std::conj(w[best]) / best_mag;
    for (auto& x : w)
        x *= rot;
    w[best] = cdouble(std::abs(w[best]), 0.0);
}

// Bounded Rayleigh-quotient estimate of the runner-up eigenvalue of R after
// removing the converged (value, w) pair. Used for the gap report only, so a
// loose iteration cap is fine.
double second_eigenvalue_estimate(const CMatrix& r, const CVector& w, double value) {
    const std::size_t m = r.rows;
    if (m < 2)
        return 0.0;
    Rng rng(mix_seed(0x2e19e2ULL, m));
    CVector v(m);
    for (auto& x : v)
        x = rng.complex_gaussian();
    for (std::size_t iter = 0; iter < 256; ++iter) {
        // Project out w, then apply R - value * w w^H.
        cdouble overlap(0.0, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            overlap += std::conj(w[i]) * v[i];
        for (std::size_t i = 0; i < m; ++i)
            v[i] -= overlap * w[i];
        const double n = std::sqrt(norm2(v));
        if (!(n > 1e-300))
            return 0.0; // deflated operator annihilates everything: rank-1 R
        for (auto& x : v)
            x /= n;
        CVector rv = matvec(r, v);
        cdouble c(0.0, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            c += std::conj(w[i]) * rv[i];
        for (std::size_t i = 0; i < m; ++i)
            rv[i] -= c * w[i];
        if (iter + 1 == 256) {
            cdouble q(0.0, 0.0);
            for (std::size_t i = 0; i < m; ++i)
                q += std::conj(v[i]) * rv[i];
            return std::clamp(q.real(), 0.0, value);
        }
        v = std::move(rv);
    }
    return 0.0;
}

} // namespace

double normalized_power(const CVector& h_d, const CVector& w) {
    if (h_d.size() != w.size())
        throw DataError("normalized_power: vector length mismatch");
    const double nh = norm2(h_d);
    const double nw = norm2(w);
    if (!(nh > 0.0) || !(nw > 0.0))
        throw NumericalError("normalized_power: zero-norm input");
    cdouble s(0.0, 0.0);
    for (std::size_t i = 0; i < h_d.size(); ++i)
        s += std::conj(h_d[i]) * w[i];
    const double p = std::norm(s) / (nh * nw);
    if (!std::isfinite(p))
        throw NumericalError("normalized_power: non-finite result");
    return std::clamp(p, 0.0, 1.0);
}

double mean_power_db(std::span<const SamplePair> pairs, const Estimator& estimator,
                     ExecMode exec) {
    if (pairs.empty())
        throw DataError("mean_power_db: empty pair list");
    const std::vector<double> p = kernels::power_profile(pairs, estimator, exec);
    return to_db(mean(p));
}

CVector random_precoder(std::uint64_t seed, std::size_t m) {
    if (m < 1)
        throw ConfigError("random_precoder: need m >= 1");
    Rng rng(seed);
    return random_unit_vector(rng, m);
}

void AutocorrMatrix::validate() const {
    const std::size_t m = r.rows;
    if (m == 0 || r.cols != m)
        throw DataError("autocorrelation matrix must be square and non-empty");
    double trace = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const cdouble d = r(i, i);
        if (!std::isfinite(d.real()) || !std::isfinite(d.imag()))
            throw NumericalError("autocorrelation matrix has non-finite entries");
        if (std::abs(d.imag()) > 1e-9 || d.real() < -1e-9)
            throw NumericalError("autocorrelation diagonal must be real nonnegative");
        trace += d.real();
        for (std::size_t j = i + 1; j < m; ++j) {
            if (std::abs(r(i, j) - std::conj(r(j, i))) > 1e-9)
                throw NumericalError("autocorrelation matrix is not Hermitian within 1e-9");
        }
    }
    if (std::abs(trace - 1.0) > 1e-9)
        throw NumericalError("autocorrelation trace deviates from 1 beyond 1e-9");
    Rng rng(0xa11c0eefULL);
    for (int probe = 0; probe < 8; ++probe) {
        const CVector v = random_unit_vector(rng, m);
        const CVector rv = matvec(r, v);
        cdouble q(0.0, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            q += std::conj(v[i]) * rv[i];
        if (q.real() < -1e-9)
            throw NumericalError("autocorrelation matrix fails PSD probe");
    }
}

AutocorrMatrix autocorrelation(std::span<const CVector> targets) {
    if (targets.empty())
        throw DataError("autocorrelation: empty target list");
    const std::size_t m = targets.front().size();
    CMatrix acc(m, m);
    for (std::size_t n = 0; n < targets.size(); ++n) {
        const CVector& h = targets[n];
        if (h.size() != m)
            throw DataError("autocorrelation: inconsistent vector lengths");
        const double nh = norm2(h);
        if (!(nh > 0.0))
            throw DataError("autocorrelation: zero-norm target");
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                acc(i, j) += h[i] * std::conj(h[j]) / nh;
    }
    const double inv = 1.0 / static_cast<double>(targets.size());
    AutocorrMatrix out{CMatrix(m, m)};
    // Symmetrize: (A + A^H)/2 removes the rounding skew of the accumulation.
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            out.r(i, j) = 0.5 * inv * (acc(i, j) + std::conj(acc(j, i)));
    out.validate();
    return out;
}

EigenResult dominant_eigenvector(const AutocorrMatrix& r, double tol, std::size_t max_iter) {
    r.validate();
    if (!(tol > 0.0))
        throw ConfigError("dominant_eigenvector: tol must be positive");
    const std::size_t m = r.r.rows;

    // All-ones start plus a tiny seeded perturbation so a start vector exactly
    // orthogonal to the leading eigenspace cannot stall the iteration.
    Rng rng(0x9d011a27ULL);
    CVector w(m);
    for (auto& x : w)
        x = cdouble(1.0, 0.0) + 1e-8 * rng.complex_gaussian();
    normalize(w);

    double residual = 0.0;
    double lambda = 0.0;
    std::size_t restarts = 0;
    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        CVector v = matvec(r.r, w);
        const double nv = std::sqrt(norm2(v));
        if (!(nv > 1e-300)) {
            // w landed in the nullspace; restart from a fresh random vector.
            if (++restarts > 8)
                throw NumericalError("dominant_eigenvector: repeated nullspace restarts");
            w = random_unit_vector(rng, m);
            continue;
        }
        cdouble q(0.0, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            q += std::conj(w[i]) * v[i];
        lambda = q.real();
        double res2 = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            res2 += std::norm(v[i] - lambda * w[i]);
        residual = std::sqrt(res2);
        if (residual <= tol) {
            canonicalize_phase(w);
            const double second = second_eigenvalue_estimate(r.r, w, lambda);
            EigenResult out;
            out.vector = std::move(w);
            out.value = std::clamp(lambda, 0.0, 1.0);
            out.gap = out.value - second;
            out.iterations = iter;
            out.degenerate = out.gap < tol;
            return out;
        }
        for (std::size_t i = 0; i < m; ++i)
            w[i] = v[i] / nv;
    }
    std::ostringstream msg;
    msg << "dominant_eigenvector: no convergence after " << max_iter
        << " iterations (residual " << residual << ", tol " << tol
        << "); leading eigenvalues are likely near-degenerate";
    throw NumericalError(msg.str());
}

EigenResult principal_component_baseline(std::span<const CVector> targets, double tol,
                                         std::size_t max_iter) {
    return dominant_eigenvector(autocorrelation(targets), tol, max_iter);
}

std::unique_ptr<ConstantEstimator> make_principal_estimator(std::span<const SamplePair> train,
                                                            double tol, std::size_t max_iter) {
    if (train.empty())
        throw DataError("make_principal_estimator: empty training set");
    std::vector<CVector> targets;
    targets.reserve(train.size());
    for (const auto& p : train)
        targets.push_back(p.h_d);
    EigenResult eig = principal_component_baseline(targets, tol, max_iter);
    return std::make_unique<ConstantEstimator>(std::move(eig.vector), "principal",
                                               position_fingerprint(train));
}

} // namespace csimap
