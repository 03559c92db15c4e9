// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace csimap {

using cdouble = std::complex<double>;
using cfloat = std::complex<float>;

inline constexpr double kSpeedOfLight = 299792458.0; // m/s

// Execution mode for the data-parallel kernels. `serial` is the reference
// implementation kept for testing; `parallel` uses OpenMP. Both produce
// bitwise-identical results (each output element is computed independently).
enum class ExecMode { serial, parallel };

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

// Dense row-major matrix. Rows index antennas throughout this project, so
// row-major storage coincides with the antenna-major layout of the dataset
// file format.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool empty() const { return data.empty(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

using CMatrix = Matrix<cdouble>;
using CfMatrix = Matrix<cfloat>;
using CVector = std::vector<cdouble>;

inline double to_db(double linear) { return 10.0 * std::log10(linear); }

} // namespace csimap
