// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csimap/errors.hpp"
#include "csimap/types.hpp"

namespace csimap {

// Receive array placement: center position plus broadside unit vector.
struct ArrayPose {
    Vec3 position;
    Vec3 broadside{1.0, 0.0, 0.0};
};

struct DatasetMeta {
    std::size_t num_antennas = 0;        // M
    std::size_t num_raw_subcarriers = 0; // N_sub (before averaging)
    std::size_t num_avg_subcarriers = 0; // S
    double carrier_freq_hz = 0.0;
    ArrayPose array_pose;

    void validate() const;
};

// One position-tagged channel snapshot. CSI is stored in single precision,
// matching the file format, so a write/reload round trip is bit-identical.
struct CsiRecord {
    Vec3 position;
    CfMatrix csi; // M x S, antenna-major
};

// Virtual uplink input / downlink target extracted from one record.
// Math downstream runs in double precision.
struct SamplePair {
    CMatrix h_u; // M x 8
    CVector h_d; // length M
    Vec3 position;
};

// Half-open column range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    bool contains(std::size_t i) const { return i >= begin && i < end; }
};

inline constexpr IndexRange kDefaultUlRange{0, 8};
inline constexpr std::size_t kDefaultDlIndex = 28;
inline constexpr std::size_t kDefaultAvgSubcarriers = 32;

// Dataset container format (little-endian):
//   magic "CSI1" | u32 M | u32 S | u32 record_count
//   per record: 3 x f64 position, then M*S complex values as
//   interleaved (f32 real, f32 imag), antenna-major.
// A JSON sidecar (same path + ".json") carries DatasetMeta.
std::vector<CsiRecord> load_dataset(const std::string& path);
std::vector<CsiRecord> load_dataset(const std::string& path, const DatasetMeta& meta);
void save_dataset(const std::string& path, std::span<const CsiRecord> records);

DatasetMeta load_meta(const std::string& json_path);
void save_meta(const std::string& json_path, const DatasetMeta& meta);
std::string sidecar_path(const std::string& dataset_path);

void validate_record(const CsiRecord& rec, std::size_t index);

// Column-block averaging: output column k is the arithmetic mean of input
// columns [k*batch, (k+1)*batch). batch must divide the column count.
template <typename T>
Matrix<T> average_subcarriers(const Matrix<T>& raw, std::size_t batch) {
    if (batch == 0 || raw.cols % batch != 0)
        throw DataError("average_subcarriers: batch " + std::to_string(batch) +
                        " does not divide subcarrier count " + std::to_string(raw.cols));
    Matrix<T> out(raw.rows, raw.cols / batch);
    for (std::size_t r = 0; r < raw.rows; ++r) {
        for (std::size_t k = 0; k < out.cols; ++k) {
            cdouble acc = 0.0;
            for (std::size_t j = k * batch; j < (k + 1) * batch; ++j)
                acc += cdouble(raw(r, j));
            out(r, k) = static_cast<T>(acc / static_cast<double>(batch));
        }
    }
    return out;
}

SamplePair extract_ul_dl(const CsiRecord& rec, IndexRange ul_range, std::size_t dl_index);
std::vector<SamplePair> extract_pairs(std::span<const CsiRecord> records, IndexRange ul_range,
                                      std::size_t dl_index);

} // namespace csimap
