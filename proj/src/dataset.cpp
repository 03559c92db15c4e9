// SPDX-License-Identifier: Apache-2.0

#include "csimap/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace csimap {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'I', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in)
        throw DataError("dataset header truncated while reading " + what);
    return v;
}

} // namespace

void DatasetMeta::validate() const {
    if (num_antennas < 1)
        throw DataError("dataset meta: num_antennas must be >= 1");
    if (num_avg_subcarriers < 1)
        throw DataError("dataset meta: num_avg_subcarriers must be >= 1");
    if (num_raw_subcarriers > 0 && num_raw_subcarriers % num_avg_subcarriers != 0)
        throw DataError("dataset meta: num_avg_subcarriers must divide num_raw_subcarriers");
    if (!(carrier_freq_hz > 0.0))
        throw DataError("dataset meta: carrier_freq_hz must be positive");
    if (std::abs(array_pose.broadside.norm() - 1.0) > 1e-6)
        throw DataError("dataset meta: array broadside vector must have unit norm");
}

void validate_record(const CsiRecord& rec, std::size_t index) {
    bool any_nonzero = false;
    for (const cfloat& v : rec.csi.data) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw DataError("record " + std::to_string(index) + ": non-finite CSI entry");
        if (v != cfloat(0.0f, 0.0f))
            any_nonzero = true;
    }
    if (!any_nonzero)
        throw DataError("record " + std::to_string(index) + ": all-zero CSI matrix");
    if (!std::isfinite(rec.position.x) || !std::isfinite(rec.position.y) ||
        !std::isfinite(rec.position.z))
        throw DataError("record " + std::to_string(index) + ": non-finite position");
}

std::vector<CsiRecord> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open dataset file: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError(path + ": bad magic, not a CSI1 dataset");

    const std::uint32_t m = read_u32(in, "antenna count");
    const std::uint32_t s = read_u32(in, "subcarrier count");
    const std::uint32_t count = read_u32(in, "record count");
    if (m == 0 || s == 0)
        throw DataError(path + ": header claims zero antennas or subcarriers");

    std::vector<CsiRecord> records;
    records.reserve(count);
    std::vector<float> buf(static_cast<std::size_t>(m) * s * 2);
    for (std::uint32_t i = 0; i < count; ++i) {
        CsiRecord rec;
        double pos[3];
        in.read(reinterpret_cast<char*>(pos), sizeof pos);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in)
            throw DataError(path + ": record " + std::to_string(i) +
                            ": unexpected end of file (header claims " + std::to_string(count) +
                            " records)");
        rec.position = {pos[0], pos[1], pos[2]};
        rec.csi = CfMatrix(m, s);
        for (std::size_t k = 0; k < rec.csi.data.size(); ++k)
            rec.csi.data[k] = cfloat(buf[2 * k], buf[2 * k + 1]);
        validate_record(rec, i);
        records.push_back(std::move(rec));
    }
    if (in.peek() != std::ifstream::traits_type::eof())
        throw DataError(path + ": trailing bytes after " + std::to_string(count) + " records");
    return records;
}

std::vector<CsiRecord> load_dataset(const std::string& path, const DatasetMeta& meta) {
    meta.validate();
    auto records = load_dataset(path);
    for (const CsiRecord& rec : records) {
        if (rec.csi.rows != meta.num_antennas || rec.csi.cols != meta.num_avg_subcarriers)
            throw DataError(path + ": record shape " + std::to_string(rec.csi.rows) + "x" +
                            std::to_string(rec.csi.cols) + " does not match meta " +
                            std::to_string(meta.num_antennas) + "x" +
                            std::to_string(meta.num_avg_subcarriers));
    }
    return records;
}

void save_dataset(const std::string& path, std::span<const CsiRecord> records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot open for writing: " + path);

    std::uint32_t m = 0, s = 0;
    if (!records.empty()) {
        m = static_cast<std::uint32_t>(records[0].csi.rows);
        s = static_cast<std::uint32_t>(records[0].csi.cols);
    }
    out.write(kMagic, 4);
    write_u32(out, m);
    write_u32(out, s);
    write_u32(out, static_cast<std::uint32_t>(records.size()));

    std::vector<float> buf;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const CsiRecord& rec = records[i];
        if (rec.csi.rows != m || rec.csi.cols != s)
            throw DataError("save_dataset: record " + std::to_string(i) +
                            " shape differs from record 0");
        const double pos[3] = {rec.position.x, rec.position.y, rec.position.z};
        out.write(reinterpret_cast<const char*>(pos), sizeof pos);
        buf.resize(rec.csi.data.size() * 2);
        for (std::size_t k = 0; k < rec.csi.data.size(); ++k) {
            buf[2 * k] = rec.csi.data[k].real();
            buf[2 * k + 1] = rec.csi.data[k].imag();
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out)
        throw DataError("write failed: " + path);
}

std::string sidecar_path(const std::string& dataset_path) { return dataset_path + ".json"; }

DatasetMeta load_meta(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in)
        throw DataError("cannot open sidecar: " + json_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path + ": invalid JSON: " + e.what());
    }
    DatasetMeta meta;
    try {
        meta.num_antennas = j.at("num_antennas").get<std::size_t>();
        meta.num_avg_subcarriers = j.at("num_avg_subcarriers").get<std::size_t>();
        meta.num_raw_subcarriers = j.value("num_raw_subcarriers", std::size_t{0});
        meta.carrier_freq_hz = j.at("carrier_freq_hz").get<double>();
        const auto& pose = j.at("array_pose");
        const auto pos = pose.at("position").get<std::vector<double>>();
        const auto dir = pose.at("broadside").get<std::vector<double>>();
        if (pos.size() != 3 || dir.size() != 3)
            throw DataError(json_path + ": array_pose vectors must have 3 components");
        meta.array_pose.position = {pos[0], pos[1], pos[2]};
        meta.array_pose.broadside = {dir[0], dir[1], dir[2]};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path + ": missing or malformed field: " + e.what());
    }
    meta.validate();
    return meta;
}

void save_meta(const std::string& json_path, const DatasetMeta& meta) {
    meta.validate();
    nlohmann::json j{
        {"num_antennas", meta.num_antennas},
        {"num_raw_subcarriers", meta.num_raw_subcarriers},
        {"num_avg_subcarriers", meta.num_avg_subcarriers},
        {"carrier_freq_hz", meta.carrier_freq_hz},
        {"array_pose",
         {{"position", {meta.array_pose.position.x, meta.array_pose.position.y,
                        meta.array_pose.position.z}},
          {"broadside", {meta.array_pose.broadside.x, meta.array_pose.broadside.y,
                         meta.array_pose.broadside.z}}}},
    };
    std::ofstream out(json_path, std::ios::trunc);
    if (!out)
        throw DataError("cannot open for writing: " + json_path);
    out << j.dump(2) << "\n";
}

SamplePair extract_ul_dl(const CsiRecord& rec, IndexRange ul_range, std::size_t dl_index) {
    const std::size_t s = rec.csi.cols;
    if (ul_range.begin >= ul_range.end || ul_range.end > s)
        throw DataError("extract_ul_dl: ul_range [" + std::to_string(ul_range.begin) + ", " +
                        std::to_string(ul_range.end) + ") out of bounds for S = " +
                        std::to_string(s));
    if (ul_range.size() != kDefaultUlRange.size())
        throw DataError("extract_ul_dl: ul_range must select exactly " +
                        std::to_string(kDefaultUlRange.size()) + " columns");
    if (dl_index >= s)
        throw DataError("extract_ul_dl: dl_index " + std::to_string(dl_index) +
                        " out of bounds for S = " + std::to_string(s));
    if (ul_range.contains(dl_index))
        throw DataError("extract_ul_dl: dl_index " + std::to_string(dl_index) +
                        " lies inside ul_range (downlink would leak into the input)");

    SamplePair pair;
    pair.position = rec.position;
    pair.h_u = CMatrix(rec.csi.rows, ul_range.size());
    pair.h_d.resize(rec.csi.rows);
    for (std::size_t ant = 0; ant < rec.csi.rows; ++ant) {
        for (std::size_t k = 0; k < ul_range.size(); ++k)
            pair.h_u(ant, k) = cdouble(rec.csi(ant, ul_range.begin + k));
        pair.h_d[ant] = cdouble(rec.csi(ant, dl_index));
    }
    return pair;
}

std::vector<SamplePair> extract_pairs(std::span<const CsiRecord> records, IndexRange ul_range,
                                      std::size_t dl_index) {
    std::vector<SamplePair> pairs;
    pairs.reserve(records.size());
    for (const CsiRecord& rec : records)
        pairs.push_back(extract_ul_dl(rec, ul_range, dl_index));
    return pairs;
}

} // namespace csimap
