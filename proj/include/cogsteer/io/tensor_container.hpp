#pragma once

// Tensor container file layout:
//
//   u64 little-endian   manifest length in bytes
//   manifest            UTF-8 JSON array of
//                       {"name", "dtype": "f32", "shape": [...], "offset", "nbytes"}
//   payload             raw little-endian float32 data; offsets are relative
//                       to the first payload byte
//
// Entries are written in name order so identical contents produce identical
// files.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cogsteer/core/error.hpp"

namespace cogsteer {

struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<std::int64_t> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        require(static_cast<std::int64_t>(data.size()) == numel(shape), "tensor data does not match shape");
    }

    static std::int64_t numel(const std::vector<std::int64_t> & shape) {
        return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
    }

    static Tensor zeros(std::vector<std::int64_t> shape) {
        const auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<float>(static_cast<std::size_t>(n), 0.0f));
    }

    std::int64_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t size() const { return data.size(); }

    bool operator==(const Tensor &) const = default;
};

using TensorMap = std::map<std::string, Tensor>;

namespace detail {

inline std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

inline std::uint64_t read_u64_le(const unsigned char * b) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

inline void floats_to_le(std::span<const float> src, char * dst) {
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(dst, src.data(), src.size_bytes());
    } else {
        for (std::size_t i = 0; i < src.size(); ++i) {
            const std::uint32_t v = bswap32(std::bit_cast<std::uint32_t>(src[i]));
            std::memcpy(dst + 4 * i, &v, 4);
        }
    }
}

inline void floats_from_le(const char * src, std::span<float> dst) {
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(dst.data(), src, dst.size_bytes());
    } else {
        for (std::size_t i = 0; i < dst.size(); ++i) {
            std::uint32_t v;
            std::memcpy(&v, src + 4 * i, 4);
            dst[i] = std::bit_cast<float>(bswap32(v));
        }
    }
}

} // namespace detail

inline std::string serialize_container(const TensorMap & tensors) {
    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto & [name, t] : tensors) {
        require(static_cast<std::int64_t>(t.data.size()) == Tensor::numel(t.shape),
                "tensor '" + name + "' data does not match its shape");
        const std::uint64_t nbytes = 4ULL * t.data.size();
        manifest.push_back({{"name", name}, {"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}, {"nbytes", nbytes}});
        offset += nbytes;
    }
    const std::string header = manifest.dump();
    std::string out;
    out.resize(8 + header.size() + offset);
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<char>(static_cast<std::uint64_t>(header.size()) >> (8 * i));
    }
    std::memcpy(out.data() + 8, header.data(), header.size());
    char * payload = out.data() + 8 + header.size();
    std::uint64_t pos = 0;
    for (const auto & [name, t] : tensors) {
        detail::floats_to_le(t.data, payload + pos);
        pos += 4ULL * t.data.size();
    }
    return out;
}

// Parses a container held in memory. When `require_finite` is set, NaN or
// Inf anywhere in the payload is rejected.
inline TensorMap parse_container(const std::string & bytes, bool require_finite = true) {
    if (bytes.size() < 8) {
        throw FormatError("malformed header: file shorter than the 8-byte length prefix");
    }
    const std::uint64_t header_len = detail::read_u64_le(reinterpret_cast<const unsigned char *>(bytes.data()));
    if (header_len > bytes.size() - 8) {
        throw FormatError("malformed header: manifest length exceeds file size");
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception & e) {
        throw FormatError(std::string("malformed header: ") + e.what());
    }
    if (!manifest.is_array()) {
        throw FormatError("malformed header: manifest is not a JSON array");
    }
    const std::uint64_t payload_size = bytes.size() - 8 - header_len;
    const char * payload = bytes.data() + 8 + header_len;

    TensorMap out;
    for (const auto & entry : manifest) {
        std::string name;
        std::vector<std::int64_t> shape;
        std::uint64_t offset = 0;
        std::uint64_t nbytes = 0;
        try {
            name = entry.at("name").get<std::string>();
            if (entry.at("dtype").get<std::string>() != "f32") {
                throw FormatError("unsupported dtype for tensor '" + name + "'");
            }
            shape = entry.at("shape").get<std::vector<std::int64_t>>();
            offset = entry.at("offset").get<std::uint64_t>();
            nbytes = entry.at("nbytes").get<std::uint64_t>();
        } catch (const nlohmann::json::exception & e) {
            throw FormatError(std::string("malformed header entry: ") + e.what());
        }
        if (std::any_of(shape.begin(), shape.end(), [](std::int64_t d) { return d < 0; })) {
            throw FormatError("negative dimension in tensor '" + name + "'");
        }
        const auto n = static_cast<std::uint64_t>(Tensor::numel(shape));
        if (nbytes != 4 * n) {
            throw FormatError("shape/nbytes mismatch for tensor '" + name + "'");
        }
        if (offset > payload_size || nbytes > payload_size - offset) {
            throw FormatError("offset out of range for tensor '" + name + "'");
        }
        if (out.contains(name)) {
            throw FormatError("duplicate tensor '" + name + "'");
        }
        Tensor t;
        t.shape = std::move(shape);
        t.data.resize(n);
        detail::floats_from_le(payload + offset, t.data);
        if (require_finite) {
            for (float v : t.data) {
                if (!std::isfinite(v)) {
                    throw FormatError("non-finite value in tensor '" + name + "'");
                }
            }
        }
        out.emplace(name, std::move(t));
    }
    return out;
}

inline void write_container(const std::string & path, const TensorMap & tensors) {
    const std::string bytes = serialize_container(tensors);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open for writing: " + path);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("write failed: " + path);
    }
}

inline TensorMap read_container(const std::string & path, bool require_finite = true) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open container: " + path);
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_container(bytes, require_finite);
}

} // namespace cogsteer
