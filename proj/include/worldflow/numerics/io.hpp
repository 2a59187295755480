// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/ndarray.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace worldflow {

/// Array file layout: "DWND", u32 version, u32 rank, u64 extents[rank],
/// u8 dtype (0 = f32, 1 = f64), then the row-major payload. Everything is
/// little-endian.
inline constexpr std::array<char, 4> kArrayMagic{'D', 'W', 'N', 'D'};
inline constexpr std::uint32_t kArrayVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename S>
constexpr DType dtype_of() {
    static_assert(std::is_same_v<S, float> || std::is_same_v<S, double>, "only f32/f64 arrays are serializable");
    return std::is_same_v<S, float> ? DType::f32 : DType::f64;
}

class FormatError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

namespace io {

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(bytes.data(), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    std::array<char, sizeof(T)> bytes;
    if (!is.read(bytes.data(), sizeof(T))) throw FormatError("unexpected end of stream");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline void write_magic(std::ostream& os, const std::array<char, 4>& magic) { os.write(magic.data(), 4); }

inline void expect_magic(std::istream& is, const std::array<char, 4>& magic) {
    std::array<char, 4> got{};
    if (!is.read(got.data(), 4) || got != magic) {
        throw FormatError("bad magic, expected " + std::string(magic.begin(), magic.end()));
    }
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_le<std::uint32_t>(os, std::uint32_t(s.size()));
    os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_string(std::istream& is) {
    const auto n = read_le<std::uint32_t>(is);
    if (n > (1u << 20)) throw FormatError("string length out of range");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw FormatError("unexpected end of stream");
    return s;
}

}  // namespace io

template <typename S>
void write_array(std::ostream& os, const NdArray<S>& a) {
    io::write_magic(os, kArrayMagic);
    io::write_le<std::uint32_t>(os, kArrayVersion);
    io::write_le<std::uint32_t>(os, std::uint32_t(a.rank()));
    for (std::size_t d : a.shape()) io::write_le<std::uint64_t>(os, d);
    io::write_le<std::uint8_t>(os, std::uint8_t(dtype_of<S>()));
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(a.data()), std::streamsize(a.size() * sizeof(S)));
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) io::write_le<S>(os, a[i]);
    }
}

namespace detail {

template <typename Src, typename S>
NdArray<S> read_payload(std::istream& is, Shape shape) {
    NdArray<Src> raw(std::move(shape));
    if constexpr (std::endian::native == std::endian::little) {
        if (raw.size() && !is.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size() * sizeof(Src)))) {
            throw FormatError("truncated array payload");
        }
    } else {
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = io::read_le<Src>(is);
    }
    if constexpr (std::is_same_v<Src, S>) {
        return raw;
    } else {
        return raw.template cast<S>();
    }
}

}  // namespace detail

/// Reads an array, converting the payload to S when the stored dtype differs.
template <typename S>
NdArray<S> read_array(std::istream& is) {
    io::expect_magic(is, kArrayMagic);
    const auto version = io::read_le<std::uint32_t>(is);
    if (version != kArrayVersion) throw FormatError("unsupported array version " + std::to_string(version));
    const auto rank = io::read_le<std::uint32_t>(is);
    if (rank > 16) throw FormatError("array rank out of range");
    Shape shape(rank);
    for (auto& d : shape) d = std::size_t(io::read_le<std::uint64_t>(is));
    const auto code = io::read_le<std::uint8_t>(is);
    switch (DType(code)) {
        case DType::f32:
            return detail::read_payload<float, S>(is, std::move(shape));
        case DType::f64:
            return detail::read_payload<double, S>(is, std::move(shape));
    }
    throw FormatError("unknown dtype code " + std::to_string(code));
}

template <typename S>
void save_array(const std::filesystem::path& path, const NdArray<S>& a) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_array(os, a);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

template <typename S>
NdArray<S> load_array(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return read_array<S>(is);
}

}  // namespace worldflow
