#pragma once

// Self-describing binary container for named float arrays.
//
// Layout: 8-byte magic, u32 format version, u64 header length, JSON header,
// u64 value count, raw little-endian doubles, u64 FNV-1a checksum of every
// preceding byte. The header names the payload kind, carries free-form
// metadata and indexes each array by name, shape and offset.

#include <string>
#include <vector>

#include <json.hpp>

#include "aqc/numcore/tensor.hpp"

namespace aqc::io {

using num::Tensor;

inline constexpr std::uint32_t kContainerVersion = 1;

struct NamedArray {
    std::string name;
    Tensor value;
};

struct Container {
    std::string kind;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<NamedArray> arrays;

    /// FormatError if absent.
    const Tensor& array(const std::string& name) const;
    bool has(const std::string& name) const;
};

/// Writes through a temporary file and renames it into place. IoError on
/// failure.
void write_container(const std::string& path, const Container& c);

/// Reads and verifies a container. IoError if unreadable; FormatError on bad
/// magic, version, checksum, header, or a kind other than `expected_kind`.
Container read_container(const std::string& path, const std::string& expected_kind);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const unsigned char* data, std::size_t size);

}  // namespace aqc::io
