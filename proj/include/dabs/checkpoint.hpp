// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Binary container shared by checkpoints, hidden-stack files and substrate
// files. All integers and floats are little-endian regardless of host.
//
//   "DABS"            4 bytes magic
//   version           u8 (currently 1)
//   kind              u8 (0 checkpoint, 1 hidden stack, 2 substrate)
//   kind header       stack: n, d, L as u64
//                     substrate: n, d, K as u64, then a layer-order flag u8
//   record count      u64
//   records           name_len u32, name bytes, rank u8,
//                     rank x u64 extents, product(extents) x f32 data

#include <cstdint>
#include <string>
#include <vector>

#include "dabs/layers.hpp"
#include "dabs/tensor.hpp"

namespace dabs::io {

inline constexpr std::uint8_t kFormatVersion = 1;

enum class FileKind : std::uint8_t { kCheckpoint = 0, kStack = 1, kSubstrate = 2 };

struct Record {
  std::string name;
  Shape shape;
  std::vector<float> data;
  std::uint64_t offset = 0;  // byte offset of the record in its file
};

struct Container {
  FileKind kind = FileKind::kCheckpoint;
  std::vector<std::uint64_t> header;  // empty, (n, d, L) or (n, d, K)
  std::uint8_t flag = 0;              // substrate layer order
  std::vector<Record> records;
  std::uint64_t records_offset = 0;  // byte offset of the record count
};

std::vector<std::uint8_t> encode_container(const Container& c);
/// Throws FormatError (with byte offset) on bad magic, unknown version or
/// kind, or truncation. Nothing partial is returned.
Container decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

template <typename T>
Record to_record(const std::string& name, const Tensor<T>& t);
template <typename T>
Tensor<T> from_record(const Record& r);

/// Writes every parameter as a record (values narrowed to f32).
template <typename T>
void save_checkpoint(const ParameterSet<T>& params, const std::string& path);

/// Overwrites parameter values in place. Every parameter must be present
/// with a matching shape and no unknown records may appear.
template <typename T>
void load_checkpoint(ParameterSet<T>& params, const std::string& path);

}  // namespace dabs::io
