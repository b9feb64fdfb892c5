#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "densecap/nn/param_store.hpp"

namespace densecap::nn {

// On-disk layout:
//
//   densecap-checkpoint 1
//   meta <key> <value...>            (zero or more; value runs to end of line)
//   param <name> f64 <d0>x<d1>... <byte_offset> <count>
//   blob <total_bytes>
//   <raw little-endian IEEE-754 binary64 values, manifest order, row-major>
//
// Params appear in lexicographic order. Offsets are relative to the first
// byte after the "blob" line.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  ParamStore params;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

}  // namespace densecap::nn
