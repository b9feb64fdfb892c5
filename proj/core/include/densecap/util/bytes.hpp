#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace densecap::util {

// Appends IEEE-754 binary64 values little-endian regardless of host order.
void append_f64_le(std::string& out, std::span<const double> values);
// Decodes `count` values starting at `bytes[offset]`; throws ParseError on
// short input.
std::vector<double> read_f64_le(std::string_view bytes, std::size_t offset,
                                std::size_t count);

std::string base64_encode(std::string_view bytes);
// Throws ParseError on malformed input.
std::string base64_decode(std::string_view text);

std::string read_file(const std::string& path);
// Writes via a temporary sibling and rename.
void write_file(const std::string& path, std::string_view contents);

std::vector<std::string> split_ws(std::string_view line);

}  // namespace densecap::util
