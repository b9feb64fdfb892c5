#include "densecap/nn/checkpoint.hpp"

#include <charconv>
#include <sstream>

#include "densecap/error.hpp"
#include "densecap/util/bytes.hpp"

namespace densecap::nn {
namespace {

constexpr std::string_view kMagic = "densecap-checkpoint 1";

std::size_t parse_size(const std::string& s, const std::string& what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("checkpoint: bad " + what + " '" + s + "'");
  }
  return v;
}

Shape parse_shape(const std::string& s) {
  Shape shape;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto x = s.find('x', start);
    const auto end = x == std::string::npos ? s.size() : x;
    shape.push_back(parse_size(s.substr(start, end - start), "shape"));
    if (x == std::string::npos) break;
    start = x + 1;
  }
  return shape;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string header(kMagic);
  header += '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractViolation("checkpoint meta key/value not representable: " + k);
    }
    header += "meta " + k + " " + v + "\n";
  }
  std::string blob;
  for (const auto& [name, p] : ckpt.params) {
    header += "param " + name + " f64 " + shape_string(p.value.shape()) + " " +
              std::to_string(blob.size()) + " " + std::to_string(p.value.size()) + "\n";
    util::append_f64_le(blob, p.value.data());
  }
  header += "blob " + std::to_string(blob.size()) + "\n";
  return header + blob;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Checkpoint ckpt;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ParseError("checkpoint: truncated header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw ParseError("checkpoint: bad magic or unsupported version");

  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
    std::size_t count;
  };
  std::vector<Entry> entries;
  std::size_t blob_size = 0;
  for (;;) {
    const std::string line = next_line();
    if (line.rfind("meta ", 0) == 0) {
      const auto sp = line.find(' ', 5);
      if (sp == std::string::npos) throw ParseError("checkpoint: malformed meta line");
      ckpt.meta[line.substr(5, sp - 5)] = line.substr(sp + 1);
    } else if (line.rfind("param ", 0) == 0) {
      const auto f = util::split_ws(line);
      if (f.size() != 6 || f[2] != "f64") throw ParseError("checkpoint: malformed param line: " + line);
      Entry e{f[1], parse_shape(f[3]), parse_size(f[4], "offset"), parse_size(f[5], "count")};
      if (shape_size(e.shape) != e.count) {
        throw ParseError("checkpoint: count/shape mismatch for " + e.name);
      }
      entries.push_back(std::move(e));
    } else if (line.rfind("blob ", 0) == 0) {
      blob_size = parse_size(line.substr(5), "blob size");
      break;
    } else {
      throw ParseError("checkpoint: unexpected header line: " + line);
    }
  }
  const std::string_view blob = std::string_view(bytes).substr(pos);
  if (blob.size() != blob_size) {
    throw ParseError("checkpoint: blob is " + std::to_string(blob.size()) +
                     " bytes, manifest declares " + std::to_string(blob_size));
  }
  for (auto& e : entries) {
    auto values = util::read_f64_le(blob, e.offset, e.count);
    ckpt.params.add(e.name, Tensor(e.shape, std::move(values)));
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  util::write_file(path.string(), serialize_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(util::read_file(path.string()));
}

}  // namespace densecap::nn
