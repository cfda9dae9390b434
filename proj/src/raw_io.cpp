#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "specklediff/errors.hpp"
#include "specklediff/io.hpp"

namespace specklediff {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
  return v;
}

}  // namespace

void save_raw(const std::vector<Image>& slices, const std::string& path) {
  if (slices.empty()) throw ContractError("save_raw: nothing to write");
  for (const auto& s : slices) require_same_shape(slices.front(), s, "save_raw");
  const nlohmann::json header = {{"format", "specklediff-raw"},
                                 {"version", 1},
                                 {"dtype", "float32"},
                                 {"endianness", "little"},
                                 {"shape", {slices.size(), slices.front().height(), slices.front().width()}}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << header.dump() << '\n';
  std::vector<std::uint32_t> buf;
  for (const auto& s : slices) {
    buf.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) buf[i] = to_le(std::bit_cast<std::uint32_t>(s[i]));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<Image> load_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing raw header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": malformed raw header: " + e.what());
  }
  if (header.value("dtype", "") != "float32" || header.value("endianness", "") != "little")
    throw IoError(path + ": only little-endian float32 raw containers are supported");
  const auto shape = header.at("shape").get<std::vector<long long>>();
  if (shape.size() != 3 || shape[0] < 1 || shape[1] < 1 || shape[2] < 1)
    throw IoError(path + ": raw shape must be [slices, height, width]");
  const auto n = static_cast<std::size_t>(shape[1] * shape[2]);
  std::vector<Image> out;
  std::vector<std::uint32_t> buf(n);
  for (long long k = 0; k < shape[0]; ++k) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
    if (!in) throw IoError(path + ": truncated payload at slice " + std::to_string(k));
    std::vector<float> px(n);
    for (std::size_t i = 0; i < n; ++i) px[i] = std::bit_cast<float>(to_le(buf[i]));
    out.emplace_back(static_cast<int>(shape[1]), static_cast<int>(shape[2]), std::move(px));
  }
  return out;
}

}  // namespace specklediff
