#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <vector>

#include "quantize.hpp"
#include "specklediff/errors.hpp"
#include "specklediff/io.hpp"

// Baseline TIFF subset: grayscale, one sample per pixel, 8 or 16 bits,
// uncompressed strips. Enough for image stacks exchanged with registration
// tools and viewers.

namespace specklediff {

namespace {

class Writer {
 public:
  void u16(std::uint16_t v) {
    bytes.push_back(static_cast<char>(v & 0xFF));
    bytes.push_back(static_cast<char>(v >> 8));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v & 0xFFFF));
    u16(static_cast<std::uint16_t>(v >> 16));
  }
  void entry(std::uint16_t tag, std::uint16_t type, std::uint32_t value) {
    u16(tag);
    u16(type);
    u32(1);
    if (type == 3) {
      u16(static_cast<std::uint16_t>(value));
      u16(0);
    } else {
      u32(value);
    }
  }
  std::uint32_t pos() const { return static_cast<std::uint32_t>(bytes.size()); }
  void patch32(std::uint32_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }

  std::vector<char> bytes;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> data, std::string path) : d_(std::move(data)), path_(std::move(path)) {
    if (d_.size() < 8) fail("file too short");
    if (d_[0] == 'I' && d_[1] == 'I')
      little_ = true;
    else if (d_[0] == 'M' && d_[1] == 'M')
      little_ = false;
    else
      fail("not a TIFF file");
    if (u16(2) != 42) fail("bad TIFF magic");
  }

  std::uint16_t u16(std::size_t at) const {
    check(at, 2);
    return little_ ? static_cast<std::uint16_t>(d_[at] | (d_[at + 1] << 8))
                   : static_cast<std::uint16_t>((d_[at] << 8) | d_[at + 1]);
  }
  std::uint32_t u32(std::size_t at) const {
    const std::uint32_t a = u16(at), b = u16(at + 2);
    return little_ ? (a | (b << 16)) : ((a << 16) | b);
  }
  // Values of a SHORT/LONG field, following the offset when they do not fit inline.
  std::vector<std::uint32_t> values(std::size_t entry) const {
    const std::uint16_t type = u16(entry + 2);
    const std::uint32_t count = u32(entry + 4);
    const std::size_t size = type == 3 ? 2 : type == 4 ? 4 : 0;
    if (size == 0) fail("unsupported TIFF field type " + std::to_string(type));
    std::size_t at = entry + 8;
    if (size * count > 4) at = u32(entry + 8);
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < count; ++i) out.push_back(size == 2 ? u16(at + 2 * i) : u32(at + 4 * i));
    return out;
  }
  unsigned char byte(std::size_t at) const {
    check(at, 1);
    return d_[at];
  }
  bool little() const { return little_; }
  [[noreturn]] void fail(const std::string& why) const { throw IoError(path_ + ": " + why); }

 private:
  void check(std::size_t at, std::size_t n) const {
    if (at + n > d_.size()) fail("offset beyond end of file");
  }

  std::vector<unsigned char> d_;
  std::string path_;
  bool little_ = true;
};

}  // namespace

void save_tiff16(const std::vector<Image>& pages, const std::string& path, float lo, float hi) {
  if (pages.empty()) throw ContractError("save_tiff16: nothing to write");
  Writer w;
  w.bytes.insert(w.bytes.end(), {'I', 'I'});
  w.u16(42);
  std::uint32_t next_ptr = w.pos();
  w.u32(0);
  for (const auto& img : pages) {
    const std::uint32_t strip = w.pos();
    for (float v : img.pixels()) w.u16(quantize16(v, lo, hi));
    const std::uint32_t ifd = w.pos();
    w.patch32(next_ptr, ifd);
    w.u16(9);
    w.entry(256, 4, static_cast<std::uint32_t>(img.width()));
    w.entry(257, 4, static_cast<std::uint32_t>(img.height()));
    w.entry(258, 3, 16);
    w.entry(259, 3, 1);
    w.entry(262, 3, 1);
    w.entry(273, 4, strip);
    w.entry(277, 3, 1);
    w.entry(278, 4, static_cast<std::uint32_t>(img.height()));
    w.entry(279, 4, static_cast<std::uint32_t>(img.size() * 2));
    next_ptr = w.pos();
    w.u32(0);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::vector<Image> load_tiff(const std::string& path, float lo, float hi) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Reader r(std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}), path);

  std::vector<Image> pages;
  std::uint32_t ifd = r.u32(4);
  while (ifd != 0) {
    if (pages.size() > 100000) r.fail("IFD chain does not terminate");
    const std::uint16_t n = r.u16(ifd);
    std::map<std::uint16_t, std::vector<std::uint32_t>> tags;
    for (std::uint16_t i = 0; i < n; ++i) {
      const std::size_t e = ifd + 2 + 12u * i;
      const std::uint16_t tag = r.u16(e);
      if (tag == 256 || tag == 257 || tag == 258 || tag == 259 || tag == 273 || tag == 277 || tag == 279)
        tags[tag] = r.values(e);
    }
    auto get = [&](std::uint16_t tag, std::uint32_t fallback) {
      auto it = tags.find(tag);
      return it == tags.end() || it->second.empty() ? fallback : it->second.front();
    };
    const std::uint32_t width = get(256, 0), height = get(257, 0), bits = get(258, 1);
    if (width == 0 || height == 0) r.fail("page without dimensions");
    if (get(259, 1) != 1) r.fail("compressed TIFF is not supported");
    if (get(277, 1) != 1) r.fail("only single-sample grayscale TIFF is supported");
    if (bits != 8 && bits != 16) r.fail("only 8- and 16-bit TIFF is supported");
    const auto& offsets = tags[273];
    const auto& counts = tags[279];
    if (offsets.empty() || offsets.size() != counts.size()) r.fail("missing strip table");

    Image img(static_cast<int>(height), static_cast<int>(width));
    std::size_t px = 0;
    const std::size_t bpp = bits / 8;
    for (std::size_t s = 0; s < offsets.size() && px < img.size(); ++s) {
      for (std::uint32_t b = 0; b + bpp <= counts[s] && px < img.size(); b += static_cast<std::uint32_t>(bpp)) {
        std::uint16_t q = bpp == 2 ? r.u16(offsets[s] + b) : static_cast<std::uint16_t>(r.byte(offsets[s] + b) * 257);
        img[px++] = dequantize16(q, lo, hi);
      }
    }
    if (px != img.size()) r.fail("strip data shorter than the page");
    pages.push_back(std::move(img));
    ifd = r.u32(ifd + 2 + 12u * n);
  }
  if (pages.empty()) r.fail("no pages");
  return pages;
}

}  // namespace specklediff
