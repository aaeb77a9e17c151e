#include "asgnet/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "asgnet/error.hpp"

namespace asg {
namespace {

static_assert(std::endian::native == std::endian::little, "formats assume a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::size_t& offset) : bytes_(bytes), pos_(offset) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) throw FormatError(std::string("truncated ") + what, pos_);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  void magic(const char (&expected)[4], const char* what) {
    need(4, what);
    if (std::memcmp(bytes_.data() + pos_, expected, 4) != 0) {
      throw FormatError(std::string("bad magic for ") + what, pos_);
    }
    pos_ += 4;
  }
  const std::uint8_t* take(std::size_t n, const char* what) {
    need(n, what);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t& pos_;
};

// Netpbm header token reader: skips whitespace and '#' comments. `start`
// receives the offset of the token's first byte.
std::string header_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos, std::size_t& start) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n' && bytes[pos] != '\r') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  start = pos;
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') tok += static_cast<char>(bytes[pos++]);
  if (tok.empty()) throw FormatError("truncated image header", pos);
  return tok;
}

int header_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos, const char* what,
               std::size_t* at = nullptr) {
  std::size_t start = 0;
  const std::string tok = header_token(bytes, pos, start);
  if (at) *at = start;
  int v = 0;
  for (char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c)) || v > 1'000'000) {
      throw FormatError(std::string("invalid ") + what + " '" + tok + "'", start);
    }
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.empty()) throw ValidationError("cannot encode an empty tensor");
  std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  const std::size_t start = out.size();
  out.resize(start + 4 * t.size());
  std::memcpy(out.data() + start, t.data().data(), 4 * t.size());
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, std::size_t& offset) {
  ByteReader r(bytes, offset);
  r.magic(kTensorMagic, "tensor record");
  const std::size_t rank_at = r.pos();
  const std::uint32_t rank = r.u32("tensor rank");
  if (rank < 1 || rank > 4) throw FormatError("tensor rank " + std::to_string(rank) + " not in 1..4", rank_at);
  std::vector<int> dims;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::size_t at = r.pos();
    const std::uint32_t d = r.u32("tensor dims");
    if (d < 1 || d > (1u << 28)) throw FormatError("invalid tensor extent " + std::to_string(d), at);
    dims.push_back(static_cast<int>(d));
    count *= d;
  }
  std::vector<float> data(count);
  std::memcpy(data.data(), r.take(4 * count, "tensor payload"), 4 * count);
  return Tensor(std::move(dims), std::move(data));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) { write_file(path, encode_tensor(t)); }

Tensor load_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t offset = 0;
  Tensor t = decode_tensor(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after tensor", offset);
  return t;
}

Tensor decode_image(const std::vector<std::uint8_t>& bytes, bool binarize) {
  std::size_t pos = 0;
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("bad magic: expected P5 or P6", 0);
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const int width = header_int(bytes, pos, "width");
  const int height = header_int(bytes, pos, "height");
  std::size_t maxval_at = 0;
  const int maxval = header_int(bytes, pos, "maxval", &maxval_at);
  if (width < 1 || height < 1) throw FormatError("image extents must be >= 1", maxval_at);
  if (maxval != 255) throw FormatError("maxval must be 255, got " + std::to_string(maxval), maxval_at);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("missing whitespace after header", pos);
  ++pos;
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  const std::size_t need = plane * channels;
  if (bytes.size() - pos < need) {
    throw FormatError("truncated payload: expected " + std::to_string(need) + " bytes, found " +
                          std::to_string(bytes.size() - pos),
                      bytes.size());
  }
  Tensor out({1, channels, height, width});
  auto data = out.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < channels; ++c) {
      const float v = static_cast<float>(bytes[pos + i * channels + c]) / 255.0f;
      data[c * plane + i] = binarize ? (v >= 0.5f ? 1.0f : 0.0f) : v;
    }
  }
  return out;
}

Tensor read_image(const std::filesystem::path& path, bool binarize) {
  try {
    return decode_image(read_file(path), binarize);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::vector<std::uint8_t> encode_image(const Tensor& t) {
  if (t.rank() != 4 || t.n() != 1 || (t.c() != 1 && t.c() != 3)) {
    throw ValidationError("write_image: expected (1, 1|3, H, W), got " + shape_string(t.dims()));
  }
  const std::string header =
      std::string(t.c() == 1 ? "P5" : "P6") + "\n" + std::to_string(t.w()) + " " + std::to_string(t.h()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t plane = t.plane();
  const auto data = t.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < t.c(); ++c) {
      const float v = data[c * plane + i];
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw ValidationError("write_image: value " + std::to_string(v) + " outside [0, 1]");
      }
      out.push_back(static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5)));
    }
  }
  return out;
}

void write_image(const Tensor& t, const std::filesystem::path& path) { write_file(path, encode_image(t)); }

std::vector<std::uint8_t> encode_weights(const AsgNetParams& params) {
  std::vector<std::uint8_t> out(kWeightsMagic, kWeightsMagic + 4);
  std::vector<std::uint8_t> body;
  std::uint32_t count = 0;
  std::set<std::string> seen;
  visit_params(params, [&](const std::string& name, const Tensor& t) {
    if (!seen.insert(name).second) throw ValidationError("duplicate parameter name " + name);
    if (name.size() > 0xFFFF) throw ValidationError("parameter name too long: " + name);
    put_u16(body, static_cast<std::uint16_t>(name.size()));
    body.insert(body.end(), name.begin(), name.end());
    const auto rec = encode_tensor(t);
    body.insert(body.end(), rec.begin(), rec.end());
    ++count;
  });
  put_u32(out, count);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

void save_weights(const AsgNetParams& params, const std::filesystem::path& path) {
  write_file(path, encode_weights(params));
}

void decode_weights(AsgNetParams& params, const std::vector<std::uint8_t>& bytes) {
  std::size_t offset = 0;
  ByteReader r(bytes, offset);
  r.magic(kWeightsMagic, "weights file");
  const std::uint32_t count = r.u32("record count");
  std::map<std::string, Tensor> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.pos();
    const std::uint16_t len = r.u16("name length");
    const std::uint8_t* p = r.take(len, "parameter name");
    std::string name(reinterpret_cast<const char*>(p), len);
    Tensor t = decode_tensor(bytes, offset);
    if (!loaded.emplace(name, std::move(t)).second) throw FormatError("duplicate parameter " + name, at);
  }
  if (offset != bytes.size()) throw FormatError("trailing bytes after weights", offset);

  std::set<std::string> used;
  visit_params(params, [&](const std::string& name, Tensor& t) {
    const auto it = loaded.find(name);
    if (it == loaded.end()) throw ValidationError("missing parameter " + name);
    if (it->second.dims() != t.dims()) {
      throw ShapeError("parameter " + name + " has shape " + shape_string(it->second.dims()) + ", graph expects " +
                       shape_string(t.dims()));
    }
    t = it->second;
    used.insert(name);
  });
  for (const auto& [name, t] : loaded) {
    if (!used.count(name)) throw ValidationError("unknown parameter " + name);
  }
}

void load_weights(AsgNetParams& params, const std::filesystem::path& path) {
  decode_weights(params, read_file(path));
}

}  // namespace asg
