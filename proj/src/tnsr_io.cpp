#include "jssl/tnsr_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "jssl/error.hpp"

namespace jssl {
namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
constexpr std::uint8_t kVersion = 1;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.ndim() > 255) throw ShapeError("TNSR supports at most 255 axes");
  std::vector<std::uint8_t> out;
  out.reserve(6 + 8 * t.ndim() + 8 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(t.ndim()));
  for (auto e : t.shape()) put_u64(out, e);
  for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("not a TNSR stream (bad magic)");
  if (bytes[4] != kVersion)
    throw IoError("unsupported TNSR version " + std::to_string(bytes[4]));
  const std::size_t ndim = bytes[5];
  std::size_t offset = 6;
  if (bytes.size() < offset + 8 * ndim) throw IoError("truncated TNSR header");
  Shape shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i, offset += 8) shape[i] = get_u64(bytes.data() + offset);
  const std::size_t n = numel(shape);
  if (bytes.size() != offset + 8 * n)
    throw IoError("TNSR payload size does not match shape " + to_string(shape));
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i, offset += 8)
    data[i] = std::bit_cast<double>(get_u64(bytes.data() + offset));
  return Tensor::from_external(std::move(shape), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace jssl
