#include "fusereader/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fusereader {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'S', 'R'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(std::istream& in) {
  static_assert(std::is_unsigned_v<T>);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    int c = in.get();
    if (c == EOF) throw DataError("tensor stream truncated");
    value |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return value;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kMagic, 4);
  put_le<std::uint16_t>(out, kTensorFormatVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.rank()));
  for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
  for (double v : t.data()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    put_le<std::uint64_t>(out, bits);
  }
  if (!out) throw DataError("tensor write failed");
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a FTSR tensor stream");
  std::uint16_t version = get_le<std::uint16_t>(in);
  if (version != kTensorFormatVersion) {
    throw DataError("unsupported tensor format version " + std::to_string(version));
  }
  std::uint16_t rank = get_le<std::uint16_t>(in);
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return Tensor::from(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_tensor(in);
}

std::vector<std::uint8_t> tensor_bytes(const Tensor& t) {
  std::ostringstream out(std::ios::binary);
  write_tensor(out, t);
  std::string s = out.str();
  return {s.begin(), s.end()};
}

}  // namespace fusereader
