#include "cgkoop/numcore/cgt_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "cgkoop/errors.hpp"

namespace cgkoop::num {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'G', 'T', '1'};

template <class U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> buf;
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <class U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> buf;
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) throw std::runtime_error("CGT1: truncated header");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_cgt(std::ostream& os, const Tensor& t) {
  os.write(kMagic.data(), kMagic.size());
  // Rank-0 scalars are written as rank 1 with a single element.
  if (t.rank() == 0) {
    put_le<std::uint32_t>(os, 1);
    put_le<std::uint64_t>(os, t.size());
  } else {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims()) put_le<std::uint64_t>(os, d);
  }
  for (double v : t.data()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw std::runtime_error("CGT1: write failed");
}

Tensor read_cgt(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("CGT1: bad magic");
  const auto rank = get_le<std::uint32_t>(is);
  if (rank == 0 || rank > Tensor::kMaxRank) throw std::runtime_error("CGT1: unsupported rank " + std::to_string(rank));
  std::vector<std::size_t> dims(rank);
  std::size_t count = 1;
  for (auto& d : dims) {
    d = static_cast<std::size_t>(get_le<std::uint64_t>(is));
    count *= d;
  }
  std::vector<double> data(count);
  std::vector<unsigned char> raw(count * 8);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw std::runtime_error("CGT1: truncated payload");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[i * 8 + b]) << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
  return Tensor(dims, std::move(data));
}

void write_cgt(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_cgt(os, t);
}

Tensor read_cgt(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_cgt(is);
}

}  // namespace cgkoop::num
