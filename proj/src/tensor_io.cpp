#include "advlab/tensor.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace advlab {

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw TensorError("tensor read: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

static_assert(sizeof(float) == 4, "serialization assumes 32-bit float");

}  // namespace

void write_tensor_f32(std::ostream& os, const Shape& shape,
                      const std::vector<float>& data) {
  if (numel(shape) != static_cast<std::int64_t>(data.size()))
    throw TensorError("tensor write: shape " + shape_str(shape) + " vs " +
                      std::to_string(data.size()) + " values");
  put_u64(os, shape.size());
  for (auto e : shape) put_u64(os, static_cast<std::uint64_t>(e));
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * 4));
  } else {
    for (float f : data) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      unsigned char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
      os.write(reinterpret_cast<const char*>(b), 4);
    }
  }
  if (!os) throw TensorError("tensor write: stream failure");
}

std::pair<Shape, std::vector<float>> read_tensor_f32(std::istream& is) {
  std::uint64_t rank = get_u64(is);
  if (rank > 16) throw TensorError("tensor read: implausible rank " +
                                   std::to_string(rank));
  Shape shape(rank);
  std::int64_t total = 1;
  for (auto& e : shape) {
    e = static_cast<std::int64_t>(get_u64(is));
    if (e < 0 || (total != 0 && e > (std::int64_t(1) << 40) / std::max<std::int64_t>(total, 1)))
      throw TensorError("tensor read: implausible extent in " + shape_str(shape));
    total *= e;
  }
  std::vector<float> data(static_cast<std::size_t>(total));
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * 4));
    if (!is) throw TensorError("tensor read: truncated payload, wanted " +
                               std::to_string(total) + " floats");
  } else {
    for (auto& f : data) {
      unsigned char b[4];
      is.read(reinterpret_cast<char*>(b), 4);
      if (!is) throw TensorError("tensor read: truncated payload");
      std::uint32_t u = 0;
      for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(b[i]) << (8 * i);
      std::memcpy(&f, &u, 4);
    }
  }
  return {std::move(shape), std::move(data)};
}

}  // namespace advlab
