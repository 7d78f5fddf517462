#include "advlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace advlab::ckpt {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
  put_u64(os, v.size());
  for (float f : v) put_u32(os, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
  char b[4];
  if (!is.read(b, 4)) throw TensorError("load_checkpoint: truncated " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& what) {
  char b[8];
  if (!is.read(b, 8)) throw TensorError("load_checkpoint: truncated " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= std::uint64_t(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::string get_string(std::istream& is, const std::string& what) {
  auto n = get_u64(is, what + " length");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
    throw TensorError("load_checkpoint: truncated " + what);
  return s;
}

std::vector<float> get_floats(std::istream& is, const std::string& what) {
  auto n = get_u64(is, what + " length");
  std::vector<float> v(n);
  for (auto& f : v) f = std::bit_cast<float>(get_u32(is, what));
  return v;
}

void put_tensors(std::ostream& os, const std::vector<NamedTensor>& ts) {
  put_u64(os, ts.size());
  for (const auto& t : ts) {
    put_string(os, t.name);
    put_floats(os, t.values);
  }
}

std::vector<NamedTensor> get_tensors(std::istream& is) {
  auto n = get_u64(is, "tensor count");
  std::vector<NamedTensor> ts(n);
  for (auto& t : ts) {
    t.name = get_string(is, "tensor name");
    t.values = get_floats(is, "tensor '" + t.name + "'");
  }
  return ts;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw TensorError("save_checkpoint: cannot write " + path);
  put_u32(os, kMagic);
  put_u32(os, kVersion);
  put_string(os, arch::spec_to_text(c.spec));
  put_u64(os, c.step);
  put_u64(os, c.seed);
  put_tensors(os, c.params);
  put_tensors(os, c.ema);
  if (!os) throw TensorError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorError("load_checkpoint: cannot open " + path);
  if (auto m = get_u32(is, "magic"); m != kMagic)
    throw TensorError("load_checkpoint: bad magic in " + path +
                      " (not a checkpoint file)");
  if (auto v = get_u32(is, "version"); v != kVersion)
    throw TensorError("load_checkpoint: unsupported format version " +
                      std::to_string(v) + " in " + path);
  Checkpoint c;
  c.spec = arch::spec_from_text(get_string(is, "spec document"));
  c.step = get_u64(is, "step counter");
  c.seed = get_u64(is, "seed record");
  c.params = get_tensors(is);
  c.ema = get_tensors(is);
  return c;
}

}  // namespace advlab::ckpt
