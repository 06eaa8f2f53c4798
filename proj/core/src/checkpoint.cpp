#include "dice/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dice {

namespace {

constexpr char kMagic[8] = {'D', 'I', 'C', 'E', 'C', 'K', 'P', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return s;
}

void put_double(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(os, bits);
}

double get_double(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

const CheckpointBlock& Checkpoint::block(const std::string& name) const {
  for (const CheckpointBlock& b : blocks) {
    if (b.name == name) return b;
  }
  throw std::runtime_error("checkpoint is missing block '" + name + "'");
}

bool Checkpoint::has_block(const std::string& name) const {
  for (const CheckpointBlock& b : blocks) {
    if (b.name == name) return true;
  }
  return false;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kMagic, sizeof(kMagic));
  put_u64(os, 1);  // version
  put_string(os, ckpt.kind);
  put_u64(os, ckpt.blocks.size());
  for (const CheckpointBlock& b : ckpt.blocks) {
    if (b.data.size() != b.rows * b.cols) {
      throw std::logic_error("checkpoint block '" + b.name + "' has bad shape");
    }
    put_string(os, b.name);
    put_u64(os, b.rows);
    put_u64(os, b.cols);
    for (const double d : b.data) put_double(os, d);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const std::uint64_t version = get_u64(is);
  if (version != 1) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + " in " + path);
  }
  Checkpoint ckpt;
  ckpt.kind = get_string(is);
  const std::uint64_t n_blocks = get_u64(is);
  for (std::uint64_t i = 0; i < n_blocks; ++i) {
    CheckpointBlock b;
    b.name = get_string(is);
    b.rows = get_u64(is);
    b.cols = get_u64(is);
    b.data.resize(b.rows * b.cols);
    for (double& d : b.data) d = get_double(is);
    ckpt.blocks.push_back(std::move(b));
  }
  return ckpt;
}

}  // namespace dice
