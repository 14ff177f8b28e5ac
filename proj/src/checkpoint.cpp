#include "ntkd/checkpoint.hpp"

#include "ntkd/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ntkd {

namespace {

constexpr std::array<char, 8> kMagic{'N', 'T', 'K', 'D', 'C', 'K', 'P', 'T'};

template <class U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> buf;
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf.data(), buf.size());
}

template <class U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> buf;
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) throw Error("checkpoint: truncated file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double x) { put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(x)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  ckpt.cfg.validate();
  if (ckpt.params.values.size() != param_count(ckpt.cfg)) throw InvalidArgument("checkpoint: parameter count mismatch");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.cfg.d));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.cfg.L));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.cfg.m));
  put_f64(os, ckpt.cfg.sigma_w);
  put_f64(os, ckpt.cfg.sigma_b);
  put_le<std::uint64_t>(os, ckpt.seed);
  put_le<std::uint64_t>(os, ckpt.epoch);
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(ckpt.params.values.size()));
  for (Eigen::Index i = 0; i < ckpt.params.values.size(); ++i) put_f64(os, ckpt.params.values[i]);
  if (!os) throw Error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw Error("checkpoint: bad magic");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.cfg.d = static_cast<int>(get_le<std::uint32_t>(is));
  c.cfg.L = static_cast<int>(get_le<std::uint32_t>(is));
  c.cfg.m = static_cast<int>(get_le<std::uint32_t>(is));
  c.cfg.sigma_w = get_f64(is);
  c.cfg.sigma_b = get_f64(is);
  c.seed = get_le<std::uint64_t>(is);
  c.epoch = get_le<std::uint64_t>(is);
  const auto p = get_le<std::uint64_t>(is);
  c.cfg.validate();
  if (p != static_cast<std::uint64_t>(param_count(c.cfg))) throw Error("checkpoint: parameter count does not match config");
  c.params.values.resize(static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < c.params.values.size(); ++i) c.params.values[i] = get_f64(is);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace ntkd
