#include "ntkd/rng.hpp"

#include <cmath>
#include <numbers>

namespace ntkd::rng {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = splitmix64(root);
  for (std::uint64_t c : path) {
    s = splitmix64(s ^ splitmix64(c + 0x9e3779b97f4a7c15ULL));
  }
  return s;
}

double uniform_from_key(std::uint64_t key) noexcept {
  // 53 high bits -> [0, 1)
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

double normal_from_key(std::uint64_t key) noexcept {
  const double u1 = 1.0 - uniform_from_key(key);  // (0, 1]
  const double u2 = uniform_from_key(key ^ 0x5851f42d4c957f2dULL);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ntkd::rng
