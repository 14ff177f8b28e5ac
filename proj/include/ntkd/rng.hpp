#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace ntkd::rng {

using Engine = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// FNV-1a, used to turn stream labels such as "teacher" into path components.
std::uint64_t hash_label(std::string_view label) noexcept;

/// Counter-based seed derivation. The child seed depends only on the root and
/// on the path of components, never on how many other streams were drawn, so
/// adding grid points leaves existing streams untouched:
///
///   s_0 = splitmix64(root)
///   s_k = splitmix64(s_{k-1} ^ splitmix64(c_k + 0x9e3779b97f4a7c15))
std::uint64_t derive(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept;

inline Engine engine(std::uint64_t seed) { return Engine(seed); }

/// Uniform in [0, 1) determined by a single 64-bit key.
double uniform_from_key(std::uint64_t key) noexcept;

/// Standard normal determined by a single 64-bit key (Box-Muller on two
/// derived uniforms).
double normal_from_key(std::uint64_t key) noexcept;

}  // namespace ntkd::rng
