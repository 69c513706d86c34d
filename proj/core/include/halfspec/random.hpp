#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace halfspec {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the stream owned by `index` (a frequency, a realization, ...).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return master ^ mix64(index);
}

using Rng = std::mt19937_64;

/// iid N(0, 1) draws.
std::vector<double> standard_normal(Rng& rng, std::size_t count);

/// iid CN(0, 1) draws: real and imaginary parts independent with variance 1/2.
std::vector<std::complex<double>> complex_standard_normal(Rng& rng, std::size_t count);

}  // namespace halfspec
