#include "halfspec/parallel.hpp"
#include "halfspec/random.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace halfspec {

unsigned default_thread_count() {
  static const unsigned count = [] {
    if (const char* env = std::getenv("HALFSPEC_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v > 0) return static_cast<unsigned>(v);
      } catch (...) {
      }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
  }();
  return count;
}

std::vector<double> standard_normal(Rng& rng, std::size_t count) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(count);
  for (auto& v : out) v = normal(rng);
  return out;
}

std::vector<std::complex<double>> complex_standard_normal(Rng& rng, std::size_t count) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::vector<std::complex<double>> out(count);
  for (auto& v : out) {
    const double re = normal(rng);
    const double im = normal(rng);
    v = {re, im};
  }
  return out;
}

}  // namespace halfspec
