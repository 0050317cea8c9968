#ifndef HVF_RNG_HPP
#define HVF_RNG_HPP

#include <cmath>
#include <cstdint>

namespace hvf {

// Counter-based generator: the value drawn for (seed, counter, dim) never
// depends on how many draws happened before, so sampling loops can be
// reordered or parallelised without changing any output.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t counter, std::uint64_t dim = 0) const {
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (counter + 1) +
                      0xbf58476d1ce4e5b9ULL * (dim + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double uniform(std::uint64_t counter, std::uint64_t dim = 0) const {
    return std::ldexp(static_cast<double>(bits(counter, dim) >> 11), -53);
  }

  // Uniform in [a,b).
  double uniform(std::uint64_t counter, std::uint64_t dim, double a, double b) const {
    return a + (b - a) * uniform(counter, dim);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace hvf

#endif
