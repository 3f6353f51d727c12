#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace amore {

// Deterministic random stream. Distributions are computed by hand rather than
// through <random> distribution objects, whose output is implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent stream derived from a master seed and a stream name
    // ("init", "shuffle", "split", ...).
    static Rng stream(std::uint64_t master_seed, std::string_view name);

    std::uint64_t next_u64() { return engine_(); }
    // Uniform on [0,1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);
    // Standard normal via Box-Muller.
    double normal();

    std::vector<std::size_t> permutation(std::size_t n);

  private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace amore
