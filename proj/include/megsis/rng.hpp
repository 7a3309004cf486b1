#ifndef MEGSIS_RNG_HPP
#define MEGSIS_RNG_HPP

#include <cstdint>
#include <random>

namespace megsis {

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic substream seed: distinct indices under one master seed give
/// provably distinct outputs (the mixer is a bijection applied to distinct inputs).
inline std::uint64_t derive_worker_seed(std::uint64_t master_seed, std::uint64_t worker_index) {
    const std::uint64_t base = detail::splitmix64(master_seed);
    return detail::splitmix64(base ^ (detail::kGolden * (worker_index + 1)));
}

/// One independent random stream. Each thread or chain owns its own instance.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed = 0) : gen_(detail::splitmix64(seed)) {}

    double uniform() { return unif_(gen_); }
    double normal() { return norm_(gen_); }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        std::uniform_int_distribution<std::size_t> d(0, n - 1);
        return d(gen_);
    }

    std::uint64_t raw() { return gen_(); }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace megsis

#endif
