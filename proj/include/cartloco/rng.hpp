#pragma once

#include <cmath>
#include <cstdint>

namespace cartloco {

// Counter-free SplitMix64 stream. Fully specified integer arithmetic, so sequences are
// bit-identical across platforms for a given seed; that is what every determinism
// guarantee in this library rests on.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller without caching so the stream state is exactly one u64 counter.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    std::uint64_t state() const { return state_; }

  private:
    std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDull;
    z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ull;
    return z ^ (z >> 33);
}
}  // namespace detail

// Documented stream-splitting scheme: a child stream is keyed by hashing the master seed
// with two integer tags (e.g. purpose, index). Children never collide with the parent's
// own draw sequence.
inline Rng derive_rng(std::uint64_t master_seed, std::uint64_t tag_a, std::uint64_t tag_b = 0) {
    std::uint64_t h = detail::mix64(master_seed ^ 0xA0761D6478BD642Full);
    h = detail::mix64(h ^ tag_a ^ 0xE7037ED1A0B428DBull);
    h = detail::mix64(h ^ tag_b ^ 0x8EBC6AF09C88C6E3ull);
    return Rng(h);
}

// Stream purpose tags used across the library so call sites do not collide by accident.
namespace stream {
constexpr std::uint64_t kEnv = 1;         // per-environment physics/reset draws
constexpr std::uint64_t kAction = 2;      // per-environment policy sampling
constexpr std::uint64_t kObsNoise = 3;    // per-environment observation noise
constexpr std::uint64_t kInit = 4;        // network initialization
constexpr std::uint64_t kShuffle = 5;     // minibatch shuffling
constexpr std::uint64_t kAmp = 6;         // discriminator batch sampling
constexpr std::uint64_t kEval = 7;        // evaluation episodes
constexpr std::uint64_t kCommand = 8;     // command sampling
}  // namespace stream

}  // namespace cartloco
