#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace roughmag {

namespace detail {

// SplitMix64 finalizer; used both as a mixer for stream keys and to expand
// a key into xoshiro state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256++ seeded from a (master, path, step) key. Substreams are
// counter-based: any (path, step) pair maps to its own generator state, so
// draws are independent of how work is scheduled across threads.
class NoiseStream {
  public:
    NoiseStream(std::uint64_t master, std::uint64_t path, std::uint64_t step) {
        std::uint64_t k = master;
        detail::splitmix64(k);
        k ^= 0x8cb92ba72f3d8dd7ULL * (path + 1);
        detail::splitmix64(k);
        k ^= 0xd1342543de82ef95ULL * (step + 1);
        for (auto& s : state_) s = detail::splitmix64(k);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    // Uniform on (0,1); never returns exactly 0 so log() below is safe.
    double uniform01() {
        double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // Standard normal via Box-Muller; pairs are cached within the stream.
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Step index reserved for initial-condition draws (never a transition step).
inline constexpr std::uint64_t kInitStep = ~std::uint64_t{0};

}  // namespace roughmag
