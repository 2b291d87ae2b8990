#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace netctl {

// Deterministic, platform-independent randomness. Standard-library
// distributions are not bit-stable across implementations, so draws are
// produced here from fixed integer recurrences (splitmix64 seeding a
// xoshiro256++ state; uniform doubles via the 53-bit mantissa trick).

inline std::uint64_t splitmix64_next(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Folds a master seed and a tag sequence into one stream seed. Streams with
// different tag chains are independent; the chain is part of the output
// contract (reruns must be byte-identical).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = master;
    std::uint64_t out = splitmix64_next(s);
    for (std::uint64_t t : tags) {
        s ^= t + 0x9E3779B97F4A7C15ull + (out << 6) + (out >> 2);
        out = splitmix64_next(s);
    }
    return out;
}

class rng {
  public:
    explicit rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64_next(sm);
    }
    rng(std::uint64_t master, std::initializer_list<std::uint64_t> tags)
        : rng(derive_seed(master, tags)) {}

    std::uint64_t u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform on [0, 1)
    double u01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    // uniform on [a, b)
    double uniform(double a, double b) { return a + (b - a) * u01(); }

    // standard normal, Marsaglia polar method (loop is deterministic)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * u01() - 1.0;
            v = 2.0 * u01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // uniform point on the unit sphere S^{n-1}
    Eigen::VectorXd sphere(int n) {
        Eigen::VectorXd v(n);
        double norm2;
        do {
            for (int i = 0; i < n; ++i) v[i] = normal();
            norm2 = v.squaredNorm();
        } while (norm2 == 0.0);
        return v / std::sqrt(norm2);
    }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection-free enough for our n; bias < 2^-64 * n
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(u64()) * n) >> 64);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stream tags reserved by the harness (documented; part of reproducibility).
namespace stream {
constexpr std::uint64_t system = 1;      // adjacency generation
constexpr std::uint64_t drivers = 2;     // driver-set selection
constexpr std::uint64_t direction = 3;   // target directions (master, tag, grid, sample)
constexpr std::uint64_t state = 4;       // initial/final state draws
constexpr std::uint64_t battery = 5;     // benchmark batteries
}  // namespace stream

}  // namespace netctl
