#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "fpgan/tensor.hpp"

namespace fpgan {

/// Deterministic random stream with a fully specified bit-level algorithm
/// (splitmix64), so results are identical across standard libraries and runs.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    /// Independent stream keyed by (seed, tag, counter). Used to make every
    /// random decision in training a pure function of the config seed.
    static Rng derive(uint64_t seed, std::string_view tag, uint64_t counter = 0) {
        uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
        auto mix_byte = [&h](uint8_t b) {
            h ^= b;
            h *= 0x100000001b3ull;
        };
        for (char c : tag) mix_byte(static_cast<uint8_t>(c));
        for (int i = 0; i < 8; ++i) mix_byte(static_cast<uint8_t>(seed >> (8 * i)));
        for (int i = 0; i < 8; ++i) mix_byte(static_cast<uint8_t>(counter >> (8 * i)));
        return Rng(h);
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    real uniform() { return static_cast<real>(next_u64() >> 11) * 0x1.0p-53; }

    real uniform(real lo, real hi) { return lo + (hi - lo) * uniform(); }

    /// Inclusive on both ends.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    /// Standard normal via Box-Muller (no libstdc++ distribution dependence).
    real normal() {
        real u1 = uniform();
        real u2 = uniform();
        while (u1 <= real(0)) u1 = uniform();
        return std::sqrt(real(-2) * std::log(u1)) * std::cos(real(2) * real(M_PI) * u2);
    }

    real normal(real mean, real stddev) { return mean + stddev * normal(); }

    std::vector<int> permutation(int n) {
        std::vector<int> p(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i) {
            int j = uniform_int(0, i);
            std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
        }
        return p;
    }

    void fill_normal(Tensor& t, real mean, real stddev) {
        for (long i = 0; i < t.numel(); ++i) t[i] = normal(mean, stddev);
    }

    void fill_uniform(Tensor& t, real lo, real hi) {
        for (long i = 0; i < t.numel(); ++i) t[i] = uniform(lo, hi);
    }

private:
    uint64_t state_;
};

}  // namespace fpgan
