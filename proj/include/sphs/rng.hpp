#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sphs {

// Counter-based random stream (Philox4x32-10). Every draw is a pure function
// of (seed, path, step, stream, index), so ensembles are bit-reproducible for
// a fixed seed no matter how paths are scheduled across workers.
//
// Streams partition the per-(path,step) randomness: channel increments use
// stream = channel index, the cross-mode convolution sampler uses
// kConvolutionStream, ensemble setup draws use kSetupStream.
namespace rng {

inline constexpr uint32_t kConvolutionStream = 0x40000000u;
inline constexpr uint32_t kSetupStream = 0x50000000u;

namespace detail {

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    const uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}

inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
    constexpr uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, ctr[0], hi0, lo0);
        mulhilo(kM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Uniform in (0,1], using the top 53 bits of a 64-bit word.
inline double to_unit(uint64_t x) {
    return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace detail

// Standard normal pair for block index b of the (seed, path, step, stream)
// stream, via one Philox call and the Box-Muller transform.
inline void normal_pair(uint64_t seed, uint64_t path, uint32_t step,
                        uint32_t stream, uint32_t block, double& z0, double& z1) {
    const uint64_t pk = detail::splitmix64(path);
    const std::array<uint32_t, 2> key = {
        static_cast<uint32_t>(seed) ^ static_cast<uint32_t>(pk),
        static_cast<uint32_t>(seed >> 32) ^ static_cast<uint32_t>(pk >> 32)};
    const std::array<uint32_t, 4> ctr = {step, stream, block, 0x53504853u};
    const auto r = detail::philox4x32(ctr, key);
    const uint64_t w0 = (static_cast<uint64_t>(r[0]) << 32) | r[1];
    const uint64_t w1 = (static_cast<uint64_t>(r[2]) << 32) | r[3];
    const double u1 = detail::to_unit(w0);
    const double u2 = detail::to_unit(w1);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    z0 = rad * std::cos(ang);
    z1 = rad * std::sin(ang);
}

inline double normal(uint64_t seed, uint64_t path, uint32_t step,
                     uint32_t stream, uint32_t index) {
    double z0, z1;
    normal_pair(seed, path, step, stream, index >> 1, z0, z1);
    return (index & 1u) ? z1 : z0;
}

// Fills out[0..count) with consecutive draws of the stream (one Philox call
// per two normals).
inline void fill_normals(uint64_t seed, uint64_t path, uint32_t step,
                         uint32_t stream, int count, double* out) {
    int i = 0;
    for (uint32_t block = 0; i < count; ++block) {
        double z0, z1;
        normal_pair(seed, path, step, stream, block, z0, z1);
        out[i++] = z0;
        if (i < count) out[i++] = z1;
    }
}

}  // namespace rng
}  // namespace sphs
