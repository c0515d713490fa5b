#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>

namespace greenpeel {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (counter, key), so draws never depend on call order.
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter round(Counter c, Key k) {
    constexpr std::uint64_t m0 = 0xD2511F53u;
    constexpr std::uint64_t m1 = 0xCD9E8D57u;
    const std::uint64_t p0 = m0 * c[0];
    const std::uint64_t p1 = m1 * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline Counter generate(Counter c, Key k) {
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            k[0] += w0;
            k[1] += w1;
        }
        c = round(c, k);
    }
    return c;
}

}  // namespace philox

/// splitmix64 finaliser; used to fold structured ids into one stream key.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Stream id from a tuple such as (purpose, level, box).
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6A09E667F3BCC908ull;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

/// Standard normal deviates for sample `index` of stream `stream` under
/// `seed`. Box-Muller over pairs of 53-bit uniforms.
inline void fill_standard_normal(std::uint64_t seed, std::uint64_t stream, std::uint32_t index,
                                 std::span<double> out) {
    const philox::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const std::size_t pairs = (out.size() + 1) / 2;
    for (std::size_t b = 0; b < pairs; ++b) {
        const philox::Counter ctr{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                                  index, static_cast<std::uint32_t>(b)};
        const auto r = philox::generate(ctr, key);
        const std::uint64_t a = (std::uint64_t{r[0]} << 32) | r[1];
        const std::uint64_t c = (std::uint64_t{r[2]} << 32) | r[3];
        const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(c >> 11) * 0x1.0p-53;        // [0, 1)
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[2 * b] = radius * std::cos(angle);
        if (2 * b + 1 < out.size()) out[2 * b + 1] = radius * std::sin(angle);
    }
}

}  // namespace greenpeel
