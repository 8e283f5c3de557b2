#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "bdsde/errors.hpp"

namespace bdsde {

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream_id, index), so parallel consumers never share state and a
// run is reproducible bit-for-bit regardless of scheduling.
//
// The generator is Philox-2x64 with 10 rounds: the counter block is
// (stream_id, index), the key is the seed.

namespace detail {

inline constexpr std::uint64_t kPhiloxMul = 0xD2B74407B1CE6E93ULL;
inline constexpr std::uint64_t kPhiloxWeyl = 0x9E3779B97F4A7C15ULL;

inline std::pair<std::uint64_t, std::uint64_t>
philox2x64(std::uint64_t key, std::uint64_t c0, std::uint64_t c1) {
    for (int round = 0; round < 10; ++round) {
        const unsigned __int128 prod =
            static_cast<unsigned __int128>(kPhiloxMul) * c0;
        const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
        const std::uint64_t lo = static_cast<std::uint64_t>(prod);
        c0 = hi ^ key ^ c1;
        c1 = lo;
        key += kPhiloxWeyl;
    }
    return {c0, c1};
}

/// Map 64 random bits to the open interval (0, 1); never returns 0 or 1,
/// which keeps the normal inverse CDF finite.
inline double to_unit_open(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace detail

/// Standard normal quantile function (Wichura's AS241 PPND16 rational
/// approximations; absolute error below 1e-15 on (0,1)).
inline double normal_quantile(double p) {
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return (q < 0.0) ? -value : value;
}

/// Uniform draw in (0, 1) addressed by (seed, stream, index).
inline double uniform_at(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t index) {
    return detail::to_unit_open(detail::philox2x64(seed, stream, index).first);
}

/// Standard normal draw addressed by (seed, stream, index).
inline double normal_at(std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t index) {
    return normal_quantile(uniform_at(seed, stream, index));
}

/// n independent Normal(0, dt) increments from the given stream.
inline std::vector<double> brownian_increments(int n, double dt,
                                               std::uint64_t seed,
                                               std::uint64_t stream_id) {
    if (n < 1) throw ConfigError("brownian_increments: n must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("brownian_increments: dt must be > 0");
    const double sd = std::sqrt(dt);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = sd * normal_at(seed, stream_id, static_cast<std::uint64_t>(i));
    return out;
}

// Stream-id layout shared across the library. Path simulation owns streams
// 0..2; Monte Carlo particles use one stream each starting at kStreamParticle0.
inline constexpr std::uint64_t kStreamW = 0;
inline constexpr std::uint64_t kStreamB = 1;
inline constexpr std::uint64_t kStreamInit = 2;
inline constexpr std::uint64_t kStreamParticle0 = 3;

} // namespace bdsde
