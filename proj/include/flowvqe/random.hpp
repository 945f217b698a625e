// Copyright 2026 The flowgen-vqe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace flowvqe {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

/// Deterministic substream keyed by a root seed and a path of indices, e.g.
/// (seed, epoch, context, sample). Parallel and serial schedules that key
/// their draws identically see identical numbers.
inline Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(seed);
    for (auto p : path) {
        h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    }
    return Rng{h};
}

/// Standard normal draw via Box-Muller on the raw engine output, so results
/// do not depend on the standard library's distribution implementation.
inline double standard_normal(Rng &rng) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    constexpr double scale = 1.0 / 9007199254740992.0; // 2^-53
    double u1 = 0.0;
    do {
        u1 = static_cast<double>(rng() >> 11U) * scale;
    } while (u1 <= 0.0);
    const double u2 = static_cast<double>(rng() >> 11U) * scale;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Uniform double in [0, 1).
inline double uniform01(Rng &rng) {
    return static_cast<double>(rng() >> 11U) * (1.0 / 9007199254740992.0);
}

/// +1 or -1 with equal probability.
inline double rademacher(Rng &rng) { return (rng() >> 63U) != 0U ? 1.0 : -1.0; }

} // namespace flowvqe
