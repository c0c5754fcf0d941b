/*
   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include "spde/rng.hpp"

#include <cmath>
#include <numbers>

namespace spde {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53 random bits mapped to the open interval (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

} // namespace

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

NoiseSource::NoiseSource(std::uint64_t seed, NoiseDomain domain)
    : seed_(seed),
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      domain_(static_cast<std::uint32_t>(domain)) {}

void NoiseSource::normals(std::uint32_t stream, std::uint32_t step, std::span<double> out) const {
    const std::size_t n = out.size();
    for (std::size_t pair = 0; 2 * pair < n; ++pair) {
        const PhiloxCounter r =
            philox4x32({static_cast<std::uint32_t>(pair), step, stream, domain_}, key_);
        const double u1 = to_open_unit(r[0], r[1]);
        const double u2 = to_open_unit(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[2 * pair] = radius * std::cos(angle);
        if (2 * pair + 1 < n) out[2 * pair + 1] = radius * std::sin(angle);
    }
}

double NoiseSource::uniform(std::uint32_t stream, std::uint32_t step, std::uint32_t index) const {
    // High bit of the first word separates uniforms from the normal pairs.
    const PhiloxCounter r =
        philox4x32({index | 0x80000000u, step, stream, domain_}, key_);
    return to_open_unit(r[0], r[1]);
}

} // namespace spde
