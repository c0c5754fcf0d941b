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

#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace spde {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32-10 block function (Salmon et al., SC'11).
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

/// Noise domains keep independent uses of one seed apart.
enum class NoiseDomain : std::uint32_t {
    path = 0,
    smoothing_nodes = 1,
    samples = 2,
};

/// Counter-based Gaussian source. Every normal is a pure function of
/// (seed, domain, stream, step, mode), so any step of any trajectory can be
/// regenerated in isolation and trajectories can run in any order.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed, NoiseDomain domain = NoiseDomain::path);

    /// Fills `out` with independent N(0,1) draws for modes 0..out.size()-1.
    void normals(std::uint32_t stream, std::uint32_t step, std::span<double> out) const;

    /// Uniform on the open interval (0, 1); `index` selects the draw.
    double uniform(std::uint32_t stream, std::uint32_t step, std::uint32_t index) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    PhiloxKey key_;
    std::uint32_t domain_;
};

} // namespace spde
