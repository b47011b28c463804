// Copyright 2026 The latesearch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "late/half.hpp"

#include <bit>

namespace late {

std::uint16_t float_to_half(float value) noexcept {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const std::uint32_t abs = bits & 0x7fffffffu;

    if (abs >= 0x7f800000u) {
        // inf or nan; keep a quiet-nan payload bit
        const std::uint32_t nan = abs > 0x7f800000u ? 0x0200u : 0u;
        return std::uint16_t(sign | 0x7c00u | nan);
    }
    // 65520 and above round to infinity
    if (abs >= 0x477ff000u) {
        return std::uint16_t(sign | 0x7c00u);
    }
    if (abs < 0x38800000u) {
        // subnormal half (or zero): shift the full significand into place
        if (abs < 0x33000000u) {
            return std::uint16_t(sign); // below half of the smallest subnormal
        }
        const std::uint32_t exp = abs >> 23;
        const std::uint32_t mant = (abs & 0x007fffffu) | 0x00800000u;
        const std::uint32_t shift = 126u - exp; // 14..24
        std::uint32_t half = mant >> shift;
        const std::uint32_t rem = mant & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1u);
        if (rem > halfway || (rem == halfway && (half & 1u))) {
            ++half;
        }
        return std::uint16_t(sign | half);
    }
    // normal range: rebias exponent, round the 13 dropped bits
    std::uint32_t half = ((abs >> 13) - (112u << 10));
    const std::uint32_t rem = abs & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) {
        ++half; // carries into the exponent correctly, up to infinity
    }
    return std::uint16_t(sign | half);
}

float half_to_float(std::uint16_t h) noexcept {
    const std::uint32_t sign = std::uint32_t(h & 0x8000u) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1fu;
    std::uint32_t mant = h & 0x3ffu;

    std::uint32_t bits;
    if (exp == 0x1fu) {
        bits = sign | 0x7f800000u | (mant << 13);
    } else if (exp != 0) {
        bits = sign | ((exp + 112u) << 23) | (mant << 13);
    } else if (mant == 0) {
        bits = sign;
    } else {
        // renormalize a subnormal
        std::uint32_t e = 113;
        while ((mant & 0x400u) == 0) {
            mant <<= 1;
            --e;
        }
        bits = sign | (e << 23) | ((mant & 0x3ffu) << 13);
    }
    return std::bit_cast<float>(bits);
}

} // namespace late
