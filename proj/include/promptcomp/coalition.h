// Copyright 2026 The promptcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTCOMP_COALITION_H_
#define PROMPTCOMP_COALITION_H_

#include <bit>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace promptcomp {

// Largest player count for which games are enumerated exactly.
inline constexpr int kMaxPlayers = 24;

// A set of technique indices stored as a bitmask; bit i is technique i.
class Coalition {
 public:
  constexpr Coalition() = default;
  constexpr explicit Coalition(uint32_t bits) : bits_(bits) {}

  static constexpr Coalition Empty() { return Coalition(0); }
  static constexpr Coalition Full(int n) {
    return Coalition(n >= 32 ? ~0u : ((1u << n) - 1u));
  }

  constexpr uint32_t bits() const { return bits_; }
  constexpr bool Contains(int i) const { return (bits_ >> i) & 1u; }
  constexpr Coalition With(int i) const { return Coalition(bits_ | (1u << i)); }
  constexpr Coalition Without(int i) const {
    return Coalition(bits_ & ~(1u << i));
  }
  constexpr int Size() const { return std::popcount(bits_); }
  constexpr bool IsSubsetOf(Coalition other) const {
    return (bits_ & ~other.bits_) == 0;
  }

  // Member indices in ascending order.
  std::vector<int> Members() const {
    std::vector<int> out;
    for (uint32_t rest = bits_; rest != 0; rest &= rest - 1) {
      out.push_back(std::countr_zero(rest));
    }
    return out;
  }

  friend constexpr auto operator<=>(Coalition, Coalition) = default;

 private:
  uint32_t bits_ = 0;
};

}  // namespace promptcomp

#endif  // PROMPTCOMP_COALITION_H_
