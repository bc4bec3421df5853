// Copyright 2026 The Supermod Authors.
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

#ifndef SUPERMOD_BIDDERSET_HPP
#define SUPERMOD_BIDDERSET_HPP

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

namespace supermod {

/// Subset of bidder positions 0..63 (positions index MarketInstance::bidders).
struct BidderSet {
  std::uint64_t bits = 0;

  static BidderSet empty() { return BidderSet{0}; }
  static BidderSet full(int n) {
    return BidderSet{n >= 64 ? ~0ULL : ((1ULL << n) - 1)};
  }
  static BidderSet single(int pos) { return BidderSet{1ULL << pos}; }

  bool contains(int pos) const { return (bits >> pos) & 1ULL; }
  int size() const { return std::popcount(bits); }
  bool is_empty() const { return bits == 0; }

  BidderSet with(int pos) const { return BidderSet{bits | (1ULL << pos)}; }
  BidderSet without(int pos) const { return BidderSet{bits & ~(1ULL << pos)}; }
  BidderSet minus(BidderSet k) const { return BidderSet{bits & ~k.bits}; }
  BidderSet unite(BidderSet o) const { return BidderSet{bits | o.bits}; }
  BidderSet intersect(BidderSet o) const { return BidderSet{bits & o.bits}; }
  bool subset_of(BidderSet o) const { return (bits & ~o.bits) == 0; }

  std::vector<int> positions() const {
    std::vector<int> out;
    for (std::uint64_t m = bits; m; m &= m - 1)
      out.push_back(std::countr_zero(m));
    return out;
  }

  friend bool operator==(BidderSet a, BidderSet b) { return a.bits == b.bits; }
  friend bool operator!=(BidderSet a, BidderSet b) { return a.bits != b.bits; }
  friend bool operator<(BidderSet a, BidderSet b) { return a.bits < b.bits; }
};

/// Calls fn(subset) for every subset of `set` (including empty and set itself).
template <typename Fn>
void for_each_subset(BidderSet set, Fn&& fn) {
  std::uint64_t sub = set.bits;
  while (true) {
    fn(BidderSet{sub});
    if (sub == 0) break;
    sub = (sub - 1) & set.bits;
  }
}

inline std::string to_string(BidderSet s) {
  std::string out = "{";
  bool first = true;
  for (int p : s.positions()) {
    if (!first) out += ",";
    out += std::to_string(p);
    first = false;
  }
  return out + "}";
}

}  // namespace supermod

#endif  // SUPERMOD_BIDDERSET_HPP
