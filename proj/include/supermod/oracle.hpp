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

#ifndef SUPERMOD_ORACLE_HPP
#define SUPERMOD_ORACLE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <utility>

#include "supermod/bidderset.hpp"

namespace supermod {

/// Memoized view of the market objective S -> J(B_S). Values are finite
/// costs or +infinity for infeasible subsets. Evaluation of distinct
/// subsets may run concurrently; the cache acts as a single atomic map.
class ObjectiveOracle {
 public:
  ObjectiveOracle(std::function<double(BidderSet)> eval, int n_bidders)
      : eval_(std::move(eval)), n_(n_bidders) {}

  double evaluate(BidderSet s) const {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(s.bits);
      if (it != cache_.end()) return it->second;
    }
    double v = eval_(s);
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = cache_.emplace(s.bits, v);
    if (inserted) ++eval_count_;
    return it->second;
  }

  int n() const { return n_; }
  long eval_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return eval_count_;
  }
  std::map<std::uint64_t, double> cached() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_;
  }

 private:
  std::function<double(BidderSet)> eval_;
  int n_;
  mutable std::map<std::uint64_t, double> cache_;
  mutable long eval_count_ = 0;
  mutable std::mutex mu_;
};

/// Verifies J(R) <= J(S) + tol on every cached nested pair. Returns the
/// first violating pair, or nullopt when the monotone invariant holds.
inline std::optional<std::pair<BidderSet, BidderSet>> find_monotonicity_violation(
    const ObjectiveOracle& oracle, double tol = 1e-7) {
  auto cache = oracle.cached();
  for (const auto& [s_bits, js] : cache)
    for (const auto& [r_bits, jr] : cache)
      if ((s_bits & ~r_bits) == 0 && jr > js + tol)
        return std::make_pair(BidderSet{s_bits}, BidderSet{r_bits});
  return std::nullopt;
}

}  // namespace supermod

#endif  // SUPERMOD_ORACLE_HPP
