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
//
// Test-side reference implementations. These are written independently of
// the library internals (direct enumeration, grid search) so that agreement
// with the library is evidence, not tautology.

#ifndef SUPERMOD_TESTS_HELPERS_HPP
#define SUPERMOD_TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "supermod/bidderset.hpp"
#include "supermod/cases.hpp"
#include "supermod/market.hpp"
#include "supermod/rng.hpp"

namespace testref {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::string data_path(const std::string& name) {
  return std::string(SUPERMOD_DATA_DIR) + "/" + name;
}

inline std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Reference dispatch for a one-bus market of block bids only: enumerate
/// acceptance subsets whose quantities sum exactly to demand.
inline double block_dispatch(const std::vector<double>& quantity,
                             const std::vector<double>& price, double demand,
                             supermod::BidderSet active) {
  const int n = static_cast<int>(quantity.size());
  double best = kInf;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    if ((mask & ~active.bits) != 0) continue;
    double q = 0.0, c = 0.0;
    for (int i = 0; i < n; ++i)
      if ((mask >> i) & 1ULL) {
        q += quantity[i];
        c += price[i];
      }
    if (std::abs(q - demand) <= 1e-6 * (1.0 + demand)) best = std::min(best, c);
  }
  return best;
}

/// Reference one-bus dispatch of quadratic bids a_i x^2 + b_i x on [0, cap_i]
/// meeting demand exactly, by projected coordinate descent from a feasible
/// start. Good to ~1e-6 on small instances.
inline double quadratic_dispatch(const std::vector<double>& a,
                                 const std::vector<double>& b,
                                 const std::vector<double>& cap, double demand,
                                 supermod::BidderSet active) {
  const int n = static_cast<int>(a.size());
  std::vector<int> act;
  double total_cap = 0.0;
  for (int i = 0; i < n; ++i)
    if (active.contains(i)) {
      act.push_back(i);
      total_cap += cap[i];
    }
  if (total_cap < demand - 1e-9 * (1.0 + demand)) return kInf;
  std::vector<double> x(n, 0.0);
  double left = demand;
  for (int i : act) {
    x[i] = std::min(cap[i], left);
    left -= x[i];
  }
  // Pairwise exchange: move mass between i and j to equalize marginals.
  for (int sweep = 0; sweep < 2000; ++sweep) {
    double moved = 0.0;
    for (std::size_t p = 0; p < act.size(); ++p)
      for (std::size_t q = p + 1; q < act.size(); ++q) {
        int i = act[p], j = act[q];
        // minimize over t: c_i(x_i + t) + c_j(x_j - t)
        double denom = 2.0 * (a[i] + a[j]);
        double t = denom > 0
                       ? (2.0 * a[j] * x[j] + b[j] - 2.0 * a[i] * x[i] - b[i]) / denom
                       : (b[j] > b[i] ? cap[i] : -cap[j]);
        t = std::clamp(t, -x[i], cap[i] - x[i]);
        t = std::clamp(t, x[j] - cap[j], x[j]);
        x[i] += t;
        x[j] -= t;
        moved += std::abs(t);
      }
    if (moved < 1e-12 * (1.0 + demand)) break;
  }
  double cost = 0.0;
  for (int i : act) cost += a[i] * x[i] * x[i] + b[i] * x[i];
  return cost;
}

struct RatioResult {
  double gamma = 1.0;
  int k_feas = 0;
  bool has_pair = false;
};

/// Definition-level supermodularity ratio: minimum over every S subseteq L
/// and every nonempty K subseteq S with positive denominator.
inline RatioResult brute_ratio(const std::function<double(supermod::BidderSet)>& j,
                               int n, double den_floor = 1e-6) {
  RatioResult out;
  supermod::BidderSet full = supermod::BidderSet::full(n);
  double gamma = kInf;
  supermod::for_each_subset(full, [&](supermod::BidderSet s) {
    if (s.is_empty()) return;
    double js = j(s);
    if (!std::isfinite(js)) return;
    supermod::for_each_subset(s, [&](supermod::BidderSet k) {
      if (k.is_empty()) return;
      double jsk = j(s.minus(k));
      if (!std::isfinite(jsk)) return;
      double den = 0.0;
      for (int l : k.positions()) den += j(s.without(l)) - js;
      den = std::max(den, 0.0);
      if (den <= den_floor * (1.0 + std::abs(js))) return;
      double num = std::max(jsk - js, 0.0);
      gamma = std::min(gamma, num / den);
      out.has_pair = true;
    });
  });
  out.gamma = out.has_pair ? gamma : 1.0;

  // k_feas: largest k such that some K of size k leaves a feasible market.
  for (int keep = 0; keep <= n; ++keep) {
    bool found = false;
    supermod::for_each_subset(full, [&](supermod::BidderSet t) {
      if (found || t.size() != keep) return;
      if (std::isfinite(j(t))) found = true;
    });
    if (found) {
      out.k_feas = n - keep;
      break;
    }
  }
  return out;
}

/// Minimum of sum of bid costs over a grid split of total quantity q among
/// the bids; lower-bounds (up to grid resolution) the true merged cost.
inline double grid_merge_cost(const std::vector<supermod::BidFunction>& bids,
                              double q, int steps = 2000) {
  if (bids.size() == 1) return supermod::eval_bid(bids[0], q);
  // Two-bid split; recurse for more.
  double best = kInf;
  std::vector<supermod::BidFunction> rest(bids.begin() + 1, bids.end());
  double cap0 = bids[0].max_quantity();
  for (int i = 0; i <= steps; ++i) {
    double q0 = cap0 * i / steps;
    if (q0 > q + 1e-12) break;
    double c0;
    try {
      c0 = supermod::eval_bid(bids[0], q0);
    } catch (const supermod::DomainError&) {
      continue;
    }
    try {
      best = std::min(best, c0 + grid_merge_cost(rest, q - q0, steps));
    } catch (const supermod::DomainError&) {
    }
  }
  return best;
}

/// Small random one-bus market of quadratic bidders, occasionally short on
/// capacity so that subsets go infeasible.
inline supermod::MarketInstance random_instance(std::uint64_t seed, int n_bidders) {
  supermod::SplitMix64 rng(seed);
  supermod::MarketInstance inst;
  inst.name = "random-" + std::to_string(seed);
  double total_cap = 0.0;
  for (int i = 0; i < n_bidders; ++i) {
    double cap = rng.uniform(50.0, 200.0);
    total_cap += cap;
    supermod::Bidder b;
    b.id = i + 1;
    b.bus = 1;
    b.true_cost = supermod::BidFunction::quadratic(rng.uniform(0.002, 0.04),
                                                   rng.uniform(5.0, 40.0), cap);
    inst.bidders.push_back(b);
  }
  // Demand between ~40% and ~95% of capacity: large enough that dropping a
  // few bidders often breaks feasibility.
  double demand = total_cap * rng.uniform(0.4, 0.95);
  inst.network = supermod::single_bus_network(demand);
  return inst;
}

/// Two-bus variant: generation split across a limited line, giving network-
/// driven infeasibility patterns.
inline supermod::MarketInstance random_networked_instance(std::uint64_t seed,
                                                          int n_bidders) {
  supermod::SplitMix64 rng(seed);
  supermod::MarketInstance inst;
  inst.name = "random-net-" + std::to_string(seed);
  inst.network.buses = {supermod::Bus{1, 0.0}, supermod::Bus{2, 0.0}};
  inst.network.reference_bus = 1;
  double total_cap = 0.0;
  for (int i = 0; i < n_bidders; ++i) {
    double cap = rng.uniform(50.0, 200.0);
    total_cap += cap;
    supermod::Bidder b;
    b.id = i + 1;
    b.bus = (i % 2) + 1;
    b.true_cost = supermod::BidFunction::quadratic(rng.uniform(0.002, 0.04),
                                                   rng.uniform(5.0, 40.0), cap);
    inst.bidders.push_back(b);
  }
  double demand = total_cap * rng.uniform(0.4, 0.9);
  inst.network.buses[1].demand_mw = demand;
  inst.network.lines.push_back(
      supermod::Line{1, 2, 5.0, demand * rng.uniform(0.3, 1.2)});
  return inst;
}

}  // namespace testref

#endif  // SUPERMOD_TESTS_HELPERS_HPP
