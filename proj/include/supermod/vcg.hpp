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
// VCG mechanism with the Clarke pivot: p_l = b_l(x*_l) + J(B_-l) - J(B).
// Utilities are always evaluated against the supplied true costs, so the
// same entry point serves truthful runs and manipulation experiments.

#ifndef SUPERMOD_VCG_HPP
#define SUPERMOD_VCG_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "supermod/dispatch.hpp"
#include "supermod/market.hpp"
#include "supermod/rng.hpp"

namespace supermod {

/// The Clarke pivot J(B_-l) is undefined when removing bidder l leaves the
/// dispatch infeasible.
struct PivotUndefined : std::runtime_error {
  explicit PivotUndefined(BidderId l)
      : std::runtime_error("pivot undefined: removal of bidder " +
                           std::to_string(l) + " is infeasible"),
        bidder(l) {}
  BidderId bidder;
};

struct VcgOutcome {
  std::map<BidderId, double> payments;
  std::map<BidderId, double> utilities;
  double operator_utility = 0.0;
  double j_full = 0.0;
  std::map<BidderId, double> j_minus;
  DispatchResult dispatch;
};

/// Runs the auction for `profile` and prices it with the VCG payment rule.
/// Throws PivotUndefined if some J(B_-l) is infinite and the full problem
/// is feasible; propagates Infeasible as an objective of +infinity.
inline VcgOutcome run_vcg(const MarketInstance& instance, const BidProfile& profile,
                          const BidProfile& true_costs,
                          const DispatchOptions& opt = {}) {
  VcgOutcome out;
  BidderSet all = all_bidders(instance);
  out.dispatch = solve(instance, profile, all, opt);
  if (out.dispatch.status != DispatchStatus::Optimal)
    throw DomainError("market is infeasible under the full bid profile");
  out.j_full = out.dispatch.objective;

  for (int pos : all.positions()) {
    const Bidder& bidder = instance.bidders[pos];
    DispatchResult without = solve(instance, profile, all.without(pos), opt);
    if (without.status != DispatchStatus::Optimal) throw PivotUndefined(bidder.id);
    out.j_minus[bidder.id] = without.objective;
  }

  double total_payments = 0.0;
  for (int pos : all.positions()) {
    const Bidder& bidder = instance.bidders[pos];
    double x = out.dispatch.allocation.at(bidder.id);
    double p = eval_bid(profile.at(bidder.id), x) + out.j_minus.at(bidder.id) -
               out.j_full;
    out.payments[bidder.id] = p;
    out.utilities[bidder.id] = p - eval_bid(true_costs.at(bidder.id), x);
    total_payments += p;
  }
  out.operator_utility = -total_payments - eval_d_linear(instance, out.dispatch);
  return out;
}

/// Truthful-profile check: no bidder ends below zero utility.
inline bool check_individual_rationality(const VcgOutcome& outcome,
                                         double tol = 1e-9) {
  for (const auto& [id, u] : outcome.utilities)
    if (u < -tol) return false;
  return true;
}

struct DsicReport {
  double max_gain = -kInfinity;
  long n_evaluated = 0;
  long n_skipped = 0;  // pivot-undefined samples
};

/// Samples unilateral deviations (zero bids, price scalings bounded away
/// from 1, cap truncations) for random bidders against random opponent
/// profiles and reports the largest utility gain over bidding truthfully.
/// Dominant-strategy incentive compatibility predicts max_gain <= 0.
inline DsicReport check_dsic_sample(const MarketInstance& instance,
                                    int n_deviations, std::uint64_t seed,
                                    const DispatchOptions& opt = {}) {
  DsicReport report;
  SplitMix64 rng(seed);
  const int n = static_cast<int>(instance.bidders.size());
  BidProfile truth = truthful_profile(instance);

  for (int it = 0; it < n_deviations; ++it) {
    int pos = static_cast<int>(rng.next() % n);
    const Bidder& deviator = instance.bidders[pos];

    BidProfile opponents = truth;
    for (const auto& b : instance.bidders)
      if (b.id != deviator.id)
        opponents.bids[b.id] = scale_bid_price(b.true_cost, rng.uniform(0.5, 2.0));

    BidFunction deviation = deviator.true_cost;
    switch (rng.next() % 4) {
      case 0:
        deviation = zero_bid_like(deviator.true_cost);
        break;
      case 1:
        deviation = scale_bid_price(deviator.true_cost, rng.uniform(0.4, 0.9));
        break;
      case 2:
        deviation = scale_bid_price(deviator.true_cost, rng.uniform(1.1, 2.5));
        break;
      default:
        deviation = truncate_bid(deviator.true_cost, rng.uniform(0.3, 0.9));
        break;
    }

    BidProfile deviated = opponents;
    deviated.bids[deviator.id] = deviation;
    try {
      VcgOutcome honest = run_vcg(instance, opponents, truth, opt);
      VcgOutcome strategic = run_vcg(instance, deviated, truth, opt);
      double gain = strategic.utilities.at(deviator.id) -
                    honest.utilities.at(deviator.id);
      report.max_gain = std::max(report.max_gain, gain);
      ++report.n_evaluated;
    } catch (const PivotUndefined&) {
      ++report.n_skipped;
    } catch (const DomainError&) {
      ++report.n_skipped;  // deviated profile left the market infeasible
    }
  }
  return report;
}

}  // namespace supermod

#endif  // SUPERMOD_VCG_HPP
