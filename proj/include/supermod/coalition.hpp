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
// Coalitional analysis of VCG outcomes: core membership, certified bounds
// on the profitability of collusion and shill bidding in terms of the
// supermodularity ratio, merged-bid construction, and manipulation
// simulators that stress those bounds empirically.

#ifndef SUPERMOD_COALITION_HPP
#define SUPERMOD_COALITION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "supermod/dispatch.hpp"
#include "supermod/market.hpp"
#include "supermod/rng.hpp"
#include "supermod/setfunc.hpp"
#include "supermod/vcg.hpp"

namespace supermod {

struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CoreCheck {
  bool in_core = false;
  // Slack of u0 + sum_{l in S} u_l >= -J(C_S); negative means violated.
  // Holds every violated or tight subset.
  std::vector<std::pair<BidderSet, double>> blocking;
  double equality_residual = 0.0;  // u0 + sum u_l + J(C)
};

enum class ManipulationKind { Collusion, Shill };

struct ManipulationBound {
  ManipulationKind kind = ManipulationKind::Collusion;
  BidderSet actor;
  BidderId owner = 0;  // shill case
  double gamma = 1.0;
  std::optional<double> bound_specific;  // uses the actual deviation
  double bound_worstcase = 0.0;          // uses the zero-price deviation
  std::optional<double> achieved;
};

/// Evaluates every core inequality of the truthful outcome by enumerating
/// proper coalitions; J(C_S) values are memoized through the oracle.
inline CoreCheck check_core(const MarketInstance& instance,
                            const BidProfile& true_costs, const VcgOutcome& outcome,
                            int exhaustive_cap = 12, double tol = 1e-7,
                            const DispatchOptions& opt = {}) {
  BidderSet full = all_bidders(instance);
  if (full.size() > exhaustive_cap)
    throw CapExceeded("too many bidders for exhaustive core check");
  ObjectiveOracle oracle = make_oracle(instance, true_costs, opt);

  CoreCheck out;
  double sum_u = 0.0;
  for (const auto& [id, u] : outcome.utilities) sum_u += u;
  out.equality_residual = outcome.operator_utility + sum_u + outcome.j_full;

  out.in_core = true;
  for_each_subset(full, [&](BidderSet s) {
    if (s == full) return;
    double js = oracle.evaluate(s);
    if (!std::isfinite(js)) return;  // -J(C_S) = -inf, vacuous
    double coalition_u = outcome.operator_utility;
    for (int pos : s.positions())
      coalition_u += outcome.utilities.at(instance.bidders[pos].id);
    double slack = coalition_u + js;
    if (slack < -tol) out.in_core = false;
    if (slack < tol) out.blocking.emplace_back(s, slack);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Merged bids (infimal convolution)

namespace coalition_detail {

struct MarginalPiece {
  double p0 = 0.0;  // marginal price at the start of the piece
  double p1 = 0.0;  // marginal price at the end (p1 == p0: flat step)
  double len = 0.0;
};

inline void marginal_pieces(const BidFunction& f, std::vector<MarginalPiece>& out) {
  if (auto* p = std::get_if<PiecewiseLinearBid>(&f.curve)) {
    const auto& bps = p->breakpoints;
    for (std::size_t i = 1; i < bps.size(); ++i) {
      double len = bps[i].first - bps[i - 1].first;
      double slope = (bps[i].second - bps[i - 1].second) / len;
      out.push_back({slope, slope, len});
    }
    return;
  }
  if (auto* q = std::get_if<QuadraticBid>(&f.curve)) {
    if (q->a > 0)
      out.push_back({q->b, q->b + 2.0 * q->a * q->cap_mw, q->cap_mw});
    else
      out.push_back({q->b, q->b, q->cap_mw});
    return;
  }
  const auto& pq = std::get<PiecewiseQuadraticBid>(f.curve);
  for (const auto& seg : pq.segments) {
    if (seg.quad > 0)
      out.push_back({seg.lin, seg.lin + 2.0 * seg.quad * seg.len, seg.len});
    else
      out.push_back({seg.lin, seg.lin, seg.len});
  }
}

/// Aggregate ramp quantity available at marginal price p (flat steps are
/// handled separately at their exact price).
inline double ramp_quantity(const std::vector<MarginalPiece>& pieces, double p) {
  double q = 0.0;
  for (const auto& piece : pieces) {
    if (piece.p1 <= piece.p0) continue;
    double t = (p - piece.p0) / (piece.p1 - piece.p0);
    q += std::clamp(t, 0.0, 1.0) * piece.len;
  }
  return q;
}

}  // namespace coalition_detail

/// Infimal convolution of the given bids: the cheapest way to supply each
/// total quantity using the component bids.
///
/// Discrete bids (blocks, menus) merge into the exact menu of acceptance
/// pattern sums; convex continuous bids merge by aggregating their marginal
/// price curves, yielding a piecewise-linear or piecewise-quadratic curve.
/// Discrete and continuous bids cannot be merged together.
inline BidFunction merge_bids(const std::vector<BidFunction>& bids) {
  if (bids.empty()) throw DomainError("cannot merge an empty bid list");
  if (bids.size() == 1) return bids.front();

  bool any_discrete = false, any_continuous = false;
  for (const auto& f : bids) (f.is_discrete() ? any_discrete : any_continuous) = true;
  if (any_discrete && any_continuous)
    throw DomainError("cannot merge discrete bids with continuous bids");

  if (any_discrete) {
    std::vector<std::pair<double, double>> menu{{0.0, 0.0}};
    for (const auto& f : bids) {
      auto pts = dispatch_detail::discrete_points(f);
      std::vector<std::pair<double, double>> next;
      for (const auto& [q0, c0] : menu)
        for (const auto& [q1, c1] : pts) next.emplace_back(q0 + q1, c0 + c1);
      std::sort(next.begin(), next.end());
      menu.clear();
      for (const auto& pt : next) {
        if (!menu.empty() && std::abs(pt.first - menu.back().first) <=
                                 1e-9 * (1.0 + pt.first)) {
          menu.back().second = std::min(menu.back().second, pt.second);
        } else {
          menu.push_back(pt);
        }
      }
    }
    return BidFunction::menu(std::move(menu));
  }

  using coalition_detail::MarginalPiece;
  std::vector<MarginalPiece> pieces;
  for (const auto& f : bids) coalition_detail::marginal_pieces(f, pieces);

  std::vector<double> prices;
  for (const auto& piece : pieces) {
    prices.push_back(piece.p0);
    prices.push_back(piece.p1);
  }
  std::sort(prices.begin(), prices.end());
  prices.erase(std::unique(prices.begin(), prices.end(),
                           [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
               prices.end());

  std::vector<PiecewiseQuadraticBid::Segment> segs;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    double p = prices[i];
    double jump = 0.0;
    for (const auto& piece : pieces)
      if (piece.p1 <= piece.p0 && std::abs(piece.p0 - p) <= 1e-12) jump += piece.len;
    if (jump > 0) segs.push_back({jump, p, 0.0});
    if (i + 1 < prices.size()) {
      double pn = prices[i + 1];
      double q0 = coalition_detail::ramp_quantity(pieces, p);
      double q1 = coalition_detail::ramp_quantity(pieces, pn);
      if (q1 - q0 > 1e-12)
        segs.push_back({q1 - q0, p, (pn - p) / (q1 - q0) / 2.0});
    }
  }

  bool linear = std::all_of(segs.begin(), segs.end(),
                            [](const auto& s) { return s.quad == 0.0; });
  if (linear) {
    std::vector<std::pair<double, double>> bps{{0.0, 0.0}};
    for (const auto& s : segs)
      bps.emplace_back(bps.back().first + s.len, bps.back().second + s.lin * s.len);
    return BidFunction::piecewise(std::move(bps));
  }
  return BidFunction::piecewise_quadratic(std::move(segs));
}

// ---------------------------------------------------------------------------
// Theorem bounds

namespace coalition_detail {

inline BidProfile with_bids(const MarketInstance& instance, const BidProfile& base,
                            BidderSet k,
                            const std::function<BidFunction(const Bidder&)>& bid_for) {
  BidProfile out = base;
  for (int pos : k.positions()) {
    const Bidder& b = instance.bidders[pos];
    out.bids[b.id] = bid_for(b);
  }
  return out;
}

}  // namespace coalition_detail

/// Theorem bound on the collective profit of a losing coalition K:
///   (1/gamma - 1) * [J(C) - J(C_-K, B_K)]
/// where C = (profile_minus_k, true costs of K). The worst-case variant
/// replaces B_K with zero-price bids over the colluders' domains.
/// Preconditions: gamma in (0, 1]; every K member loses under truth.
inline ManipulationBound collusion_bound(const MarketInstance& instance,
                                         const BidProfile& profile_minus_k,
                                         BidderSet k, double gamma,
                                         const std::optional<BidProfile>& deviation =
                                             std::nullopt,
                                         const DispatchOptions& opt = {}) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw PreconditionError("gamma must lie in (0, 1]");
  BidderSet full = all_bidders(instance);
  using coalition_detail::with_bids;

  BidProfile truthful_k = with_bids(instance, profile_minus_k, k,
                                    [](const Bidder& b) { return b.true_cost; });
  DispatchResult truthful = solve(instance, truthful_k, full, opt);
  if (truthful.status != DispatchStatus::Optimal)
    throw PreconditionError("market infeasible under the truthful profile");
  for (int pos : k.positions()) {
    const Bidder& b = instance.bidders[pos];
    if (truthful.allocation.at(b.id) > 1e-6)
      throw PreconditionError("coalition member " + std::to_string(b.id) +
                              " wins under truthful bidding");
  }

  ManipulationBound out;
  out.kind = ManipulationKind::Collusion;
  out.actor = k;
  out.gamma = gamma;
  double factor = 1.0 / gamma - 1.0;

  BidProfile zeros = with_bids(instance, profile_minus_k, k, [](const Bidder& b) {
    return zero_bid_like(b.true_cost);
  });
  double j_zero = solve(instance, zeros, full, opt).objective;
  out.bound_worstcase = factor * (truthful.objective - j_zero);

  if (deviation) {
    BidProfile dev = profile_minus_k;
    for (int pos : k.positions()) {
      const Bidder& b = instance.bidders[pos];
      dev.bids[b.id] = deviation->at(b.id);
    }
    double j_dev = solve(instance, dev, full, opt).objective;
    out.bound_specific = factor * (truthful.objective - j_dev);
  }
  return out;
}

/// Total VCG utility of coalition K when it deviates to `deviation_k` while
/// the rest of the market bids `profile_minus_k`; utilities are measured
/// against true costs.
inline double coalition_utility(const MarketInstance& instance,
                                const BidProfile& profile_minus_k, BidderSet k,
                                const BidProfile& deviation_k,
                                const DispatchOptions& opt = {}) {
  BidProfile profile = profile_minus_k;
  for (int pos : k.positions()) {
    const Bidder& b = instance.bidders[pos];
    profile.bids[b.id] = deviation_k.at(b.id);
  }
  VcgOutcome outcome = run_vcg(instance, profile, truthful_profile(instance), opt);
  double total = 0.0;
  for (int pos : k.positions())
    total += outcome.utilities.at(instance.bidders[pos].id);
  return total;
}

struct CollusionStrategySpace {
  bool include_zero_bid = true;
  double scale_lo = 0.0;  // price scalings applied to true costs
  double scale_hi = 1.0;
};

/// Best-effort search for profitable collusion by the losing coalition K:
/// samples joint price scalings of the colluders' true costs (plus the
/// all-zero deviation). Returns the best total K-utility found.
inline double simulate_collusion(const MarketInstance& instance, BidderSet k,
                                 const CollusionStrategySpace& space, int n_samples,
                                 std::uint64_t seed, const DispatchOptions& opt = {}) {
  BidProfile truth = truthful_profile(instance);
  SplitMix64 rng(seed);
  double best = -kInfinity;
  auto try_deviation = [&](const BidProfile& dev) {
    try {
      best = std::max(best, coalition_utility(instance, truth, k, dev, opt));
    } catch (const PivotUndefined&) {
    } catch (const DomainError&) {
    }
  };
  if (space.include_zero_bid) {
    BidProfile dev;
    for (int pos : k.positions()) {
      const Bidder& b = instance.bidders[pos];
      dev.bids[b.id] = zero_bid_like(b.true_cost);
    }
    try_deviation(dev);
  }
  for (int it = 0; it < n_samples; ++it) {
    BidProfile dev;
    for (int pos : k.positions()) {
      const Bidder& b = instance.bidders[pos];
      dev.bids[b.id] =
          scale_bid_price(b.true_cost, rng.uniform(space.scale_lo, space.scale_hi));
    }
    try_deviation(dev);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Shill bidding

/// Market where bidder `owner` is replaced by synthetic shill identities at
/// the owner's bus, bidding `shills`.
struct ShillMarket {
  MarketInstance instance;
  BidProfile profile;
  std::vector<BidderId> shill_ids;
  BidderId owner = 0;
};

inline ShillMarket make_shill_market(const MarketInstance& base,
                                     const BidProfile& profile_minus_l, BidderId owner,
                                     const std::vector<BidFunction>& shills) {
  const Bidder* owner_bidder = base.find_bidder(owner);
  if (owner_bidder == nullptr) throw DomainError("unknown owner bidder");
  ShillMarket out;
  out.owner = owner;
  BidderId next_id = 0;
  for (const auto& b : base.bidders) next_id = std::max(next_id, b.id);
  for (const auto& b : base.bidders) {
    if (b.id == owner) continue;
    out.instance.bidders.push_back(b);
    out.profile.bids[b.id] = profile_minus_l.at(b.id);
  }
  out.instance.network = base.network;
  out.instance.d_linear.on_angle = base.d_linear.on_angle;
  for (const auto& [id, coef] : base.d_linear.on_allocation)
    if (id != owner) out.instance.d_linear.on_allocation[id] = coef;
  out.instance.types = base.types;
  for (const auto& s : shills) {
    Bidder shill;
    shill.id = ++next_id;
    shill.bus = owner_bidder->bus;
    shill.type = owner_bidder->type;
    shill.true_cost = s;
    shill.owner = owner;
    out.instance.bidders.push_back(shill);
    out.profile.bids[shill.id] = s;
    out.shill_ids.push_back(shill.id);
  }
  return out;
}

/// Theorem bound on the advantage of splitting into the bids B_S over one
/// truthful bid:  (1/gamma - 1) * [J(C_-l) - J(C_-l, B_S)], with the
/// worst case replacing B_S by a zero-price bid over l's own domain.
inline ManipulationBound shill_bound(const MarketInstance& instance,
                                     const BidProfile& profile_minus_l, BidderId owner,
                                     double gamma,
                                     const std::optional<std::vector<BidFunction>>&
                                         shills = std::nullopt,
                                     const DispatchOptions& opt = {}) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw PreconditionError("gamma must lie in (0, 1]");
  const Bidder* owner_bidder = instance.find_bidder(owner);
  if (owner_bidder == nullptr) throw DomainError("unknown owner bidder");
  BidderSet full = all_bidders(instance);
  int owner_pos = 0;
  for (std::size_t i = 0; i < instance.bidders.size(); ++i)
    if (instance.bidders[i].id == owner) owner_pos = static_cast<int>(i);

  DispatchResult without = solve(instance, profile_minus_l, full.without(owner_pos), opt);
  if (without.status != DispatchStatus::Optimal) throw PivotUndefined(owner);
  double j_minus = without.objective;

  ManipulationBound out;
  out.kind = ManipulationKind::Shill;
  out.owner = owner;
  out.actor = BidderSet::single(owner_pos);
  out.gamma = gamma;
  double factor = 1.0 / gamma - 1.0;

  BidProfile zero = profile_minus_l;
  zero.bids[owner] = zero_bid_like(owner_bidder->true_cost);
  double j_zero = solve(instance, zero, full, opt).objective;
  out.bound_worstcase = factor * (j_minus - j_zero);

  if (shills) {
    ShillMarket sm = make_shill_market(instance, profile_minus_l, owner, *shills);
    double j_shill =
        solve(sm.instance, sm.profile, all_bidders(sm.instance), opt).objective;
    out.bound_specific = factor * (j_minus - j_shill);
  }
  return out;
}

/// Total VCG utility the owner collects through the shill identities:
/// sum of shill payments minus the owner's true cost of the combined
/// allocation.
inline double shill_total_utility(const MarketInstance& instance,
                                  const BidProfile& profile_minus_l, BidderId owner,
                                  const std::vector<BidFunction>& shills,
                                  const DispatchOptions& opt = {}) {
  ShillMarket sm = make_shill_market(instance, profile_minus_l, owner, shills);
  VcgOutcome outcome = run_vcg(sm.instance, sm.profile, sm.profile, opt);
  double payments = 0.0, quantity = 0.0;
  for (BidderId id : sm.shill_ids) {
    payments += outcome.payments.at(id);
    quantity += outcome.dispatch.allocation.at(id);
  }
  const Bidder* owner_bidder = instance.find_bidder(owner);
  return payments - eval_bid(owner_bidder->true_cost, quantity);
}

}  // namespace supermod

#endif  // SUPERMOD_COALITION_HPP
